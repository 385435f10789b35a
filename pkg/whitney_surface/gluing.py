"""
Recollement inductif des graphes locaux en une surface C¹ Σ₀ tangente à E sur K.

La surface est un graphe au-dessus d'un plan global; chaque graphe local y est
réexprimé par une résolution de Newton, puis mélangé à la surface courante par une
bosse radiale: Σ_k = (1 − θ_k)·Φ_k + θ_k·Σ_{k−1}, θ_k = 0 sur 0.6 r, 1 au-delà de 0.9 r.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy.linalg import subspace_angles

from cones.splitting import SplittingFrame
from core.utils import parallel_map
from invariant_set.sets import SampledInvariantSet
from smoothing.separators import smoothstep

from .charts import AdaptedChart, build_adapted_charts, canonical_frame
from .exceptions import GraphObstructionError
from .fitting import WHITNEY_TOLERANCE, LocalGraph, fit_local_graph

logger = logging.getLogger('whitney_surface')

BLEND_START = 0.6
BLEND_END = 0.9
NEWTON_ITERS = 40
NEWTON_TOLERANCE = 1e-13
GRAPH_SLOPE_BOUND = 5.0
TANGENT_STEP = 1e-6
PARAMETER_PADDING = 0.25


def _chart_planes(chart: AdaptedChart) -> np.ndarray:
    """Plans tangents prescrits (m, n, d) des points capturés, en coordonnées ambiantes."""
    d = chart.dim
    graphs = np.concatenate([np.broadcast_to(np.eye(d), (len(chart.slopes), d, d)), chart.slopes], axis=1)
    return np.einsum('ij,mjk->mik', chart.rotation, graphs)


def global_frame(charts: Sequence[AdaptedChart]) -> np.ndarray:
    """Rotation globale: plan dominant du projecteur moyen sur les plans prescrits."""
    planes = np.concatenate([_chart_planes(chart) for chart in charts])
    d = planes.shape[2]
    projectors = []
    for plane in planes:
        q, _ = np.linalg.qr(plane)
        projectors.append(q @ q.T)
    _, vectors = np.linalg.eigh(np.mean(projectors, axis=0))
    return canonical_frame(vectors[:, -d:])


@dataclass
class FittedSurface:
    """
    Surface initiale Σ₀, graphe au-dessus des d premières colonnes de frame.

    Attributes:
        frame: rotation globale (n, n)
        graphs: graphes locaux dans l'ordre de recollement
        parameter_box: boîte (d, 2) des paramètres de K, élargie
        order: indices des cartes dans l'ordre de recollement
        fit_residual: max_x ‖Σ₀(π(x)) − x‖ sur les points capturés
        tangent_defect: angle max entre T Σ₀ et E(x) sur les points capturés
    """
    frame: np.ndarray
    graphs: List[LocalGraph]
    parameter_box: np.ndarray
    order: List[int] = field(default_factory=list)
    fit_residual: float = 0.0
    tangent_defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.graphs[0].chart.dim

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def charts(self) -> List[AdaptedChart]:
        return [graph.chart for graph in self.graphs]

    @property
    def horizontal_frame(self) -> np.ndarray:
        return self.frame[:, :self.dim]

    @property
    def vertical_frame(self) -> np.ndarray:
        return self.frame[:, self.dim:]

    def parameters(self, points: np.ndarray) -> np.ndarray:
        """Coordonnées de base: projection orthogonale sur le plan global."""
        return np.atleast_2d(points) @ self.horizontal_frame

    def _chart_offsets(self, graph: LocalGraph, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Hauteurs globales du graphe local au-dessus de s et rayon relatif |u|/r (NaN hors carte)."""
        chart = graph.chart
        d = self.dim
        G_h = self.horizontal_frame
        R_h, R_v = chart.rotation[:, :d], chart.rotation[:, d:]
        linear = G_h.T @ R_h
        coupling = G_h.T @ R_v
        base = chart.center @ G_h

        offsets = np.full((len(s), self.ambient_dim - d), np.nan)
        radial = np.full(len(s), np.nan)
        try:
            u = np.linalg.solve(linear, (s - base).T).T
        except np.linalg.LinAlgError:
            return offsets, radial
        active = np.flatnonzero(np.linalg.norm(u, axis=1) <= 1.5 * chart.radius)
        if len(active) == 0:
            return offsets, radial

        u, target = u[active], s[active]
        scale = NEWTON_TOLERANCE * max(1.0, float(np.max(np.abs(target))))
        for _ in range(NEWTON_ITERS):
            heights, gradients = graph.evaluate(u)
            residual = base + u @ linear.T + heights @ coupling.T - target
            converged = np.max(np.abs(residual), axis=1) <= scale
            if converged.all():
                break
            jacobian = linear[None, :, :] + np.einsum('ak,mkd->mad', coupling, gradients)
            try:
                step = np.linalg.solve(jacobian, residual[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
            u = np.where(converged[:, None], u, u - step)
            if not np.all(np.isfinite(u)):
                u = np.nan_to_num(u, nan=np.inf)
                break
        finite = np.all(np.isfinite(u), axis=1)
        u = np.where(finite[:, None], u, 0.0)
        heights, _ = graph.evaluate(u)
        residual = base + u @ linear.T + heights @ coupling.T - target
        converged = finite & (np.max(np.abs(residual), axis=1) <= scale)
        points = chart.center + u @ R_h.T + heights @ R_v.T
        ratio = np.linalg.norm(u, axis=1) / chart.radius
        keep = converged & (ratio <= 1.0)
        offsets[active[keep]] = points[keep] @ self.vertical_frame
        radial[active[keep]] = ratio[keep]
        return offsets, radial

    def offsets(self, s: np.ndarray) -> np.ndarray:
        """Hauteurs globales (M, n − d) de Σ₀ au-dessus des paramètres s (NaN hors domaine)."""
        s = np.atleast_2d(np.asarray(s, dtype=float))
        pieces = [self._chart_offsets(graph, s) for graph in self.graphs]

        value = np.full((len(s), self.ambient_dim - self.dim), np.nan)
        nearest = np.full(len(s), np.inf)
        for offsets, radial in pieces:
            closer = np.nan_to_num(radial, nan=np.inf) < nearest
            value[closer] = offsets[closer]
            nearest[closer] = radial[closer]

        for offsets, radial in pieces:
            valid = np.isfinite(radial)
            theta = smoothstep((np.nan_to_num(radial) - BLEND_START) / (BLEND_END - BLEND_START))[:, None]
            blended = (1.0 - theta) * np.nan_to_num(offsets) + theta * np.nan_to_num(value)
            value = np.where(valid[:, None], blended, value)
        return value

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        """Points ambiants Σ₀(s)."""
        s = np.atleast_2d(np.asarray(s, dtype=float))
        return s @ self.horizontal_frame.T + self.offsets(s) @ self.vertical_frame.T

    def tangent(self, s: np.ndarray, step: float = TANGENT_STEP) -> np.ndarray:
        """Plans tangents (M, n, d) par différences centrées, orthonormalisés."""
        s = np.atleast_2d(np.asarray(s, dtype=float))
        columns = []
        for a in range(self.dim):
            shift = np.zeros(self.dim)
            shift[a] = step
            columns.append((self.evaluate(s + shift) - self.evaluate(s - shift)) / (2.0 * step))
        tangents = np.stack(columns, axis=-1)
        q, _ = np.linalg.qr(tangents)
        return q

    def in_domain(self, s: np.ndarray) -> np.ndarray:
        """Vrai là où Σ₀ est défini."""
        return np.all(np.isfinite(self.offsets(s)), axis=1)

    def project(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(self.parameters(points))

    def mesh(self, nodes_per_axis: int) -> np.ndarray:
        """Grille uniforme (nodes^d, d) sur la boîte des paramètres."""
        axes = [np.linspace(low, high, nodes_per_axis) for low, high in self.parameter_box]
        grid = np.meshgrid(*axes, indexing='ij')
        return np.stack([g.ravel() for g in grid], axis=-1)

    def mesh_rows(self, nodes_per_axis: int) -> List[List[float]]:
        s = self.mesh(nodes_per_axis)
        points = self.evaluate(s)
        return [list(a) + list(b) for a, b in zip(s, points)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dim': self.dim,
            'ambient_dim': self.ambient_dim,
            'frame': self.frame.tolist(),
            'parameter_box': self.parameter_box.tolist(),
            'order': list(self.order),
            'charts': [graph.to_dict() for graph in self.graphs],
            'fit_residual': self.fit_residual,
            'tangent_defect': self.tangent_defect,
        }


def _captured_data(chart: AdaptedChart) -> Tuple[np.ndarray, np.ndarray]:
    return chart.to_ambient(chart.horizontal, chart.heights), _chart_planes(chart)


def _check_graph_over(surface: FittedSurface, chart: AdaptedChart) -> None:
    """La surface courante doit être un graphe de pente bornée au-dessus de la nouvelle carte."""
    points, _ = _captured_data(chart)
    s = surface.parameters(points)
    defined = surface.in_domain(s)
    if not defined.any():
        return
    d = surface.dim
    for tangent, point in zip(surface.tangent(s[defined]), points[defined]):
        local = chart.rotation.T @ tangent
        horizontal, vertical = local[:d], local[d:]
        if np.min(np.linalg.svd(horizontal, compute_uv=False)) < 1e-8:
            raise GraphObstructionError(f"Surface verticale au-dessus de la carte en {point.tolist()}")
        slope = float(np.linalg.norm(vertical @ np.linalg.inv(horizontal), ord=2))
        if slope > GRAPH_SLOPE_BOUND:
            raise GraphObstructionError(
                f"La surface n'est pas un graphe au-dessus de la carte en {point.tolist()} (pente {slope:.2f})"
            )


def surface_errors(surface: FittedSurface, points: np.ndarray, planes: np.ndarray) -> Tuple[float, float]:
    """Écart maximal aux points et angle maximal aux plans prescrits."""
    s = surface.parameters(points)
    residual = float(np.max(np.linalg.norm(surface.evaluate(s) - points, axis=1)))
    angles = [float(np.max(subspace_angles(tangent, plane)))
              for tangent, plane in zip(surface.tangent(s), planes)]
    return residual, max(angles)


def glue_charts(charts: Sequence[AdaptedChart], graphs: Sequence[LocalGraph],
                order: Optional[Sequence[int]] = None) -> FittedSurface:
    """
    Recolle les graphes locaux dans l'ordre donné.

    Args:
        charts: Cartes adaptées
        graphs: Graphes locaux, un par carte
        order: Ordre de recollement (défaut: ordre des cartes)

    Returns:
        FittedSurface passant par les points capturés, tangente aux plans prescrits

    Raises:
        GraphObstructionError: la surface courante n'est pas un graphe au-dessus d'une carte
    """
    order = list(order) if order is not None else list(range(len(charts)))
    frame = global_frame(charts)
    d = charts[0].dim

    all_points = np.concatenate([_captured_data(chart)[0] for chart in charts])
    all_planes = np.concatenate([_captured_data(chart)[1] for chart in charts])
    params = all_points @ frame[:, :d]
    padding = PARAMETER_PADDING * min(chart.radius for chart in charts)
    box = np.column_stack([params.min(axis=0) - padding, params.max(axis=0) + padding])

    surface = FittedSurface(frame=frame, graphs=[], parameter_box=box)
    for k in order:
        if surface.graphs:
            _check_graph_over(surface, charts[k])
        surface.graphs.append(graphs[k])
        surface.order.append(k)
        logger.debug(f"Carte {k} recollée (centre {charts[k].center.tolist()})")

    surface.fit_residual, surface.tangent_defect = surface_errors(surface, all_points, all_planes)
    logger.info(
        f"Surface de dimension {d} recollée sur {len(charts)} carte(s): "
        f"écart {surface.fit_residual:.2e}, angle {surface.tangent_defect:.2e} rad"
    )
    return surface


def build_surface(K: Union[SampledInvariantSet, np.ndarray], split: SplittingFrame, target_radius: float,
                  tolerance: float = WHITNEY_TOLERANCE, periods=None, workers: int = 1) -> FittedSurface:
    """Cartes adaptées, graphes locaux en parallèle, puis recollement séquentiel."""
    charts = build_adapted_charts(K, split, target_radius, periods)
    graphs = parallel_map(lambda chart: fit_local_graph(chart, tolerance), charts, workers)
    return glue_charts(charts, graphs)
