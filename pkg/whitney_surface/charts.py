"""
Cartes adaptées: recouvrement glouton de K par des disques où E(x) est horizontal
au centre et où K est un graphe au-dessus du plan horizontal.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union
import logging

import numpy as np
from scipy.linalg import orth
from scipy.spatial.distance import pdist

from cones.splitting import SplittingFrame
from dynamics.topology import NeighborIndex, minimal_image
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.exceptions import SplittingMissingError

from .exceptions import ChartFailureError

logger = logging.getLogger('whitney_surface')

SLOPE_BOUND = 1.0
INJECTIVITY_SLOPE = 2.0
MIN_RADIUS = 1e-4
COVER_FRACTION = 0.6
LOCATE_TOLERANCE = 1e-6


def _aligned_basis(projector: np.ndarray, k: int) -> np.ndarray:
    """Base orthonormale de l'image du projecteur, construite à partir des axes les mieux alignés."""
    axes = np.sort(np.argsort(-np.linalg.norm(projector, axis=0), kind='stable')[:k])
    Q, R = np.linalg.qr(projector[:, axes])
    diagonal = np.diag(R)
    if np.min(np.abs(diagonal)) < 1e-8:
        return orth(projector)[:, :k]
    return Q * np.where(diagonal < 0.0, -1.0, 1.0)


def canonical_frame(plane: np.ndarray) -> np.ndarray:
    """
    Rotation (n, n) dont les d premières colonnes engendrent le plan donné.

    Les bases horizontale et verticale sont alignées sur les axes de coordonnées:
    le plan xy de R³ donne l'identité.
    """
    plane = np.atleast_2d(np.asarray(plane, dtype=float))
    n, d = plane.shape
    basis = orth(plane)
    projector = basis @ basis.T
    horizontal = _aligned_basis(projector, d)
    if d == n:
        return horizontal
    vertical = _aligned_basis(np.eye(n) - projector, n - d)
    return np.hstack([horizontal, vertical])


def slopes_in_frame(rotation: np.ndarray, planes: np.ndarray) -> np.ndarray:
    """Pentes D = B·A⁻¹ des plans (N, n, d) écrits comme graphes dans la rotation donnée."""
    d = planes.shape[2]
    local = np.einsum('ji,njk->nik', rotation, planes)
    return np.linalg.solve(np.transpose(local[:, :d, :], (0, 2, 1)),
                           np.transpose(local[:, d:, :], (0, 2, 1))).transpose(0, 2, 1)


@dataclass
class AdaptedChart:
    """
    Carte adaptée centrée en un point de K.

    Attributes:
        center: centre de la carte
        rotation: (n, n), d premières colonnes = E(center)
        radius: rayon de capture
        indices: indices des points de K capturés
        horizontal: coordonnées horizontales u des points capturés (m, d)
        heights: hauteurs v (m, n − d)
        slopes: dérivées prescrites D(x) (m, n − d, d)
        periods: périodes des axes ambiants
    """
    center: np.ndarray
    rotation: np.ndarray
    radius: float
    indices: np.ndarray
    horizontal: np.ndarray
    heights: np.ndarray
    slopes: np.ndarray
    periods: Sequence[Optional[float]] = ()

    @property
    def dim(self) -> int:
        return self.horizontal.shape[1]

    @property
    def max_slope(self) -> float:
        if len(self.slopes) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.slopes, ord=2, axis=(1, 2))))

    def to_local(self, points: np.ndarray):
        periods = tuple(self.periods) or (None,) * len(self.center)
        local = minimal_image(np.atleast_2d(points) - self.center, periods) @ self.rotation
        return local[:, :self.dim], local[:, self.dim:]

    def to_ambient(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.center + np.concatenate([u, v], axis=-1) @ self.rotation.T

    def to_dict(self) -> Dict[str, Any]:
        return {
            'center': self.center.tolist(),
            'radius': self.radius,
            'captured': len(self.indices),
            'max_slope': self.max_slope,
        }


def chord_slope(horizontal: np.ndarray, heights: np.ndarray) -> float:
    """Plus grande pente ‖Δv‖/‖Δu‖ entre deux points capturés (inf si Δu = 0 et Δv ≠ 0)."""
    if len(horizontal) < 2:
        return 0.0
    du, dv = pdist(horizontal), pdist(heights)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(dv > 1e-14, dv / du, 0.0)
    return float(np.max(ratio))


def _try_chart(points, planes, center_index, radius, index, periods) -> Optional[AdaptedChart]:
    center = points[center_index]
    captured = index.query_radius(center, radius)
    rotation = canonical_frame(planes[center_index])
    d = planes.shape[2]
    try:
        slopes = slopes_in_frame(rotation, planes[captured])
    except np.linalg.LinAlgError:
        return None
    local = minimal_image(points[captured] - center, periods) @ rotation
    chart = AdaptedChart(center=center, rotation=rotation, radius=radius, indices=captured,
                         horizontal=local[:, :d], heights=local[:, d:], slopes=slopes, periods=periods)
    if chart.max_slope > SLOPE_BOUND * (1.0 + 1e-9):
        return None
    if chord_slope(chart.horizontal, chart.heights) > INJECTIVITY_SLOPE:
        return None
    return chart


def center_planes(K: np.ndarray, split: SplittingFrame, periods=None) -> np.ndarray:
    """Repères E(x) (N, n, d_E) aux points de K, lus dans la décomposition."""
    distances, nearest = NeighborIndex(split.points, periods).query(K)
    distances = np.atleast_1d(distances)
    if np.max(distances) > LOCATE_TOLERANCE * max(1.0, float(np.max(np.abs(K)))):
        worst = int(np.argmax(distances))
        raise SplittingMissingError(f"Décomposition absente en {K[worst].tolist()}")
    return split.E_frames[np.atleast_1d(nearest)]


def build_adapted_charts(K: Union[SampledInvariantSet, np.ndarray], split: SplittingFrame,
                         target_radius: float, periods=None) -> List[AdaptedChart]:
    """
    Recouvrement glouton de K par des cartes adaptées.

    Le centre de chaque nouvelle carte est le point non couvert le plus proche du
    barycentre des points non couverts. Une carte est réduite de moitié tant que la
    pente des plans E(x) dépasse 1 ou que K n'est pas un graphe au-dessus du plan
    horizontal; un point est couvert dès qu'il est à moins de 0.6 rayon d'un centre.

    Args:
        K: Ensemble invariant échantillonné
        split: Décomposition E ⊕ F sur K
        target_radius: Rayon visé des cartes
        periods: Périodes des axes ambiants

    Returns:
        Liste de cartes couvrant K

    Raises:
        ChartFailureError: injectivité impossible à tout rayon >= 1e-4
        SplittingMissingError: E absent en un point de K
    """
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    periods = tuple(periods) if periods else (None,) * points.shape[1]
    planes = center_planes(points, split, periods)
    index = NeighborIndex(points, periods)

    uncovered = np.ones(len(points), dtype=bool)
    charts = []
    while uncovered.any():
        candidates = np.flatnonzero(uncovered)
        barycenter = points[candidates].mean(axis=0)
        offsets = minimal_image(points[candidates] - barycenter, periods)
        center_index = int(candidates[np.argmin(np.linalg.norm(offsets, axis=1))])

        radius = target_radius
        chart = _try_chart(points, planes, center_index, radius, index, periods)
        while chart is None:
            radius *= 0.5
            if radius < MIN_RADIUS:
                raise ChartFailureError(
                    f"Aucune carte injective en {points[center_index].tolist()}: accumulation "
                    f"de K le long de la verticale (voir detect_connection)"
                )
            chart = _try_chart(points, planes, center_index, radius, index, periods)
        if radius < target_radius:
            logger.warning(f"Carte en {points[center_index].tolist()} réduite au rayon {radius:.3e}")

        charts.append(chart)
        uncovered[index.query_radius(points[center_index], COVER_FRACTION * radius)] = False
        uncovered[center_index] = False

    logger.info(f"{len(charts)} carte(s) adaptée(s) pour {len(points)} point(s)")
    return charts
