"""
Cas selle: intersection des surfaces centre-stable et centre-instable.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union
import itertools
import logging

import numpy as np
from scipy.linalg import orth, subspace_angles

from cones.splitting import estimate_splitting
from dynamics.maps import SmoothMap
from graph_transform.surfaces import CenterGraph, build_center_graph
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.connections import detect_connection

from .exceptions import IntersectionDegenerateError, StrongConnectionError

logger = logging.getLogger('verify')

DEGENERATE_DEGREES = 5.0
MAX_ROUNDS = 50
MOTION_TOLERANCE = 1e-10
MESH_POINTS = 9


@dataclass
class IntersectionSurface:
    """
    Surface S^cs ∩ S^cu échantillonnée autour de chaque point de K.

    Attributes:
        params: paramètres t (M, d_c) du maillage le long de E^c
        points: points (N_K, M, n) de l'intersection
        center_frames: repères (N_K, n, d_c) de E^c = E^cs ∩ E^cu
        rounds: nombre de tours de projection alternée
        motion: dernier déplacement maximal
        transversality: angle minimal (degrés) entre S^cs et S^cu en K
        tangent_angle: angle maximal (radians) entre la surface et E^c en K
        invariance_residual: écart maximal de f(points) à S^cs et à S^cu le long des fibres
    """
    params: np.ndarray
    points: np.ndarray
    center_frames: np.ndarray
    rounds: int
    motion: float
    transversality: float
    tangent_angle: float
    invariance_residual: float
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.params.shape[1]

    def rows(self) -> List[List[float]]:
        """Lignes CSV: indice du point de K, paramètres t, point ambiant."""
        return [[float(k)] + list(t) + list(p)
                for k, block in enumerate(self.points) for t, p in zip(self.params, block)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dim': self.dim,
            'K_points': int(len(self.points)),
            'mesh_points': int(len(self.params)),
            'rounds': self.rounds,
            'motion': self.motion,
            'transversality_degrees': self.transversality,
            'tangent_angle': self.tangent_angle,
            'invariance_residual': self.invariance_residual,
            'tolerances': self.tolerances,
        }


def _common_frames(A: np.ndarray, B: np.ndarray, d_c: int) -> np.ndarray:
    """Repères (N, n, d_c) de l'intersection de span(A) et span(B) (vecteurs principaux d'angle nul)."""
    frames = []
    for a, b in zip(A, B):
        U, _, _ = np.linalg.svd(a.T @ b)
        frames.append(orth(a @ U[:, :d_c]))
    return np.array(frames)


def transversality_degrees(cs: CenterGraph, cu: CenterGraph, d_c: int) -> float:
    """Plus petit angle hors de la direction commune entre les plans tangents de S^cs et S^cu en K."""
    first = cs.tangent(cs.tube.K_params)
    second = cu.tangent(cu.tube.K_params)
    worst = 90.0
    for a, b in zip(first, second):
        angles = np.sort(subspace_angles(a, b))[::-1]
        worst = min(worst, float(np.degrees(angles[:len(angles) - d_c].min())))
    return worst


def saddle_intersection(smooth_map: SmoothMap, K: Union[SampledInvariantSet, np.ndarray], d_uu: int, d_ss: int,
                        surface_radius: float, spacing: Optional[float] = None,
                        connection_radius: Optional[float] = None, check_connections: bool = True,
                        rounds: int = MAX_ROUNDS, motion_tol: float = MOTION_TOLERANCE,
                        mesh_points: int = MESH_POINTS, seed: int = 0, workers: int = 1) -> IntersectionSurface:
    """
    Construit S^cs (pour f, E^uu fort) et S^cu (pour f⁻¹, E^ss fort), puis leur intersection
    par projections alternées le long des fibres, à partir d'un maillage de E^c autour de K.

    Args:
        smooth_map: Application f (inversible)
        K: Ensemble invariant
        d_uu: Dimension de E^uu
        d_ss: Dimension de E^ss
        surface_radius: Rayon visé des cartes des surfaces initiales
        spacing: Pas des grilles de paramètres
        connection_radius: Rayon des feuilles fortes (défaut: surface_radius)
        check_connections: Exiger l'absence de connexion forte dans les deux sens
        rounds: Nombre maximal de tours de projection
        motion_tol: Déplacement d'arrêt
        mesh_points: Points du maillage par axe de E^c

    Returns:
        IntersectionSurface

    Raises:
        StrongConnectionError: connexion forte sous f ou f⁻¹
        IntersectionDegenerateError: angle entre S^cs et S^cu < 5°
    """
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    inverse = smooth_map.inverse_map()
    d_c = smooth_map.dim - d_uu - d_ss
    split_u = estimate_splitting(smooth_map, points, d_uu)
    split_s = estimate_splitting(inverse, points, d_ss)

    if check_connections:
        radius = connection_radius or surface_radius
        for label, mapping, split in (('f', smooth_map, split_u), ('f⁻¹', inverse, split_s)):
            report = detect_connection(mapping, K, split, radius, workers=workers)
            if report.has_connection:
                raise StrongConnectionError(
                    f"Connexion forte sous {label} ({len(report.pairs)} paire(s)): pas de surface tangente à E^c"
                )

    cs = build_center_graph(smooth_map, points, split_u, surface_radius, spacing=spacing, seed=seed, workers=workers)
    cu = build_center_graph(inverse, points, split_s, surface_radius, spacing=spacing, seed=seed, workers=workers)

    transversality = transversality_degrees(cs, cu, d_c)
    if transversality < DEGENERATE_DEGREES:
        raise IntersectionDegenerateError(f"S^cs et S^cu font un angle de {transversality:.2f}° en K")

    frames = _common_frames(split_u.E_frames, split_s.E_frames, d_c)
    band = 0.5 * min(cs.band, cu.band)
    axis = np.linspace(-band, band, mesh_points)
    params = np.array(list(itertools.product(axis, repeat=d_c)))
    current = (points[:, None, :] + np.einsum('knc,mc->kmn', frames, params)).reshape(-1, smooth_map.dim)

    motion, performed = np.inf, 0
    for performed in range(1, rounds + 1):
        moved = cu.project_onto(cs.project_onto(current))
        motion = float(np.max(np.abs(moved - current)))
        current = moved
        if motion <= motion_tol:
            break
    logger.info(f"Intersection: {performed} tour(s), déplacement {motion:.2e}")

    images = smooth_map.wrap(smooth_map.forward(current))
    gaps_cs, _, _ = cs.fiber_distance(images)
    gaps_cu, _, _ = cu.fiber_distance(images)
    residual = float(max(gaps_cs.max(), gaps_cu.max()))

    grid = current.reshape(len(points), len(params), smooth_map.dim)
    middle = len(params) // 2
    stride = mesh_points ** np.arange(d_c)[::-1]
    tangent_angle = 0.0
    for k in range(len(points)):
        chords = np.stack([grid[k, middle + s] - grid[k, middle - s] for s in stride], axis=-1)
        tangent_angle = max(tangent_angle, float(subspace_angles(chords, frames[k]).max()))

    surface = IntersectionSurface(
        params=params,
        points=grid,
        center_frames=frames,
        rounds=performed,
        motion=motion,
        transversality=transversality,
        tangent_angle=tangent_angle,
        invariance_residual=residual,
        tolerances={'motion': motion_tol, 'degenerate_degrees': DEGENERATE_DEGREES},
    )
    logger.info(f"Intersection tangente à E^c à {tangent_angle:.2e} rad, résidu d'invariance {residual:.2e}")
    return surface
