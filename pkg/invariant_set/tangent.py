"""
Estimation de l'ensemble tangent τ₀ de K en un point z.

τ_ε est l'adhérence des directions (x−y)/‖x−y‖ pour x ≠ y dans K ∩ B(z, ε);
τ₀ est estimé par les directions qui persistent entre les deux plus petites échelles.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Union

import numpy as np
from scipy.linalg import orth
from scipy.spatial import cKDTree

from dynamics.topology import NeighborIndex, minimal_image

from .exceptions import TooFewPointsError
from .sets import SampledInvariantSet

ANGLE_TOLERANCE = np.deg2rad(5.0)
MAX_BALL_POINTS = 100


@dataclass
class TangentSetEstimate:
    """
    Directions unitaires estimées de τ₀ en z, fermées par v -> −v.

    Attributes:
        z: point de base
        directions: (m, n) vecteurs unitaires
        eps_ladder: échelles utilisées (croissantes)
        counts: nombre de points de K par échelle
    """
    z: np.ndarray
    directions: np.ndarray
    eps_ladder: List[float]
    counts: List[int] = field(default_factory=list)

    def max_angle_to(self, frame: np.ndarray) -> float:
        """Angle maximal (radians) entre les directions et span(frame)."""
        basis = orth(np.asarray(frame, dtype=float))
        along = np.linalg.norm(self.directions @ basis, axis=1)
        return float(np.max(np.arccos(np.clip(along, 0.0, 1.0))))

    def span_dimension(self, tol: float = 0.05) -> int:
        """Dimension numérique de l'espace engendré par les directions."""
        singular = np.linalg.svd(self.directions, compute_uv=False)
        return int(np.sum(singular > tol * singular[0]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'z': self.z.tolist(),
            'directions': len(self.directions),
            'eps_ladder': self.eps_ladder,
            'counts': self.counts,
            'span_dimension': self.span_dimension() if len(self.directions) else 0,
        }


def _ball_directions(index: NeighborIndex, points: np.ndarray, z: np.ndarray, eps: float, periods):
    inside = index.query_radius(z, eps)
    if len(inside) > MAX_BALL_POINTS:
        order = np.argsort(np.linalg.norm(minimal_image(points[inside] - z, periods), axis=1))
        inside = inside[order[:MAX_BALL_POINTS]]
    local = z + minimal_image(points[inside] - z, periods)
    i, j = np.triu_indices(len(local), k=1)
    differences = local[i] - local[j]
    lengths = np.linalg.norm(differences, axis=1)
    keep = lengths > 0.0
    units = differences[keep] / lengths[keep, None]
    return len(inside), np.concatenate([units, -units])


def estimate_tangent_set(K: Union[SampledInvariantSet, np.ndarray], z: np.ndarray,
                         eps_ladder: Sequence[float], periods=None,
                         angle_tolerance: float = ANGLE_TOLERANCE) -> TangentSetEstimate:
    """
    Estime τ₀(z) à partir des deux plus petites échelles de l'échelle ε.

    Args:
        K: Ensemble échantillonné ou nuage (N, n)
        z: Point de base
        eps_ladder: Échelles ε (au moins deux)
        periods: Topologie de l'espace ambiant
        angle_tolerance: Tolérance angulaire de persistance (radians)

    Returns:
        TangentSetEstimate

    Raises:
        TooFewPointsError: moins de deux points dans la plus petite boule
    """
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    periods = tuple(periods) if periods is not None else (None,) * points.shape[1]
    z = np.asarray(z, dtype=float)
    ladder = sorted(float(eps) for eps in eps_ladder)
    index = NeighborIndex(points, periods)

    counts, scales = [], []
    for eps in ladder[:2]:
        count, directions = _ball_directions(index, points, z, eps, periods)
        counts.append(count)
        scales.append(directions)
    if counts[0] < 2:
        raise TooFewPointsError(f"{counts[0]} point(s) de K dans B(z, {ladder[0]})")

    finest, coarser = scales[0], scales[-1]
    chord = 2.0 * np.sin(0.5 * angle_tolerance)
    if len(coarser):
        persistent = cKDTree(coarser).query(finest)[0] <= chord
    else:
        persistent = np.zeros(len(finest), dtype=bool)
    return TangentSetEstimate(z=z, directions=finest[persistent], eps_ladder=ladder, counts=counts)
