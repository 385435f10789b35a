"""
Détection de connexions fortes: W^uu(x) ∩ K ≠ {x}, à la résolution de l'échantillon près.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union
import logging

import numpy as np

from cones.exceptions import OrbitEscapeError
from cones.fields import ConeField
from cones.splitting import SplittingFrame, check_in_box
from core.utils import parallel_map
from dynamics.maps import SmoothMap, evaluate
from dynamics.topology import NeighborIndex, distance, minimal_image, wrap
from invariant_set.sets import SampledInvariantSet

from .leaves import grow_unstable_leaf

logger = logging.getLogger('strong_manifolds')

DELTA_FACTOR = 3.0
PAIR_SKIP = 2
PAIR_STEPS = 4
CONE_OPENING = 1.0


@dataclass
class ConnectionReport:
    """
    Rapport de détection: verdict par point de base et paires fautives.

    Le verdict « pas de connexion » ne vaut qu'à la résolution indiquée.
    """
    resolution: float
    delta: float
    exclusion: float
    radius: float
    per_point: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def has_connection(self) -> bool:
        return any(entry['offenders'] for entry in self.per_point)

    @property
    def pairs(self) -> List[Dict[str, Any]]:
        return [offender for entry in self.per_point for offender in entry['offenders']]

    @property
    def agreement(self) -> bool:
        return all(pair['pair_criterion'] for pair in self.pairs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'resolution': self.resolution,
            'delta': self.delta,
            'exclusion': self.exclusion,
            'radius': self.radius,
            'has_connection': self.has_connection,
            'agreement': self.agreement,
            'qualifier': f"verdict valable à la résolution {self.resolution:.3e}",
            'per_point': self.per_point,
        }


def _segment_in_cone(cone: ConeField, x: np.ndarray, delta: np.ndarray, periods) -> bool:
    for t in (0.0, 0.5, 1.0):
        if not bool(cone.contains(delta, wrap(x + t * delta, periods))):
            return False
    return True


def expansion_pair_test(smooth_map: SmoothMap, x: np.ndarray, y: np.ndarray, cone: ConeField,
                        factor: float = 2.0) -> bool:
    """
    Pour une paire proche dont le segment est tangent au cône: d(f(x), f(y)) >= factor·d(x, y).
    """
    periods = smooth_map.periods
    delta = minimal_image(np.asarray(y, dtype=float) - x, periods)
    if not _segment_in_cone(cone, np.asarray(x, dtype=float), delta, periods):
        return False
    before = float(np.linalg.norm(delta))
    after = float(distance(evaluate(smooth_map, x, 1), evaluate(smooth_map, y, 1), periods))
    return after >= factor * before * (1.0 - 1e-12)


def check_pair_criterion(smooth_map: SmoothMap, x: np.ndarray, y: np.ndarray, cone: ConeField,
                         eps: float, m: int, N: int, expansion: Optional[float] = None) -> bool:
    """
    Vrai ssi pour tout n dans [m, N]: d(f^{-n}x, f^{-n}y) <= ε et le segment
    [f^{-n}x, f^{-n}y] est tangent au cône (sommets et milieu).

    Args:
        expansion: facteur optionnel vérifié à chaque pas par expansion_pair_test

    Raises:
        OrbitEscapeError: une itérée passée quitte la région de travail
    """
    periods = smooth_map.periods
    xs = smooth_map.wrap(np.asarray(x, dtype=float))
    ys = smooth_map.wrap(np.asarray(y, dtype=float))
    for n in range(N + 1):
        if n >= m:
            delta = minimal_image(ys - xs, periods)
            gap = float(np.linalg.norm(delta))
            if gap > eps:
                return False
            if gap > 0.0 and not _segment_in_cone(cone, xs, delta, periods):
                return False
            if expansion is not None and gap > 0.0 and not expansion_pair_test(smooth_map, xs, ys, cone, expansion):
                return False
        if n == N:
            break
        xs, ys = evaluate(smooth_map, xs, -1), evaluate(smooth_map, ys, -1)
        check_in_box(smooth_map, np.stack([xs, ys]), 'passée')
    return True


def mesh_spacing(K: Union[SampledInvariantSet, np.ndarray], periods=None) -> float:
    """Résolution de K: côté des boîtes, sinon écart médian au plus proche voisin."""
    if isinstance(K, SampledInvariantSet) and K.box_cover is not None:
        return K.box_cover.resolution
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(K)
    if len(points) < 2:
        return 0.0
    distances, _ = NeighborIndex(points, periods).query(points, k=2)
    return float(np.median(distances[:, 1]))


def detect_connection(smooth_map: SmoothMap, K: Union[SampledInvariantSet, np.ndarray],
                      split: SplittingFrame, radius: float, tol: Optional[float] = None,
                      base_indices: Optional[Sequence[int]] = None, workers: int = 1) -> ConnectionReport:
    """
    Fait croître la feuille forte en chaque point de base et signale les points de K
    à distance <= δ de la feuille, hors de la zone d'exclusion |paramètre| <= 2δ.

    Chaque paire signalée est recoupée par check_pair_criterion sur le point de K lui-même:
    un point à δ près de la feuille mais hors d'elle est rejeté quand son écart transverse,
    dilaté par f⁻¹, fait sortir la paire du cône.

    Args:
        smooth_map: Application
        K: Ensemble invariant échantillonné
        split: Décomposition sur K
        radius: Rayon ρ des feuilles
        tol: δ (défaut: 3 fois la résolution de K)
        base_indices: Sous-échantillon de points de base (défaut: tous)
        workers: Nombre de threads

    Returns:
        ConnectionReport
    """
    periods = smooth_map.periods
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    resolution = mesh_spacing(K, periods)
    delta = tol if tol is not None else max(DELTA_FACTOR * resolution, 1e-6)
    exclusion = 2.0 * delta
    index = NeighborIndex(points, periods)
    cone = split.cone_field(CONE_OPENING, periods)
    bases = list(base_indices) if base_indices is not None else list(range(len(points)))

    def examine(i):
        x = points[i]
        leaf = grow_unstable_leaf(smooth_map, split, x, radius)
        candidates = set()
        for y in leaf.dense_points:
            candidates.update(int(k) for k in index.query_radius(y, delta))
        offenders = []
        for k in sorted(candidates):
            if k == i:
                continue
            gap = leaf.distance_to(points[k], periods)
            if gap > delta:
                continue
            _, parameter, _ = leaf.closest(points[k], periods)
            if float(np.linalg.norm(parameter)) <= exclusion:
                continue
            try:
                confirmed = check_pair_criterion(smooth_map, x, points[k], cone, 2.0 * radius,
                                                 PAIR_SKIP, PAIR_SKIP + PAIR_STEPS)
            except OrbitEscapeError:
                confirmed = False
            offenders.append({
                'base': i,
                'other': k,
                'distance': gap,
                'parameter': float(np.linalg.norm(parameter)),
                'pair_criterion': confirmed,
            })
        return {
            'index': i,
            'point': x.tolist(),
            'mu': leaf.mu,
            'rate_certified': leaf.rate_certified,
            'offenders': offenders,
        }

    per_point = parallel_map(examine, bases, workers)
    report = ConnectionReport(resolution=resolution, delta=delta, exclusion=exclusion,
                              radius=radius, per_point=per_point)
    logger.info(
        f"Connexions fortes de {smooth_map.name}: {len(report.pairs)} paire(s) sur "
        f"{len(bases)} point(s), δ={delta:.3e}, accord={report.agreement}"
    )
    return report
