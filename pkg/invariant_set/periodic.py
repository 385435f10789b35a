"""
Recherche d'orbites périodiques par Newton sur f^p − id.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence
import logging

import numpy as np

from core.utils import parallel_map
from dynamics.exceptions import DynamicsException
from dynamics.maps import SmoothMap, evaluate, jacobian_at, orbit
from dynamics.topology import distance, minimal_image

logger = logging.getLogger('invariant_set')

DEDUP_DISTANCE = 1e-6
NEWTON_TOL = 1e-11
HYPERBOLIC_MARGIN = 1e-6


@dataclass
class PeriodicOrbit:
    """
    Orbite périodique et son spectre.

    Attributes:
        points: (p, n), points de l'orbite dans l'ordre de f
        period: période demandée p
        minimal_period: plus petite période
        multipliers: valeurs propres de Df^p
        hyperbolic: aucun multiplicateur de module 1
        unstable_dim: nombre de multiplicateurs de module > 1
    """
    points: np.ndarray
    period: int
    minimal_period: int
    multipliers: np.ndarray
    hyperbolic: bool
    unstable_dim: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': self.points.tolist(),
            'period': self.period,
            'minimal_period': self.minimal_period,
            'multipliers': [abs(m) for m in self.multipliers],
            'hyperbolic': self.hyperbolic,
            'unstable_dim': self.unstable_dim,
        }


def _newton(smooth_map: SmoothMap, period: int, seed: np.ndarray, max_iter: int) -> Optional[np.ndarray]:
    x = smooth_map.wrap(np.asarray(seed, dtype=float))
    identity = np.eye(smooth_map.dim)
    try:
        for _ in range(max_iter):
            points = orbit(smooth_map, x, period)
            residual = minimal_image(points[-1] - x, smooth_map.periods)
            if np.linalg.norm(residual) <= NEWTON_TOL * max(1.0, np.linalg.norm(x)):
                return x
            D = identity
            for point in points[:-1]:
                D = jacobian_at(smooth_map, point) @ D
            step = np.linalg.lstsq(D - identity, residual, rcond=None)[0]
            x = smooth_map.wrap(x - step)
            if np.linalg.norm(x) > 1e6:
                return None
    except (DynamicsException, np.linalg.LinAlgError):
        return None
    return None


def _classify(smooth_map: SmoothMap, x: np.ndarray, period: int) -> PeriodicOrbit:
    points = orbit(smooth_map, x, period)[:-1]
    minimal = period
    for q in range(1, period):
        if period % q == 0 and distance(points[q], points[0], smooth_map.periods) <= DEDUP_DISTANCE:
            minimal = q
            break

    D = np.eye(smooth_map.dim)
    for point in points:
        D = jacobian_at(smooth_map, point) @ D
    multipliers = np.linalg.eigvals(D)
    moduli = np.abs(multipliers)
    points = points[:minimal]
    points = np.roll(points, -int(np.lexsort(points.T[::-1])[0]), axis=0)
    return PeriodicOrbit(
        points=points,
        period=period,
        minimal_period=minimal,
        multipliers=multipliers,
        hyperbolic=bool(np.all(np.abs(moduli - 1.0) > HYPERBOLIC_MARGIN)),
        unstable_dim=int(np.sum(moduli > 1.0)),
    )


def find_periodic(smooth_map: SmoothMap, period: int, seeds: np.ndarray,
                  max_iter: int = 60, workers: int = 1) -> List[PeriodicOrbit]:
    """
    Newton sur f^p − id depuis chaque graine; orbites dédoublonnées à 1e-6 près.

    Args:
        smooth_map: Application
        period: Période p >= 1
        seeds: Graines (M, n)
        max_iter: Itérations de Newton par graine
        workers: Nombre de threads

    Returns:
        Liste d'orbites (éventuellement vide), triée par premier point
    """
    if period < 1:
        raise ValueError(f"Période invalide: {period}")

    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    roots = parallel_map(lambda seed: _newton(smooth_map, period, seed, max_iter), list(seeds), workers)

    orbits: List[PeriodicOrbit] = []
    for root in roots:
        if root is None:
            continue
        if any(np.min(distance(known.points, root, smooth_map.periods)) <= DEDUP_DISTANCE
               for known in orbits):
            continue
        orbits.append(_classify(smooth_map, root, period))

    orbits.sort(key=lambda o: tuple(o.points[0]))
    logger.info(f"{len(orbits)} orbite(s) de période {period} pour {smooth_map.name} "
                f"depuis {len(seeds)} graines")
    return orbits


def seed_grid(box: np.ndarray, per_axis: int) -> np.ndarray:
    """Grille régulière de graines dans une boîte (n, 2)."""
    box = np.asarray(box, dtype=float)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, len(box))


def periodic_samples(smooth_map: SmoothMap, max_period: int, seeds: np.ndarray,
                     workers: int = 1) -> np.ndarray:
    """
    Points de toutes les orbites périodiques hyperboliques de période <= max_period,
    utilisés comme échantillon d'un ensemble hyperbolique (fer à cheval).
    """
    points = []
    for period in range(1, max_period + 1):
        for found in find_periodic(smooth_map, period, seeds, workers=workers):
            if found.hyperbolic and found.minimal_period == period:
                points.extend(found.points)
    if not points:
        return np.zeros((0, smooth_map.dim))
    return np.unique(np.round(np.array(points), 12), axis=0)
