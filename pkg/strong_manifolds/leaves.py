"""
Croissance des feuilles fortement instables W^uu(x) par itération avant d'un disque
semé le long de l'orbite passée de x.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np
from scipy.spatial import Delaunay

from cones.splitting import SplittingFrame, pseudo_orbit
from dynamics.maps import SmoothMap, jacobian_at
from dynamics.topology import minimal_image

from .exceptions import DimensionUnsupportedError, SplittingMissingError

logger = logging.getLogger('strong_manifolds')

MAX_DEPTH = 60
SEED_ACCURACY = 1e-8
SEED_OVERSHOOT = 2.0
RATE_CHECK_STEPS = 10
BASE_TOLERANCE = 1e-6


@dataclass
class StrongLeafPatch:
    """
    Morceau de feuille forte autour de x.

    Attributes:
        base_point: x
        frame: F(x), (n, d)
        params: paramètres du maillage (M, d), 0 au point de base
        points: points ambiants (M, n), non repliés
        dense_params, dense_points: images exactes des points semés
        radius: rayon ρ effectivement atteint
        depth: profondeur N de l'ensemencement
        mu: contraction passée mesurée sur la feuille
        lambda_E: taux central de la décomposition
        triangles: triangulation des paramètres (d = 2)
        shrunk: rayon réduit faute d'étendue suffisante
    """
    base_point: np.ndarray
    frame: np.ndarray
    params: np.ndarray
    points: np.ndarray
    dense_params: np.ndarray
    dense_points: np.ndarray
    radius: float
    depth: int
    mu: float
    lambda_E: float
    triangles: Optional[np.ndarray] = None
    shrunk: bool = False

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @property
    def rate_certified(self) -> bool:
        return self.mu > self.lambda_E

    def tangent_at_base(self) -> np.ndarray:
        """Tangente unitaire au point de base (d = 1), différence centrée."""
        center = int(np.argmin(np.abs(self.params[:, 0])))
        tangent = self.points[center + 1] - self.points[center - 1]
        return tangent / np.linalg.norm(tangent)

    def closest(self, y: np.ndarray, periods=None) -> Tuple[float, np.ndarray, np.ndarray]:
        """Distance de y à la feuille dense, paramètre et point de feuille le plus proche."""
        periods = periods or (None,) * len(y)
        delta = minimal_image(self.dense_points - y, periods)
        distances = np.linalg.norm(delta, axis=1)
        k = int(np.argmin(distances))
        return float(distances[k]), self.dense_params[k], self.dense_points[k]

    def distance_to(self, y: np.ndarray, periods=None) -> float:
        """Distance de y à la feuille: polyligne dense (d = 1) ou sommets denses (d = 2)."""
        periods = periods or (None,) * len(y)
        if self.dim != 1:
            return self.closest(y, periods)[0]
        a = self.dense_points[:-1]
        segment = self.dense_points[1:] - a
        delta = minimal_image(y - a, periods)
        lengths = np.maximum(np.einsum('ij,ij->i', segment, segment), 1e-300)
        t = np.clip(np.einsum('ij,ij->i', delta, segment) / lengths, 0.0, 1.0)
        return float(np.min(np.linalg.norm(delta - t[:, None] * segment, axis=1)))

    def to_rows(self):
        return [list(p) + list(x) for p, x in zip(self.params, self.points)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'base_point': self.base_point.tolist(),
            'dim': self.dim,
            'radius': self.radius,
            'depth': self.depth,
            'mu': self.mu,
            'lambda_E': self.lambda_E,
            'rate_certified': self.rate_certified,
            'shrunk': self.shrunk,
            'mesh_points': len(self.points),
        }


def seeding_depth(lambda_E: float, lambda_F: float) -> Tuple[int, bool]:
    """Profondeur N telle que (λ_E/λ_F)^N <= 1e-8, plafonnée à 60."""
    ratio = lambda_E / lambda_F
    if ratio <= 0.0:
        return 1, False
    if ratio >= 1.0:
        return MAX_DEPTH, True
    depth = int(np.ceil(np.log(SEED_ACCURACY) / np.log(ratio)))
    return min(max(depth, 1), MAX_DEPTH), depth > MAX_DEPTH


def _push(smooth_map: SmoothMap, orbit_points: list, offsets: np.ndarray) -> np.ndarray:
    """Pousse des décalages le long de l'orbite: D <- f(x_k + D) − f(x_k)."""
    periods = smooth_map.periods
    for x in orbit_points[:-1]:
        base = smooth_map.forward(x)
        offsets = minimal_image(smooth_map.forward(x + offsets) - base, periods)
    return offsets


def _backward_rate(smooth_map: SmoothMap, x: np.ndarray, offsets: np.ndarray, steps: int) -> float:
    """Taux μ tel que d(f^{-n}x, f^{-n}y) ≈ μ^{-n} d(x, y), minimal sur les échantillons."""
    periods = smooth_map.periods
    start = np.linalg.norm(offsets, axis=1)
    orbit_points = pseudo_orbit(smooth_map, x[None, :], -steps)
    current = offsets
    for point in orbit_points[:-1]:
        base = smooth_map.inverse(point)
        current = minimal_image(smooth_map.inverse(point + current) - base, periods)
    end = np.linalg.norm(current, axis=1)
    return float(np.min((start / end) ** (1.0 / steps)))


def _grow_curve(smooth_map, orbit_points, F_start, radius, samples):
    cocycle_image = F_start[:, 0]
    for x in orbit_points[:-1]:
        cocycle_image = jacobian_at(smooth_map, x) @ cocycle_image
    half_length = SEED_OVERSHOOT * radius / np.linalg.norm(cocycle_image)

    t = np.linspace(-1.0, 1.0, 4 * samples + 1)[:, None] * half_length
    dense = _push(smooth_map, orbit_points, t * F_start[:, 0])
    steps = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(steps)])
    arclength -= arclength[2 * samples]

    reach = min(-arclength[0], arclength[-1])
    shrunk = reach < radius
    if shrunk:
        radius = 0.999 * reach
    sigma = np.linspace(-radius, radius, samples)
    resampled = np.column_stack([np.interp(sigma, arclength, dense[:, j]) for j in range(dense.shape[1])])
    return sigma[:, None], resampled, arclength[:, None], dense, radius, shrunk, None


def _grow_disk(smooth_map, orbit_points, F_start, F_base, radius, samples):
    pushed = F_start
    for x in orbit_points[:-1]:
        pushed = jacobian_at(smooth_map, x) @ pushed
    weakest = np.linalg.svd(pushed, compute_uv=False)[-1]
    half_length = SEED_OVERSHOOT * radius / weakest

    rings = max(samples // 8, 4)
    angles = np.linspace(0.0, 2.0 * np.pi, 4 * rings, endpoint=False)
    seeds = [np.zeros(2)]
    for r in np.linspace(0.0, 1.0, 2 * rings + 1)[1:]:
        seeds.extend(r * np.column_stack([np.cos(angles), np.sin(angles)]))
    seeds = np.array(seeds) * half_length

    dense = _push(smooth_map, orbit_points, seeds @ F_start.T)
    dense_params = dense @ F_base
    inside = np.linalg.norm(dense_params, axis=1) <= radius
    params, points = dense_params[inside], dense[inside]
    return params, points, dense_params, dense, radius, False, Delaunay(params).simplices


def grow_unstable_leaf(smooth_map: SmoothMap, split: SplittingFrame, x: np.ndarray,
                       radius: float, samples: int = 201) -> StrongLeafPatch:
    """
    Fait croître W^uu(x) de rayon ρ.

    Un disque de rayon ρ·μ^{-N} est semé dans x_{-N} + F(x_{-N}), puis poussé N pas
    en avant et reparamétré par longueur d'arc (d = 1) ou projection sur F(x) (d = 2).

    Args:
        smooth_map: Application inversible
        split: Décomposition estimée sur K
        x: Point de base dans K
        radius: Rayon ρ
        samples: Nombre de points du maillage (d = 1)

    Returns:
        StrongLeafPatch

    Raises:
        SplittingMissingError: x loin des points de la décomposition
        DimensionUnsupportedError: dim F > 2
        OrbitEscapeError: l'orbite passée sort de la région de travail
    """
    x = smooth_map.wrap(np.asarray(x, dtype=float))
    periods = smooth_map.periods
    index, distance = split.locate(x, periods)
    if distance > BASE_TOLERANCE * max(1.0, float(np.max(np.abs(x)))):
        raise SplittingMissingError(f"Aucun repère F près de {x.tolist()} (distance {distance:.2e})")
    if split.d_F > 2:
        raise DimensionUnsupportedError(f"Feuilles de dimension {split.d_F} non prises en charge")

    depth, capped = seeding_depth(split.lambda_E, split.lambda_F)
    if capped:
        radius *= 0.5
        logger.warning(f"Profondeur plafonnée à {MAX_DEPTH}: rayon réduit à {radius:.3e}")

    orbit_points = [p[0] for p in pseudo_orbit(smooth_map, x[None, :], -depth)][::-1]
    start_index, _ = split.locate(orbit_points[0], periods)
    F_start = split.F_frames[start_index]
    F_base = split.F_frames[index]

    if split.d_F == 1:
        grown = _grow_curve(smooth_map, orbit_points, F_start, radius, samples)
    else:
        grown = _grow_disk(smooth_map, orbit_points, F_start, F_base, radius, samples)
    params, offsets, dense_params, dense_offsets, radius, shrunk, triangles = grown
    if shrunk:
        logger.warning(f"Feuille en {x.tolist()}: rayon réduit à {radius:.3e}")

    norms = np.linalg.norm(params, axis=1)
    probes = offsets[np.argsort(-norms)[:4]]
    probes = probes[np.linalg.norm(probes, axis=1) > 0.0]
    mu = _backward_rate(smooth_map, x, probes, min(depth, RATE_CHECK_STEPS))

    patch = StrongLeafPatch(
        base_point=x,
        frame=F_base,
        params=params,
        points=x + offsets,
        dense_params=dense_params,
        dense_points=x + dense_offsets,
        radius=radius,
        depth=depth,
        mu=mu,
        lambda_E=split.lambda_E,
        triangles=triangles,
        shrunk=shrunk,
    )
    logger.debug(f"Feuille en {x.tolist()}: N={depth}, μ={mu:.4f}, ρ={radius:.3e}")
    return patch


def hausdorff_inside(small: StrongLeafPatch, large: StrongLeafPatch, periods=None) -> float:
    """sup sur les points de small de la distance à la feuille dense de large."""
    return max(large.distance_to(y, periods) for y in small.points)
