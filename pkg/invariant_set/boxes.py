"""
Algorithme de subdivision pour l'ensemble invariant maximal dans une boîte U.

À chaque niveau toutes les boîtes sont bissectées selon tous les axes, puis on
élimine jusqu'à stabilité les boîtes dont l'image (sommets et centre, gonflée par
une borne de Lipschitz locale) ne rencontre pas l'union sous f ou sous f^{-1}.
"""

from typing import Optional
import itertools
import logging

import numpy as np
from scipy.spatial import cKDTree

from core.utils import parallel_map
from dynamics.maps import SmoothMap, jacobian_at
from dynamics.exceptions import MissingInverseError

from .exceptions import EmptyResultError
from .sets import BoxCover, SampledInvariantSet

logger = logging.getLogger('invariant_set')

INFLATION = 1.5
DEFAULT_SWEEPS = 64


class _BoxGrid:
    """Grille dyadique de U à un niveau donné, en coordonnées d'indices."""

    def __init__(self, U: np.ndarray, level: int, periods):
        self.U = U
        self.level = level
        self.periods = periods
        self.cells = 2 ** level
        self.width = (U[:, 1] - U[:, 0]) / self.cells

    def centers(self, index: np.ndarray) -> np.ndarray:
        return self.U[:, 0] + (index + 0.5) * self.width

    def to_index_space(self, x: np.ndarray) -> np.ndarray:
        return (x - self.U[:, 0]) / self.width - 0.5

    def refine(self, index: np.ndarray) -> np.ndarray:
        offsets = np.array(list(itertools.product((0, 1), repeat=index.shape[1])))
        return (2 * index[:, None, :] + offsets[None, :, :]).reshape(-1, index.shape[1])


class _SurvivorIndex:
    """Recherche des boîtes survivantes rencontrant un rectangle (axes périodiques inclus)."""

    def __init__(self, index: np.ndarray, grid: _BoxGrid):
        self.grid = grid
        shifts = [np.zeros(index.shape[1])]
        for axis, period in enumerate(grid.periods):
            if period:
                shifts = [s + k * grid.cells * np.eye(index.shape[1])[axis]
                          for s in shifts for k in (-1, 0, 1)]
        self.positions = np.concatenate([index + s for s in shifts]).astype(float)
        self.tree = cKDTree(self.positions)
        self.periodic = np.array([bool(p) for p in grid.periods])

    def meets(self, low: np.ndarray, high: np.ndarray) -> np.ndarray:
        """Rectangles [low, high] (coordonnées d'indices des centres) rencontrant une boîte."""
        hits = np.zeros(len(low), dtype=bool)
        finite = np.all(np.isfinite(low) & np.isfinite(high), axis=1)
        if not finite.any():
            return hits
        low, high = low[finite], high[finite]
        middle = 0.5 * (low + high)
        middle[:, self.periodic] = np.mod(middle[:, self.periodic] + 0.5, self.grid.cells) - 0.5
        half = 0.5 * (high - low) + 0.5
        radius = np.max(half, axis=1)
        found = np.zeros(len(low), dtype=bool)
        for k, candidates in enumerate(self.tree.query_ball_point(middle, radius, p=np.inf)):
            if candidates:
                gap = np.abs(self.positions[candidates] - middle[k])
                found[k] = bool(np.any(np.all(gap <= half[k] + 1e-9, axis=1)))
        hits[finite] = found
        return hits


def _image_rectangles(func, jac_func, centers: np.ndarray, halfwidths: np.ndarray, grid: _BoxGrid,
                      inflation_factor: float = INFLATION):
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=centers.shape[1])))
    samples = centers[:, None, :] + corners[None, :, :] * halfwidths
    samples = np.concatenate([samples, centers[:, None, :]], axis=1)
    with np.errstate(over='ignore', invalid='ignore'):
        images = func(samples)
    images = np.where(np.isfinite(images), images, np.inf)

    # Les images d'une boîte sur un axe périodique sont déroulées autour de l'image du centre.
    for axis, period in enumerate(grid.periods):
        if period:
            reference = images[:, -1:, axis]
            images[..., axis] = reference + (images[..., axis] - reference
                                             - period * np.round((images[..., axis] - reference) / period))

    inflation = inflation_factor * np.abs(jac_func(centers)) @ halfwidths
    low = images.min(axis=1) - inflation
    high = images.max(axis=1) + inflation
    return grid.to_index_space(low), grid.to_index_space(high)


def _survivors(smooth_map: SmoothMap, inverse: SmoothMap, grid: _BoxGrid, index: np.ndarray,
               sweeps: int, workers: int) -> np.ndarray:
    halfwidths = 0.5 * grid.width
    for sweep in range(sweeps):
        lookup = _SurvivorIndex(index, grid)
        centers = grid.centers(index)
        chunks = np.array_split(np.arange(len(index)), max(1, workers))

        def keep(chunk):
            if len(chunk) == 0:
                return np.zeros(0, dtype=bool)
            alive = np.ones(len(chunk), dtype=bool)
            for direction in (smooth_map, inverse):
                low, high = _image_rectangles(
                    direction.forward, lambda x: jacobian_at(direction, x),
                    centers[chunk], halfwidths, grid,
                )
                alive &= lookup.meets(low, high)
            return alive

        mask = np.concatenate(parallel_map(keep, chunks, workers))
        logger.debug(f"Niveau {grid.level}, balayage {sweep}: {mask.sum()}/{len(index)} boîtes")
        if mask.all():
            return index
        index = index[mask]
        if len(index) == 0:
            return index
    return index


def _cover_residual(smooth_map: SmoothMap, grid: _BoxGrid, index: np.ndarray) -> float:
    """Écart maximal entre l'image (non gonflée) d'une boîte et la boîte survivante la plus proche."""
    centers = grid.centers(index)
    low, high = _image_rectangles(smooth_map.forward, lambda x: jacobian_at(smooth_map, x),
                                  centers, 0.5 * grid.width, grid, inflation_factor=0.0)
    lookup = _SurvivorIndex(index, grid)
    middle = 0.5 * (low + high)
    periodic = lookup.periodic
    middle[:, periodic] = np.mod(middle[:, periodic] + 0.5, grid.cells) - 0.5
    _, nearest = lookup.tree.query(middle)
    gap = np.abs(lookup.positions[nearest] - middle) - (0.5 * (high - low) + 0.5)
    return float(np.max(np.linalg.norm(np.maximum(gap, 0.0) * grid.width, axis=1)))


def maximal_invariant(smooth_map: SmoothMap, U: np.ndarray, resolution: float,
                      steps: int = DEFAULT_SWEEPS, workers: int = 1) -> SampledInvariantSet:
    """
    Approche l'ensemble invariant maximal de f dans U à la résolution h.

    Args:
        smooth_map: Application inversible
        U: Boîte (n, 2)
        resolution: Côté maximal h des boîtes finales
        steps: Nombre maximal de balayages d'élimination par niveau
        workers: Nombre de threads

    Returns:
        SampledInvariantSet des centres survivants

    Raises:
        EmptyResultError: si toutes les boîtes sont éliminées
    """
    if not smooth_map.has_inverse:
        raise MissingInverseError(f"maximal_invariant exige l'inverse de {smooth_map.name}")

    U = np.asarray(U, dtype=float).reshape(smooth_map.dim, 2)
    levels = max(0, int(np.ceil(np.log2(np.max(U[:, 1] - U[:, 0]) / resolution - 1e-12))))
    inverse = smooth_map.inverse_map()
    periods = smooth_map.periods

    index = np.zeros((1, smooth_map.dim), dtype=int)
    grid = _BoxGrid(U, 0, periods)
    index = _survivors(smooth_map, inverse, grid, index, steps, workers)
    for level in range(1, levels + 1):
        if len(index) == 0:
            break
        grid = _BoxGrid(U, level, periods)
        index = _survivors(smooth_map, inverse, grid, grid.refine(index), steps, workers)
        logger.info(f"Subdivision de {smooth_map.name}: niveau {level}, {len(index)} boîtes")

    if len(index) == 0:
        raise EmptyResultError(f"Aucune boîte ne survit pour {smooth_map.name} dans U={U.tolist()}")

    cover = BoxCover(centers=grid.centers(index), halfwidths=0.5 * grid.width, domain=U, level=grid.level)
    residual = _cover_residual(smooth_map, grid, index)
    logger.info(f"Ensemble invariant de {smooth_map.name}: {len(index)} boîtes, résidu {residual:.3e}")
    return SampledInvariantSet(points=cover.centers, box_cover=cover, invariance_residual=residual)


def cover_is_invariant(smooth_map: SmoothMap, invariant_set: SampledInvariantSet) -> bool:
    """Vérifie que l'image de chaque boîte rencontre l'union, sous f et sous f^{-1}."""
    cover = invariant_set.box_cover
    if cover is None or cover.domain is None:
        return False
    grid = _BoxGrid(cover.domain, cover.level, smooth_map.periods)
    index = np.rint(grid.to_index_space(cover.centers)).astype(int)
    kept = _survivors(smooth_map, smooth_map.inverse_map(), grid, index, 1, 1)
    return len(kept) == len(index)
