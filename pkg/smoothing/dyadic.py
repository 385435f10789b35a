"""
Partitions dyadiques du complémentaire d'un nuage de points K.

Un cube C de niveau k est retenu quand son triple Ĉ évite K alors que le triple
de son parent rencontre K; les cubes du niveau maximal qui touchent encore K
forment le collier de K et sont omis.
"""

from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import LevelOverflowError

logger = logging.getLogger('smoothing')

MAX_LEVEL = 40


@dataclass(frozen=True)
class DyadicCubeCover:
    """
    Recouvrement par cubes dyadiques.

    Attributes:
        levels: niveau k de chaque cube
        indices: coordonnées entières du coin inférieur, en unités de root_side·2^{-k}
        origin: coin inférieur de la grille de niveau 0
        root_side: côté des cubes de niveau 0
        max_level: niveau de troncature
    """
    levels: np.ndarray
    indices: np.ndarray
    origin: np.ndarray
    root_side: float
    max_level: int

    @property
    def domain_dim(self) -> int:
        return len(self.origin)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def sides(self) -> np.ndarray:
        return self.root_side * 2.0 ** (-self.levels.astype(float))

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (self.indices + 0.5) * self.sides[:, None]

    def containing(self, x: np.ndarray, strict: bool = False) -> np.ndarray:
        """Indices des cubes contenant x (intérieur seul si strict)."""
        offset = np.abs(np.asarray(x, dtype=float) - self.centers)
        half = 0.5 * self.sides[:, None]
        inside = offset < half if strict else offset <= half
        return np.flatnonzero(np.all(inside, axis=1))

    def to_list(self) -> list:
        return [{'level': int(k), 'center': c.tolist()} for k, c in zip(self.levels, self.centers)]


def build_cover(K: np.ndarray, box: np.ndarray, max_level: int,
                root_side: Optional[float] = None) -> DyadicCubeCover:
    """
    Construit la partition dyadique de box∖K tronquée au niveau max_level.

    Args:
        K: Nuage de points (m, n)
        box: Boîte (n, 2)
        max_level: Niveau le plus fin
        root_side: Côté des cubes de niveau 0 (plus grand côté de la boîte par défaut)

    Returns:
        DyadicCubeCover
    """
    if max_level > MAX_LEVEL:
        raise LevelOverflowError(f"Niveau maximal {max_level} > {MAX_LEVEL}")

    K = np.atleast_2d(np.asarray(K, dtype=float))
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    n = box.shape[0]
    origin = box[:, 0].copy()
    extent = box[:, 1] - box[:, 0]
    root_side = float(root_side or extent.max())
    tree = cKDTree(K)

    counts = np.ceil(extent / root_side - 1e-12).astype(int)
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing='ij')
    candidates = np.stack([g.ravel() for g in grids], axis=1)

    levels, indices = [], []
    for level in range(max_level + 1):
        if len(candidates) == 0:
            break
        side = root_side * 2.0 ** (-level)
        lower = origin + candidates * side
        # Cubes hors de la boîte (grille non alignée) écartés.
        inside_box = np.all((lower < box[:, 1]) & (lower + side > box[:, 0]), axis=1)
        candidates = candidates[inside_box]
        centers = origin + (candidates + 0.5) * side
        dist, _ = tree.query(centers, p=np.inf)
        touches = dist <= 1.5 * side

        selected = candidates[~touches]
        levels.append(np.full(len(selected), level, dtype=int))
        indices.append(selected)

        if level < max_level:
            children = []
            for corner in np.ndindex(*(2,) * n):
                children.append(2 * candidates[touches] + np.array(corner))
            candidates = np.concatenate(children) if children else candidates[:0]

    cover = DyadicCubeCover(
        levels=np.concatenate(levels) if levels else np.zeros(0, dtype=int),
        indices=np.concatenate(indices).reshape(-1, n) if indices else np.zeros((0, n), dtype=int),
        origin=origin,
        root_side=root_side,
        max_level=max_level,
    )
    logger.debug(f"Recouvrement dyadique: {len(cover)} cubes, niveaux <= {max_level}")
    return cover


def adjacency_level_gap(cover: DyadicCubeCover) -> int:
    """Écart de niveau maximal entre cubes adjacents (faces ou coins communs)."""
    if len(cover) < 2:
        return 0
    centers, sides = cover.centers, cover.sides
    tree = cKDTree(centers)
    gap = 0
    for i in range(len(cover)):
        radius = sides[i] * 0.5 + sides.max() * 0.5
        for j in tree.query_ball_point(centers[i], radius * 1.0001, p=np.inf):
            if j == i:
                continue
            reach = 0.5 * (sides[i] + sides[j])
            if np.all(np.abs(centers[i] - centers[j]) <= reach * (1.0 + 1e-12)):
                gap = max(gap, abs(int(cover.levels[i]) - int(cover.levels[j])))
    return gap
