"""
Ensemble invariant échantillonné: nuage de points, recouvrement par boîtes optionnel.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from dynamics.maps import SmoothMap, evaluate
from dynamics.topology import NeighborIndex, minimal_image


@dataclass
class BoxCover:
    """Boîtes alignées de même taille: centres (M, n), demi-largeurs (n,), grille d'origine."""
    centers: np.ndarray
    halfwidths: np.ndarray
    domain: Optional[np.ndarray] = None
    level: int = 0

    @property
    def resolution(self) -> float:
        return float(2.0 * np.max(self.halfwidths))

    def __len__(self) -> int:
        return len(self.centers)

    def distance_to_union(self, x: np.ndarray, periods=None) -> np.ndarray:
        """Distance (approchée par la boîte du centre le plus proche) de x à l'union."""
        x = np.atleast_2d(x)
        _, idx = NeighborIndex(self.centers, periods).query(x)
        delta = np.abs(minimal_image(x - self.centers[idx], periods or (None,) * x.shape[1]))
        return np.linalg.norm(np.maximum(delta - self.halfwidths, 0.0), axis=1)

    def contains(self, x: np.ndarray, periods=None) -> np.ndarray:
        return self.distance_to_union(x, periods) <= 1e-12

    def rows(self) -> List[List[float]]:
        return [list(c) + list(self.halfwidths) for c in self.centers]


@dataclass
class SampledInvariantSet:
    """
    Approximation finie d'un ensemble compact invariant K.

    Attributes:
        points: nuage (N, n)
        box_cover: recouvrement optionnel à la résolution h
        invariance_residual: max_x d(f(x), K), ou écart entre image de boîte et union
    """
    points: np.ndarray
    box_cover: Optional[BoxCover] = None
    invariance_residual: float = 0.0

    @classmethod
    def from_points(cls, smooth_map: SmoothMap, points: np.ndarray,
                    box_cover: Optional[BoxCover] = None) -> 'SampledInvariantSet':
        points = np.atleast_2d(np.asarray(points, dtype=float))
        images = evaluate(smooth_map, points, 1)
        if box_cover is not None:
            residual = float(np.max(box_cover.distance_to_union(images, smooth_map.periods)))
        else:
            residual = float(np.max(NeighborIndex(points, smooth_map.periods).distance_to(images)))
        return cls(points=points, box_cover=box_cover, invariance_residual=residual)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def resolution(self) -> Optional[float]:
        return self.box_cover.resolution if self.box_cover is not None else None

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': len(self.points),
            'dim': self.dim,
            'boxes': len(self.box_cover) if self.box_cover is not None else 0,
            'resolution': self.resolution,
            'invariance_residual': self.invariance_residual,
            'bounds': [[float(lo), float(hi)] for lo, hi in
                       zip(self.points.min(axis=0), self.points.max(axis=0))],
        }
