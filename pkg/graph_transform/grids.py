"""
Grilles uniformes de paramètres et champs interpolés par splines cubiques.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.interpolate import RectBivariateSpline, make_interp_spline

from strong_manifolds.exceptions import DimensionUnsupportedError

logger = logging.getLogger('graph_transform')


@dataclass(frozen=True)
class ParameterGrid:
    """
    Grille uniforme (indexation ij) sur une boîte de paramètres, d ≤ 2.

    Attributes:
        axes: abscisses des nœuds, une par axe
        spacing: pas commun
    """
    axes: Tuple[np.ndarray, ...]
    spacing: float

    @classmethod
    def from_box(cls, box: np.ndarray, spacing: float, anchor: Optional[Sequence[float]] = None) -> 'ParameterGrid':
        """
        Grille de pas donné couvrant la boîte, un nœud tombant exactement sur anchor.

        Raises:
            DimensionUnsupportedError: boîte de dimension > 2
        """
        box = np.atleast_2d(np.asarray(box, dtype=float))
        if len(box) > 2:
            raise DimensionUnsupportedError(f"Maillage limité à d ≤ 2 (d={len(box)})")
        anchor = box.mean(axis=1) if anchor is None else np.asarray(anchor, dtype=float)
        axes = []
        for (low, high), origin in zip(box, anchor):
            first = int(np.floor((low - origin) / spacing))
            last = int(np.ceil((high - origin) / spacing))
            axes.append(origin + spacing * np.arange(first, last + 1))
        return cls(axes=tuple(axes), spacing=float(spacing))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def box(self) -> np.ndarray:
        return np.array([[axis[0], axis[-1]] for axis in self.axes])

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        box = self.box
        return np.all((s >= box[:, 0] - 1e-12) & (s <= box[:, 1] + 1e-12), axis=1)

    def clip(self, s: np.ndarray) -> np.ndarray:
        box = self.box
        return np.clip(np.atleast_2d(s), box[:, 0], box[:, 1])

    def neighbor_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Indices (i, j) des paires de nœuds voisins le long de chaque axe."""
        index = np.arange(self.size).reshape(self.shape)
        first, second = [], []
        for axis in range(self.dim):
            lower = [slice(None)] * self.dim
            upper = [slice(None)] * self.dim
            lower[axis] = slice(None, -1)
            upper[axis] = slice(1, None)
            first.append(index[tuple(lower)].ravel())
            second.append(index[tuple(upper)].ravel())
        return np.concatenate(first), np.concatenate(second)

    def to_dict(self) -> Dict[str, Any]:
        return {'shape': list(self.shape), 'spacing': self.spacing, 'box': self.box.tolist()}


class GridField:
    """
    Champ à k composantes donné aux nœuds, interpolé par splines cubiques.

    Les paramètres hors de la grille sont ramenés sur son bord.
    """

    def __init__(self, grid: ParameterGrid, values: np.ndarray):
        self.grid = grid
        self.values = np.asarray(values, dtype=float).reshape(grid.size, -1)
        self.components = self.values.shape[1]

        if grid.dim == 1:
            axis = grid.axes[0]
            self._spline = make_interp_spline(axis, self.values, k=min(3, len(axis) - 1))
            self._derivative = self._spline.derivative(1)
        else:
            x, y = grid.axes
            table = self.values.reshape(len(x), len(y), self.components)
            kx, ky = min(3, len(x) - 1), min(3, len(y) - 1)
            self._splines = [RectBivariateSpline(x, y, table[:, :, j], kx=kx, ky=ky)
                             for j in range(self.components)]

    def __call__(self, s: np.ndarray) -> np.ndarray:
        s = self.grid.clip(s)
        if self.grid.dim == 1:
            return np.asarray(self._spline(s[:, 0])).reshape(len(s), self.components)
        return np.stack([spline.ev(s[:, 0], s[:, 1]) for spline in self._splines], axis=-1)

    def gradient(self, s: np.ndarray) -> np.ndarray:
        """Dérivées (M, k, d)."""
        s = self.grid.clip(s)
        if self.grid.dim == 1:
            return np.asarray(self._derivative(s[:, 0])).reshape(len(s), self.components, 1)
        columns = []
        for spline in self._splines:
            columns.append(np.stack([spline.ev(s[:, 0], s[:, 1], dx=1),
                                     spline.ev(s[:, 0], s[:, 1], dy=1)], axis=-1))
        return np.stack(columns, axis=1)
