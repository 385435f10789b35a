"""
Topologie plate de l'espace ambiant: produits de droites et de cercles.

Chaque coordonnée porte une période (None pour une droite).
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

Periods = Tuple[Optional[float], ...]


def wrap(x: np.ndarray, periods: Periods) -> np.ndarray:
    """Ramène les coordonnées périodiques dans [0, période)."""
    x = np.array(x, dtype=float, copy=True)
    for axis, period in enumerate(periods):
        if period:
            x[..., axis] = np.mod(x[..., axis], period)
    return x


def minimal_image(delta: np.ndarray, periods: Periods) -> np.ndarray:
    """Représentant le plus court d'un déplacement sur le tore."""
    delta = np.array(delta, dtype=float, copy=True)
    for axis, period in enumerate(periods):
        if period:
            delta[..., axis] -= period * np.round(delta[..., axis] / period)
    return delta


def distance(a: np.ndarray, b: np.ndarray, periods: Periods) -> np.ndarray:
    """Distance euclidienne compatible avec les coordonnées périodiques."""
    return np.linalg.norm(minimal_image(np.asarray(b) - np.asarray(a), periods), axis=-1)


class NeighborIndex:
    """
    Index de plus proches voisins sur un nuage de points, avec copies fantômes
    le long des axes périodiques.
    """

    def __init__(self, points: np.ndarray, periods: Optional[Sequence[Optional[float]]] = None):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.periods = tuple(periods) if periods is not None else (None,) * self.points.shape[1]
        base = wrap(self.points, self.periods)

        shifts = [np.zeros(self.points.shape[1])]
        for axis, period in enumerate(self.periods):
            if not period:
                continue
            extended = []
            for shift in shifts:
                for k in (-1.0, 0.0, 1.0):
                    moved = shift.copy()
                    moved[axis] += k * period
                    extended.append(moved)
            shifts = extended

        self._n = len(base)
        self._tree = cKDTree(np.concatenate([base + shift for shift in shifts]))

    def __len__(self) -> int:
        return self._n

    def query(self, x: np.ndarray, k: int = 1):
        """Distances et indices (dans le nuage d'origine) des k plus proches voisins."""
        x = wrap(np.asarray(x, dtype=float), self.periods)
        dist, idx = self._tree.query(x, k=k)
        return dist, np.asarray(idx) % self._n

    def query_radius(self, x: np.ndarray, r: float) -> np.ndarray:
        """Indices distincts des points à distance <= r de x."""
        x = wrap(np.asarray(x, dtype=float), self.periods)
        idx = self._tree.query_ball_point(x, r)
        return np.unique(np.asarray(idx, dtype=int) % self._n)

    def distance_to(self, x: np.ndarray) -> np.ndarray:
        """Distance de chaque point de x au nuage."""
        dist, _ = self.query(x, k=1)
        return dist
