"""
Champs de cônes C_β(x) = {u_E + u_F : ‖u_E‖ <= β‖u_F‖} autour d'un espace axe F(x).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import null_space

from dynamics.topology import NeighborIndex

RANDOM_GENERATORS = 32
GENERATOR_SEED = 1729


def complement_frame(frame: np.ndarray) -> np.ndarray:
    """Base orthonormée du complément orthogonal de span(frame)."""
    return null_space(frame.T)


@dataclass(frozen=True)
class ConeField:
    """
    Champ de cônes continu, interpolé au plus proche point de base.

    Attributes:
        base_points: points de base (N, n)
        axis_frames: repères orthonormés de F(x), (N, n, d)
        opening: ouverture β par point (N,)
        periods: topologie de l'espace ambiant
    """
    base_points: np.ndarray
    axis_frames: np.ndarray
    opening: np.ndarray
    periods: Optional[tuple] = None

    @classmethod
    def build(cls, base_points: np.ndarray, axis_frames: np.ndarray,
              opening: Union[float, Sequence[float]], periods=None) -> 'ConeField':
        base_points = np.atleast_2d(np.asarray(base_points, dtype=float))
        axis_frames = np.asarray(axis_frames, dtype=float)
        if axis_frames.ndim == 2:
            axis_frames = np.broadcast_to(axis_frames, (len(base_points),) + axis_frames.shape).copy()
        opening = np.broadcast_to(np.asarray(opening, dtype=float), (len(base_points),)).copy()
        return cls(base_points, axis_frames, opening, periods)

    @property
    def dim(self) -> int:
        return self.axis_frames.shape[2]

    @property
    def ambient_dim(self) -> int:
        return self.axis_frames.shape[1]

    def _index(self, x: np.ndarray) -> int:
        if len(self.base_points) == 1:
            return 0
        _, idx = NeighborIndex(self.base_points, self.periods).query(np.asarray(x, dtype=float))
        return int(idx)

    def frame_at(self, x: np.ndarray) -> np.ndarray:
        return self.axis_frames[self._index(x)]

    def opening_at(self, x: np.ndarray) -> float:
        return float(self.opening[self._index(x)])

    def aperture(self, u: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Rapport ‖u_E‖/‖u_F‖ des vecteurs u (..., n) au point x."""
        frame = self.frame_at(x)
        u = np.asarray(u, dtype=float)
        u_F = (u @ frame) @ frame.T
        norm_F = np.linalg.norm(u_F, axis=-1)
        norm_E = np.linalg.norm(u - u_F, axis=-1)
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(norm_F > 0.0, norm_E / np.where(norm_F > 0.0, norm_F, 1.0), np.inf)

    def contains(self, u: np.ndarray, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return self.aperture(u, x) <= self.opening_at(x) * (1.0 + tol) + tol

    def generators(self, x: np.ndarray, count: int = RANDOM_GENERATORS) -> np.ndarray:
        """
        Vecteurs unitaires du cône en x: 2d(n−d) générateurs du bord f_i ± β e_j,
        les axes f_i, puis `count` vecteurs aléatoires (graine fixe).
        """
        frame = self.frame_at(x)
        beta = self.opening_at(x)
        E = complement_frame(frame)
        vectors = [frame[:, i] for i in range(frame.shape[1])]
        for i in range(frame.shape[1]):
            for j in range(E.shape[1]):
                for sign in (1.0, -1.0):
                    vectors.append(frame[:, i] + sign * beta * E[:, j])

        rng = np.random.default_rng(GENERATOR_SEED)
        for _ in range(count):
            u_F = frame @ rng.normal(size=frame.shape[1])
            u_F /= np.linalg.norm(u_F)
            if E.shape[1]:
                u_E = E @ rng.normal(size=E.shape[1])
                u_E *= beta * rng.uniform(0.0, 1.0) / max(np.linalg.norm(u_E), 1e-300)
            else:
                u_E = 0.0
            vectors.append(u_F + u_E)

        vectors = np.array(vectors)
        return vectors / np.linalg.norm(vectors, axis=1)[:, None]

    def outside_generators(self, x: np.ndarray, count: int = RANDOM_GENERATORS) -> np.ndarray:
        """Vecteurs unitaires hors du cône en x (de l'axe E jusqu'au bord exclu)."""
        frame = self.frame_at(x)
        beta = self.opening_at(x)
        E = complement_frame(frame)
        reach = (1.0 - 1e-6) / beta if beta > 0 else 1e6
        vectors = [E[:, j] for j in range(E.shape[1])]
        for j in range(E.shape[1]):
            for i in range(frame.shape[1]):
                for sign in (1.0, -1.0):
                    vectors.append(E[:, j] + sign * reach * frame[:, i])

        rng = np.random.default_rng(GENERATOR_SEED + 1)
        for _ in range(count):
            u_E = E @ rng.normal(size=E.shape[1])
            u_E /= np.linalg.norm(u_E)
            u_F = frame @ rng.normal(size=frame.shape[1])
            u_F *= reach * rng.uniform(0.0, 1.0) / max(np.linalg.norm(u_F), 1e-300)
            vectors.append(u_E + u_F)

        vectors = np.array(vectors)
        return vectors / np.linalg.norm(vectors, axis=1)[:, None]

    def dual(self) -> 'ConeField':
        """Cône dual: axe le complément orthogonal, ouverture 1/β."""
        frames = np.stack([complement_frame(F) for F in self.axis_frames])
        return ConeField(self.base_points, frames, 1.0 / self.opening, self.periods)

    def orthonormality_defect(self) -> float:
        d = self.dim
        gram = np.einsum('kni,knj->kij', self.axis_frames, self.axis_frames)
        return float(np.max(np.abs(gram - np.eye(d))))
