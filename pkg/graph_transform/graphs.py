"""
Graphes de Lipschitz au-dessus de Σ₀: décalages dans les fibres aux nœuds de la grille.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from .exceptions import GraphTransformException
from .grids import GridField, ParameterGrid

logger = logging.getLogger('graph_transform')


@dataclass
class LipschitzGraph:
    """
    Section h du voisinage tubulaire, nulle sur le collier.

    Attributes:
        grid: grille des paramètres de base
        offsets: décalages (N, n − d) aux nœuds, en coordonnées de fibre
        beta: borne de pente
    """
    grid: ParameterGrid
    offsets: np.ndarray
    beta: float
    _field: Optional[GridField] = field(default=None, repr=False)

    @classmethod
    def zero(cls, grid: ParameterGrid, fiber_dim: int, beta: float) -> 'LipschitzGraph':
        return cls(grid=grid, offsets=np.zeros((grid.size, fiber_dim)), beta=beta)

    @property
    def fiber_dim(self) -> int:
        return self.offsets.shape[1]

    @property
    def field(self) -> GridField:
        if self._field is None:
            self._field = GridField(self.grid, self.offsets)
        return self._field

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return self.field(s)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.offsets, axis=1))) if len(self.offsets) else 0.0

    def distance(self, other: 'LipschitzGraph') -> float:
        """Distance C⁰ aux nœuds le long des fibres."""
        return float(np.max(np.linalg.norm(self.offsets - other.offsets, axis=1)))

    def node_slopes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pentes ‖Δh‖/pas entre nœuds voisins, avec les indices des paires."""
        first, second = self.grid.neighbor_pairs()
        slopes = np.linalg.norm(self.offsets[second] - self.offsets[first], axis=1) / self.grid.spacing
        return slopes, first, second

    @property
    def max_slope(self) -> float:
        slopes, _, _ = self.node_slopes()
        return float(slopes.max()) if len(slopes) else 0.0

    def slope_violations(self, bound: Optional[float] = None) -> List[int]:
        """Nœuds dont une pente vers un voisin dépasse la borne (β par défaut)."""
        bound = self.beta if bound is None else bound
        slopes, first, second = self.node_slopes()
        bad = slopes > bound * (1.0 + 1e-9)
        return sorted(set(first[bad].tolist()) | set(second[bad].tolist()))

    def rows(self, tube=None) -> List[List[float]]:
        """Lignes CSV: paramètres, décalages et, si le tube est donné, point ambiant."""
        nodes = self.grid.nodes
        if tube is None:
            return [list(s) + list(w) for s, w in zip(nodes, self.offsets)]
        points = tube.embed(nodes, self.offsets)
        return [list(s) + list(w) + list(p) for s, w, p in zip(nodes, self.offsets, points)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'grid': self.grid.to_dict(),
            'beta': self.beta,
            'sup_norm': self.sup_norm,
            'max_slope': self.max_slope,
        }


def graph_from_rows(grid: ParameterGrid, rows: np.ndarray, fiber_dim: int, beta: float) -> LipschitzGraph:
    """Relit un graphe exporté par rows(): paramètres puis fiber_dim colonnes de décalages."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    d = grid.dim
    if len(rows) != grid.size:
        raise GraphTransformException(f"{len(rows)} ligne(s) pour une grille de {grid.size} nœuds")
    if not np.allclose(rows[:, :d], grid.nodes, atol=1e-9 * max(1.0, grid.spacing)):
        raise GraphTransformException("Les paramètres lus ne correspondent pas à la grille")
    return LipschitzGraph(grid=grid, offsets=rows[:, d:d + fiber_dim].copy(), beta=beta)
