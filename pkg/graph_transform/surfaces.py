"""
Surface invariante obtenue: graphe fixe au-dessus de Σ₀ et chaîne complète de construction.
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple, Union
import logging

import numpy as np

from cones.splitting import SplittingFrame
from dynamics.maps import SmoothMap
from invariant_set.sets import SampledInvariantSet
from whitney_surface.fitting import WHITNEY_TOLERANCE
from whitney_surface.gluing import build_surface

from .exceptions import LedgerViolationError
from .graphs import LipschitzGraph
from .ledger import ConstantsLedger, choose_ledger, default_targets, validate_ledger
from .transform import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOLERANCE,
    SMALLNESS_THRESHOLD,
    ConvergenceTrace,
    auto_tune_m,
    cutoff,
)
from .tubular import TubularNeighborhood, build_tubular

logger = logging.getLogger('graph_transform')

TANGENT_STEP = 1e-6


@dataclass
class CenterGraph:
    """
    Surface S = graphe de h au-dessus de Σ₀ dans le voisinage tubulaire.

    Attributes:
        tube: voisinage tubulaire
        map: application pour laquelle h est invariant
        graph: graphe (fixe) h
        ledger: constantes, avec m et ε(m)
        trace: trace de l'itération qui a produit h
    """
    tube: TubularNeighborhood
    map: SmoothMap
    graph: LipschitzGraph
    ledger: ConstantsLedger
    trace: Optional[ConvergenceTrace] = None

    @property
    def residual(self) -> float:
        """Dernière distance entre itérés (résidu de point fixe)."""
        if self.trace is None or not self.trace.distances:
            return 0.0
        return float(self.trace.distances[-1])

    @property
    def band(self) -> float:
        """Rayon du cœur ε/2 où la bosse vaut 1 et où h est invariant."""
        return 0.5 * self.ledger.epsilon

    def offsets(self, s: np.ndarray) -> np.ndarray:
        return self.graph(np.atleast_2d(s))

    def points(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        return self.tube.embed(s, self.graph(s))

    def tangent(self, s: np.ndarray, step: float = TANGENT_STEP) -> np.ndarray:
        """Vecteurs tangents (M, n, d) par différences centrées."""
        s = np.atleast_2d(s)
        columns = []
        for a in range(self.tube.dim):
            shift = np.zeros(self.tube.dim)
            shift[a] = step
            columns.append((self.points(s + shift) - self.points(s - shift)) / (2.0 * step))
        return np.stack(columns, axis=-1)

    def fiber_distance(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Distance le long des fibres de points ambiants à S.

        Returns:
            (distances, paramètres de base, masque des points projetés)
        """
        s, w, ok = self.tube.project(points, strict=False)
        s_safe = self.tube.grid.clip(np.nan_to_num(s))
        distances = np.linalg.norm(np.nan_to_num(w) - self.graph(s_safe), axis=1)
        return np.where(ok, distances, np.inf), s, ok

    def project_onto(self, points: np.ndarray) -> np.ndarray:
        """Point de S sur la fibre de chaque point (strict)."""
        s, _ = self.tube.project(points)
        return self.points(s)

    def core_parameters(self, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """Paramètres aléatoires à distance <= radius des paramètres de K, points de K inclus."""
        K_params = self.tube.K_params
        picks = rng.integers(0, len(K_params), size=count)
        direction = rng.normal(size=(count, self.tube.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        length = radius * rng.uniform(0.0, 1.0, size=count) ** (1.0 / self.tube.dim)
        s = np.vstack([K_params, K_params[picks] + length[:, None] * direction])
        return s[self.tube.grid.contains(s)]

    def with_graph(self, graph: LipschitzGraph, trace: Optional[ConvergenceTrace] = None,
                   smooth_map: Optional[SmoothMap] = None) -> 'CenterGraph':
        return replace(self, graph=graph, trace=trace, map=smooth_map or self.map)

    def cutoff_values(self, s: np.ndarray) -> np.ndarray:
        return cutoff(self.tube, self.ledger)(np.atleast_2d(s))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'map': self.map.name,
            'tube': self.tube.to_dict(),
            'graph': self.graph.to_dict(),
            'ledger': self.ledger.to_dict(),
            'trace': self.trace.to_dict() if self.trace else None,
            'band': self.band,
        }


def build_center_graph(smooth_map: SmoothMap, K: Union[SampledInvariantSet, np.ndarray],
                       split: SplittingFrame, surface_radius: float,
                       targets: Optional[Dict[str, float]] = None, spacing: Optional[float] = None,
                       whitney_tolerance: float = WHITNEY_TOLERANCE, threshold: float = SMALLNESS_THRESHOLD,
                       tol: float = DEFAULT_TOLERANCE, max_iters: int = DEFAULT_MAX_ITERS,
                       samples: int = 300, seed: int = 0, workers: int = 1) -> CenterGraph:
    """
    Chaîne complète: surface de Whitney, voisinage tubulaire, registre, choix de m et point fixe.

    Args:
        smooth_map: Application f (inversible)
        K: Ensemble invariant
        split: Décomposition E ⊕ F sur K
        surface_radius: Rayon visé des cartes de la surface initiale
        targets: Cibles (λ₀, η, β, δ), déduites de la décomposition si absentes
        spacing: Pas de la grille des paramètres

    Returns:
        CenterGraph

    Raises:
        LedgerViolationError: registre invalide pour les cibles
    """
    targets = targets or default_targets(split)
    ledger = choose_ledger(targets)
    verdict = validate_ledger(ledger)
    if not verdict:
        raise LedgerViolationError(f"Registre invalide: {', '.join(verdict.violated)}")

    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    surface = build_surface(points, split, surface_radius, whitney_tolerance, smooth_map.periods, workers)
    tube = build_tubular(surface, points, split, smooth_map, targets, spacing=spacing, samples=samples, seed=seed)
    result = auto_tune_m(tube, smooth_map, ledger, threshold, tol, max_iters, workers=workers)
    logger.info(f"Surface invariante de {smooth_map.name}: m = {result.ledger.m:.3e}, "
                f"ε = {result.ledger.epsilon:.3e}, {result.trace.iterations} itération(s)")
    return CenterGraph(tube=tube, map=smooth_map, graph=result.graph, ledger=result.ledger, trace=result.trace)
