"""
Graphes locaux par moindres carrés mobiles de Hermite.

Au point d'évaluation u, un polynôme quadratique centré en u est ajusté aux hauteurs
et aux dérivées prescrites des points capturés, avec des poids gaussiens de largeur
deux fois l'espacement local des échantillons.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Any, Dict, Tuple
import logging

import numpy as np
from scipy.spatial import cKDTree

from .charts import AdaptedChart
from .exceptions import ResidualTooLargeError

logger = logging.getLogger('whitney_surface')

WHITNEY_TOLERANCE = 0.05
BANDWIDTH_FACTOR = 2.0
RIDGE = 1e-10
CHUNK = 256


def _quadratic_terms(d: int):
    return list(combinations_with_replacement(range(d), 2))


def _design(eta: np.ndarray):
    """
    Lignes de valeur (..., P) et de dérivée (..., d, P) de la base
    [1, η, η_a η_b (½η_a² sur la diagonale)].
    """
    d = eta.shape[-1]
    terms = _quadratic_terms(d)
    ones = np.ones(eta.shape[:-1] + (1,))
    quad = np.stack([eta[..., a] * eta[..., b] * (0.5 if a == b else 1.0) for a, b in terms], axis=-1)
    values = np.concatenate([ones, eta, quad], axis=-1)

    derivatives = np.zeros(eta.shape[:-1] + (d, 1 + d + len(terms)))
    for k in range(d):
        derivatives[..., k, 1 + k] = 1.0
        for t, (a, b) in enumerate(terms):
            column = 1 + d + t
            if a == b == k:
                derivatives[..., k, column] = eta[..., a]
            elif a == k:
                derivatives[..., k, column] = eta[..., b]
            elif b == k:
                derivatives[..., k, column] = eta[..., a]
    return values, derivatives


def whitney_quotient(horizontal: np.ndarray, heights: np.ndarray, slopes: np.ndarray) -> float:
    """
    max sur les paires de ‖(v_y − v_x) − ½(D_x + D_y)(u_y − u_x)‖ / ‖u_y − u_x‖.

    Remplace la forme à une extrémité D_x(u_y − u_x) par la pente moyenne; nul sur des
    données quadratiques, o(1) quand ‖y − x‖ → 0 si et seulement si D_x(u_y − u_x) l'est.
    """
    m = len(horizontal)
    if m < 2:
        return 0.0
    i, j = np.triu_indices(m, k=1)
    du = horizontal[j] - horizontal[i]
    dv = heights[j] - heights[i]
    mean_slope = 0.5 * (slopes[i] + slopes[j])
    remainder = dv - np.einsum('pkd,pd->pk', mean_slope, du)
    lengths = np.linalg.norm(du, axis=1)
    keep = lengths > 0.0
    if not keep.any():
        return 0.0
    return float(np.max(np.linalg.norm(remainder[keep], axis=1) / lengths[keep]))


@dataclass
class LocalGraph:
    """
    Graphe local C¹ v = Φ(u) au-dessus du disque horizontal d'une carte.

    Attributes:
        chart: carte adaptée
        bandwidth: largeur ℓ des poids gaussiens
        whitney_quotient: quotient de Whitney maximal des données capturées
    """
    chart: AdaptedChart
    bandwidth: float
    whitney_quotient: float

    def evaluate(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Hauteurs (M, n − d) et gradients (M, n − d, d) aux points u (M, d).
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        values = np.empty((len(u), self.chart.heights.shape[1]))
        gradients = np.empty((len(u), self.chart.heights.shape[1], self.chart.dim))
        for start in range(0, len(u), CHUNK):
            block = slice(start, start + CHUNK)
            values[block], gradients[block] = self._solve(u[block])
        return values, gradients

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate(u)[0]

    def _solve(self, u: np.ndarray):
        chart, scale = self.chart, self.bandwidth
        d = chart.dim
        eta = (chart.horizontal[None, :, :] - u[:, None, :]) / scale
        squared = np.sum(eta ** 2, axis=-1)
        weights = np.exp(-(squared - squared.min(axis=1, keepdims=True)))

        rows, derivative_rows = _design(eta)
        normal = np.einsum('mi,mip,miq->mpq', weights, rows, rows)
        normal += np.einsum('mi,mikp,mikq->mpq', weights, derivative_rows, derivative_rows)
        quad = np.arange(1 + d, rows.shape[-1])
        normal[:, quad, quad] += RIDGE

        targets = np.einsum('mi,mip,ij->mpj', weights, rows, chart.heights)
        scaled_slopes = scale * chart.slopes
        targets += np.einsum('mi,mikp,ijk->mpj', weights, derivative_rows, scaled_slopes)

        coefficients = np.linalg.solve(normal, targets)
        values = coefficients[:, 0, :]
        gradients = np.transpose(coefficients[:, 1:1 + d, :], (0, 2, 1)) / scale
        return values, gradients

    def to_dict(self) -> Dict[str, Any]:
        return {
            'chart': self.chart.to_dict(),
            'bandwidth': self.bandwidth,
            'whitney_quotient': self.whitney_quotient,
        }


def local_spacing(horizontal: np.ndarray, fallback: float) -> float:
    """Écart médian au plus proche voisin dans le plan horizontal."""
    if len(horizontal) < 2:
        return fallback
    distances, _ = cKDTree(horizontal).query(horizontal, k=2)
    spacing = float(np.median(distances[:, 1]))
    return spacing if spacing > 0.0 else fallback


def fit_local_graph(chart: AdaptedChart, tolerance: float = WHITNEY_TOLERANCE) -> LocalGraph:
    """
    Ajuste le graphe local de la carte et contrôle le quotient de Whitney.

    Args:
        chart: Carte adaptée
        tolerance: Quotient de Whitney maximal accepté

    Returns:
        LocalGraph

    Raises:
        ResidualTooLargeError: données incompatibles avec un graphe C¹
    """
    quotient = whitney_quotient(chart.horizontal, chart.heights, chart.slopes)
    if quotient > tolerance:
        raise ResidualTooLargeError(
            f"Quotient de Whitney {quotient:.3e} > {tolerance:.3e} dans la carte "
            f"centrée en {chart.center.tolist()}"
        )
    bandwidth = BANDWIDTH_FACTOR * local_spacing(chart.horizontal, chart.radius)
    logger.debug(f"Graphe local en {chart.center.tolist()}: ℓ={bandwidth:.3e}, quotient={quotient:.3e}")
    return LocalGraph(chart=chart, bandwidth=bandwidth, whitney_quotient=quotient)
