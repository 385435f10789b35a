"""
Certificats de contraction, de pincement et de finesse des cônes le long d'orbites finies.

Les échecs sont enregistrés dans les certificats et ne lèvent pas d'exception.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple
import logging

import numpy as np

from core.utils import parallel_map
from dynamics.maps import SmoothMap, evaluate, jacobian_at

from .exceptions import OrbitEscapeError
from .fields import ConeField
from .splitting import check_in_box

logger = logging.getLogger('cones')

INCLUSION_TOL = 1e-9


@dataclass
class ContractionCertificate:
    """Résultat de check_contraction: par segment, λ mesuré et pires rapports."""
    passed: bool
    measured_lambda: float
    r: float
    n0: int
    segments: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'contraction',
            'passed': self.passed,
            'measured_lambda': self.measured_lambda,
            'r': self.r,
            'n0': self.n0,
            'segments': self.segments,
        }


@dataclass
class BunchingCertificate:
    """Résultat de check_bunched."""
    passed: bool
    measured_lambda: float
    n0: int
    segments: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': 'bunching',
            'passed': self.passed,
            'measured_lambda': self.measured_lambda,
            'n0': self.n0,
            'segments': self.segments,
        }


def _cocycles(smooth_map: SmoothMap, segment: np.ndarray, n_max: int) -> List[np.ndarray]:
    """Produits Df^n(x_0) pour n = 0..n_max le long du segment."""
    products = [np.eye(smooth_map.dim)]
    for x in segment[:n_max]:
        products.append(jacobian_at(smooth_map, x) @ products[-1])
    return products


def _window(segment: np.ndarray, n0: int) -> range:
    return range(max(n0, 1), min(2 * n0, len(segment) - 1) + 1)


def _fitted_rate(ns: Sequence[int], values: Sequence[float]) -> float:
    """Taux exp(pente) de log(values) en fonction de n; racine n-ième si un seul n."""
    ns = np.asarray(ns, dtype=float)
    logs = np.log(np.maximum(np.asarray(values, dtype=float), 1e-300))
    if len(ns) == 1:
        return float(np.exp(logs[0] / ns[0]))
    slope = np.polyfit(ns, logs, 1)[0]
    return float(np.exp(slope))


def _outside_sup(cone: ConeField, M: np.ndarray, y: np.ndarray) -> float:
    """sup ‖M w‖ sur les w unitaires avec M w hors de C(y)."""
    targets = cone.outside_generators(y)
    preimages = np.linalg.solve(M, targets.T).T
    return float(np.max(1.0 / np.linalg.norm(preimages, axis=1)))


def minimal_norm_ratio(smooth_map: SmoothMap, cone: ConeField, segment: np.ndarray,
                       n: int, r: float = 1.0) -> float:
    """
    Rapport min(m, m^r) / sup‖DΨⁿ w‖, où m est la norme minimale de DΨⁿ sur C(x)
    et w parcourt les vecteurs unitaires dont l'image sort de C(Ψⁿx).
    """
    segment = np.asarray(segment, dtype=float)
    M = _cocycles(smooth_map, segment, n)[n]
    minimum = float(np.min(np.linalg.norm(cone.generators(segment[0]) @ M.T, axis=1)))
    return min(minimum, minimum ** r) / _outside_sup(cone, M, segment[n])


def _contraction_segment(smooth_map: SmoothMap, cone: ConeField, segment: np.ndarray,
                         r: float, n0: int) -> Dict[str, Any]:
    window = _window(segment, n0)
    products = _cocycles(smooth_map, segment, window[-1])
    generators = cone.generators(segment[0])
    rows = []
    for n in window:
        M, y = products[n], segment[n]
        images = generators @ M.T
        norms = np.linalg.norm(images, axis=1)
        opening = float(np.max(cone.aperture(images, y)))
        minimum = float(np.min(norms))
        outside = _outside_sup(cone, M, y)
        rows.append({
            'n': n,
            'invariant': bool(opening <= cone.opening_at(y) * (1.0 + INCLUSION_TOL) + INCLUSION_TOL),
            'image_opening': opening,
            'min_norm': minimum,
            'max_outside': outside,
            'ratio': min(minimum, minimum ** r) / outside,
        })

    rate = _fitted_rate([row['n'] for row in rows], [row['ratio'] for row in rows])
    return {
        'lambda': rate,
        'invariant': all(row['invariant'] for row in rows),
        'nondegenerate': all(row['min_norm'] > 0.0 for row in rows),
        'worst_ratio': min(row['ratio'] for row in rows),
        'steps': rows,
    }


def check_contraction(smooth_map: SmoothMap, cone: ConeField, orbit_segments: Sequence[np.ndarray],
                      r: float = 1.0, n0: int = 10, workers: int = 1) -> ContractionCertificate:
    """
    Certifie la r-contraction du champ de cônes le long des segments d'orbite.

    Pour chaque segment et chaque n dans [n0, 2n0]: invariance du cône sur les
    générateurs extrémaux, non-dégénérescence et rapport de normes.

    Args:
        smooth_map: Application Ψ
        cone: Champ de cônes
        orbit_segments: Segments (x_0, ..., x_L)
        r: Exposant r >= 1
        n0: Début de la fenêtre de mesure
        workers: Nombre de threads

    Returns:
        ContractionCertificate (succès ssi invariance, non-dégénérescence et λ > 1)
    """
    segments = [np.asarray(s, dtype=float) for s in orbit_segments]
    reports = parallel_map(lambda s: _contraction_segment(smooth_map, cone, s, r, n0), segments, workers)

    measured = min(report['lambda'] for report in reports)
    passed = (
        all(report['invariant'] and report['nondegenerate'] for report in reports)
        and all(report['worst_ratio'] > 1.0 for report in reports)
        and measured > 1.0
    )
    logger.info(
        f"Contraction de {smooth_map.name} (r={r}, {len(segments)} segments): "
        f"λ={measured:.4f}, {'succès' if passed else 'échec'}"
    )
    return ContractionCertificate(passed=passed, measured_lambda=measured, r=r, n0=n0, segments=reports)


def check_dual_contraction(smooth_map: SmoothMap, cone: ConeField, orbit_segments: Sequence[np.ndarray],
                           r: float = 1.0, n0: int = 10, workers: int = 1) -> ContractionCertificate:
    """Contraction du cône dual par l'inverse, sur les segments parcourus à rebours."""
    reversed_segments = [np.asarray(s, dtype=float)[::-1] for s in orbit_segments]
    return check_contraction(smooth_map.inverse_map(), cone.dual(), reversed_segments, r, n0, workers)


def _bunching_segment(smooth_map: SmoothMap, cone: ConeField, segment: np.ndarray,
                      n0: int) -> Dict[str, Any]:
    window = _window(segment, n0)
    products = _cocycles(smooth_map, segment, window[-1])
    generators = cone.generators(segment[0])
    rows = []
    for n in window:
        M = products[n]
        norms = np.linalg.norm(generators @ M.T, axis=1)
        spread = float(np.min(norms) / np.max(norms))
        outside = _outside_sup(cone, M, segment[n])
        rows.append({'n': n, 'norm_spread': spread, 'max_outside': outside, 'ratio': spread / outside})

    return {
        'lambda': _fitted_rate([row['n'] for row in rows], [row['ratio'] for row in rows]),
        'worst_ratio': min(row['ratio'] for row in rows),
        'steps': rows,
    }


def check_bunched(smooth_map: SmoothMap, cone: ConeField, orbit_segments: Sequence[np.ndarray],
                  n0: int = 10, workers: int = 1) -> BunchingCertificate:
    """
    Vérifie ‖DΨⁿw‖ < λ^{-n}·‖DΨⁿu‖/‖DΨⁿv‖ pour u, v unitaires dans le cône et
    w hors du cône tiré en arrière de n pas, n dans [n0, 2n0].
    """
    segments = [np.asarray(s, dtype=float) for s in orbit_segments]
    reports = parallel_map(lambda s: _bunching_segment(smooth_map, cone, s, n0), segments, workers)

    measured = min(report['lambda'] for report in reports)
    passed = measured > 1.0 and all(report['worst_ratio'] > 1.0 for report in reports)
    logger.info(f"Pincement de {smooth_map.name}: λ={measured:.4f}, {'succès' if passed else 'échec'}")
    return BunchingCertificate(passed=passed, measured_lambda=measured, n0=n0, segments=reports)


def cone_thinness(smooth_map: SmoothMap, cone: ConeField, x: np.ndarray, n: int) -> float:
    """
    Écart entre les vecteurs unitaires de DΨⁿ·C(Ψ^{-n}x) et le sous-espace DΨⁿ·F(Ψ^{-n}x),
    mesuré comme tangente de l'angle maximal (vaut l'ouverture pour n = 0).

    Raises:
        OrbitEscapeError: l'orbite passée quitte la région de travail
    """
    x = np.asarray(x, dtype=float)
    past = [x]
    for _ in range(n):
        past.append(evaluate(smooth_map, past[-1], -1))
        check_in_box(smooth_map, past[-1], 'passée')
    past = past[::-1]

    M = np.eye(smooth_map.dim)
    for point in past[:-1]:
        M = jacobian_at(smooth_map, point) @ M

    start = past[0]
    axis, _ = np.linalg.qr(M @ cone.frame_at(start))
    images = cone.generators(start) @ M.T
    along = (images @ axis) @ axis.T
    across = np.linalg.norm(images - along, axis=1)
    return float(np.max(across / np.linalg.norm(along, axis=1)))


def thinness_profile(smooth_map: SmoothMap, cone: ConeField, x: np.ndarray,
                     steps: Sequence[int]) -> List[Tuple[int, float]]:
    """Finesse pour plusieurs n, pour l'ajustement de log(finesse) en n."""
    return [(n, cone_thinness(smooth_map, cone, x, n)) for n in steps]


__all__ = [
    'ContractionCertificate', 'BunchingCertificate', 'OrbitEscapeError',
    'check_contraction', 'check_dual_contraction', 'check_bunched',
    'cone_thinness', 'thinness_profile', 'minimal_norm_ratio',
]
