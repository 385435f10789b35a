"""
Vérifications a posteriori d'une surface invariante: invariance locale, tangence,
inclusion de l'ensemble invariant maximal et indices de régularité C¹.
"""

from typing import Optional
import logging

import numpy as np
from scipy.linalg import subspace_angles

from cones.splitting import SplittingFrame
from core.utils import make_rng
from dynamics.topology import NeighborIndex
from graph_transform.surfaces import CenterGraph
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.connections import mesh_spacing

from .reports import CheckReport

logger = logging.getLogger('verify')

INVARIANCE_FACTOR = 5.0
INVARIANCE_FLOOR = 1e-9
TANGENCY_TOLERANCE = 1e-3
CONTAINMENT_FACTOR = 2.0
PULLBACK_STEPS = 5
PULLBACK_SAMPLES = 50
MODULUS_FLOOR = 1e-10
MODULUS_SLACK = 1.5


def check_local_invariance(center: CenterGraph, band: Optional[float] = None,
                           tolerance: Optional[float] = None, samples: int = 200,
                           seed: int = 0) -> CheckReport:
    """
    Invariance locale de S: pour les nœuds s à distance <= band de K, f(S(s)) est
    projeté sur S le long des fibres et l'écart dans la fibre est mesuré.

    Les échantillons sont des nœuds de la grille, où la transformée est résolue.

    Args:
        center: Surface invariante
        band: Rayon autour de K (défaut: ε(m)/2, cœur où la bosse vaut 1)
        tolerance: Tolérance (défaut: max(5 × résidu de point fixe, 1e-9))
        samples: Nombre maximal de nœuds
        seed: Graine du sous-échantillonnage

    Returns:
        CheckReport 'local_invariance'

    Raises:
        ProjectionFailureError: une image sort du voisinage tubulaire
    """
    tube = center.tube
    band = center.band if band is None else band
    tolerance = tolerance if tolerance is not None else max(INVARIANCE_FACTOR * center.residual, INVARIANCE_FLOOR)

    nodes = tube.grid.nodes
    index = np.flatnonzero(tube.distance_to_K(nodes) <= band)
    if len(index) > samples:
        index = np.sort(make_rng(seed, stream=21).choice(index, size=samples, replace=False))
    points = tube.embed(nodes[index], center.graph.offsets[index])
    images = center.map.wrap(center.map.forward(points))
    s, w = tube.project(images)
    gaps = np.linalg.norm(w - center.graph(s), axis=1)
    measured = float(gaps.max()) if len(gaps) else 0.0

    report = CheckReport(
        name='local_invariance',
        passed=measured <= tolerance,
        measured=measured,
        tolerance=tolerance,
        details={'band': band, 'samples': int(len(index)), 'fixed_point_residual': center.residual},
    )
    logger.info(f"Invariance locale: écart {measured:.3e} (tolérance {tolerance:.1e}) sur {len(index)} nœud(s)")
    return report


def check_tangency(center: CenterGraph, split: SplittingFrame,
                   tolerance: float = TANGENCY_TOLERANCE) -> CheckReport:
    """
    Angle maximal (radians) entre le plan tangent de S en K et E(x).

    Args:
        center: Surface invariante
        split: Décomposition E ⊕ F sur K
        tolerance: Angle toléré

    Returns:
        CheckReport 'tangency'
    """
    s = center.tube.K_params
    tangents = center.tangent(s)
    points = center.points(s)
    _, idx = NeighborIndex(split.points, center.map.periods).query(points)
    angles = np.array([subspace_angles(t, split.E_frames[i]).max() for t, i in zip(tangents, np.atleast_1d(idx))])
    measured = float(angles.max())
    logger.info(f"Tangence: angle maximal {measured:.3e} rad sur {len(angles)} point(s) de K")
    return CheckReport(name='tangency', passed=measured <= tolerance, measured=measured, tolerance=tolerance,
                       details={'points': int(len(angles)), 'mean_angle': float(angles.mean())})


def check_containment(center: CenterGraph, invariant: SampledInvariantSet, steps: int = PULLBACK_STEPS,
                      samples: int = PULLBACK_SAMPLES, seed: int = 0, name: str = 'containment') -> CheckReport:
    """
    Inclusion de l'ensemble invariant maximal dans S.

    Chaque centre de boîte doit être à distance (le long des fibres) <= 2h de S.
    L'argument de contraction est aussi mesuré: le long d'orbites passées de centres
    échantillonnés, la distance à S ne croît pas. Les orbites sont tirées par f⁻¹ et non
    par f: les fibres fortes sont dilatées par f et contractées par f⁻¹.

    Args:
        center: Surface invariante
        invariant: Recouvrement de l'ensemble invariant maximal dans U
        steps: Longueur des orbites passées
        samples: Nombre de centres suivis
        seed: Graine de l'échantillon
        name: Nom du contrôle dans le rapport

    Returns:
        CheckReport
    """
    resolution = invariant.resolution or mesh_spacing(invariant, center.map.periods)
    tolerance = CONTAINMENT_FACTOR * resolution
    distances, _, ok = center.fiber_distance(invariant.points)
    measured = float(distances[ok].max()) if ok.any() else 0.0

    rng = make_rng(seed, stream=22)
    chosen = np.flatnonzero(ok)
    if len(chosen) > samples:
        chosen = np.sort(rng.choice(chosen, size=samples, replace=False))
    current = invariant.points[chosen]
    previous = distances[chosen]
    alive = np.ones(len(chosen), dtype=bool)
    worst_growth = 0.0
    inverse = center.map.inverse_map()
    for _ in range(steps):
        if not alive.any():
            break
        current = inverse.wrap(inverse.forward(current))
        gaps, s, projected = center.fiber_distance(current)
        alive &= projected & center.tube.in_domain(np.nan_to_num(s))
        tracked = alive & (previous > 1e-12)
        if tracked.any():
            worst_growth = max(worst_growth, float(np.max(gaps[tracked] / previous[tracked])))
        previous = np.where(alive, gaps, previous)
    contracts = worst_growth <= 1.0 + 1e-6

    report = CheckReport(
        name=name,
        passed=bool(ok.all()) and measured <= tolerance and contracts,
        measured=measured,
        tolerance=tolerance,
        details={
            'boxes': int(len(invariant)),
            'outside_tube': int(np.sum(~ok)),
            'resolution': resolution,
            'pullback_growth': worst_growth,
            'pullback_contracts': contracts,
        },
    )
    logger.info(f"Inclusion: {len(invariant)} boîte(s), distance max {measured:.3e} <= {tolerance:.3e}, "
                f"croissance passée {worst_growth:.3f}: {report.passed}")
    return report


def check_oracle(center: CenterGraph, expected: np.ndarray, tolerance: float, name: str = 'oracle',
                 details: Optional[dict] = None) -> CheckReport:
    """
    Écart le long des fibres entre S et des points que S doit contenir (formule analytique).

    Args:
        center: Surface invariante
        expected: Points ambiants (M, n) prédits sur S
        tolerance: Écart toléré
        name: Nom du contrôle
        details: Informations ajoutées au rapport

    Returns:
        CheckReport, en échec si un point tombe hors du voisinage tubulaire
    """
    expected = np.atleast_2d(np.asarray(expected, dtype=float))
    distances, _, ok = center.fiber_distance(expected)
    measured = float(distances[ok].max()) if ok.any() else 0.0
    logger.info(f"Oracle {name}: écart {measured:.3e} (tolérance {tolerance:.1e}) sur {len(expected)} point(s)")
    return CheckReport(
        name=name,
        passed=bool(ok.all()) and measured <= tolerance,
        measured=measured,
        tolerance=tolerance,
        details={'points': int(len(expected)), 'outside_tube': int(np.sum(~ok)), **(details or {})},
    )


def _tangent_modulus(center: CenterGraph, s: np.ndarray, directions: np.ndarray, step: float) -> float:
    first = center.tangent(s, step)
    second = center.tangent(s + step * directions, step)
    angles = [subspace_angles(a, b).max() for a, b in zip(first, second)]
    return float(max(angles)) if angles else 0.0


def c1_evidence(center: CenterGraph, resolution: Optional[float] = None, samples: int = 100,
                seed: int = 0) -> CheckReport:
    """
    Indice numérique (et non preuve) de régularité C¹: module de continuité des plans
    tangents par différences finies au pas h puis h/2.

    Passe si le module est nul à 1e-10 près, ou s'il est divisé par 2 au facteur 1.5 près.
    """
    tube = center.tube
    step = resolution or tube.grid.spacing
    rng = make_rng(seed, stream=23)
    s = center.core_parameters(0.5 * tube.radius, samples, rng)
    margin = 2.0 * step
    inner = np.all((s >= tube.grid.box[:, 0] + margin) & (s <= tube.grid.box[:, 1] - margin), axis=1)
    s = s[inner]
    directions = rng.normal(size=s.shape)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    coarse = _tangent_modulus(center, s, directions, step)
    fine = _tangent_modulus(center, s, directions, 0.5 * step)
    ratio = coarse / fine if fine > 0.0 else None
    passed = coarse <= MODULUS_FLOOR or fine <= MODULUS_SLACK * 0.5 * coarse
    logger.info(f"Indice C¹: module {coarse:.3e} (pas {step:.1e}), {fine:.3e} (pas {step / 2:.1e})")
    return CheckReport(
        name='c1_evidence',
        passed=passed,
        measured=coarse,
        tolerance=MODULUS_SLACK,
        details={
            'evidence_only': True,
            'step': step,
            'modulus_coarse': coarse,
            'modulus_fine': fine,
            'ratio': ratio,
            'samples': int(len(s)),
        },
    )
