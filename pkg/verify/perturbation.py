"""
Robustesse: perturbations lisses de f près de K, surface invariante de l'application perturbée
et échelle des distances.
"""

from typing import Optional, Sequence, Tuple
import logging

import numpy as np

from core.utils import make_rng
from dynamics.maps import SmoothMap, jacobian_at, newton_inverse
from graph_transform.graphs import LipschitzGraph
from graph_transform.surfaces import CenterGraph
from graph_transform.transform import DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE, iterate_to_fixed_point
from invariant_set.boxes import maximal_invariant
from smoothing.separators import bump_from_distance

from .checks import check_containment
from .reports import CheckReport

logger = logging.getLogger('verify')

DEFAULT_LADDER = (1e-2, 1e-3, 1e-4)
SLOPE_RANGE = (0.8, 1.2)
DISTANCE_FACTOR = 5.0


def perturbed_map(smooth_map: SmoothMap, anchors: np.ndarray, size: float, radius: float,
                  seed: int = 0, trial: int = 0, normal: Optional[np.ndarray] = None) -> SmoothMap:
    """
    g = f + a·ψ·v, ψ bosse égale à 1 à distance <= radius/2 des ancres et nulle au-delà de radius,
    v direction unitaire tirée de la graine, penchée vers normal si donné.
    a est choisi pour que ‖g − f‖_C¹ <= size.

    Args:
        smooth_map: Application f (inversible)
        anchors: Points ambiants autour desquels la perturbation est supportée
        size: Taille C¹ de la perturbation
        radius: Rayon du support
        seed: Graine
        trial: Numéro de tirage
        normal: Direction transverse à la surface (composante garantie de v)

    Returns:
        SmoothMap perturbée, inverse par Newton
    """
    if size <= 0.0:
        return smooth_map
    bump = bump_from_distance(anchors, 0.5 * radius, radius)
    direction = make_rng(seed, stream=100 + trial).normal(size=smooth_map.dim)
    direction /= np.linalg.norm(direction)
    if normal is not None:
        direction = np.asarray(normal, dtype=float) / np.linalg.norm(normal) + 0.5 * direction
        direction /= np.linalg.norm(direction)
    amplitude = size / (1.0 + bump.derivative_bound)

    def forward(x):
        x = np.asarray(x, dtype=float)
        values = bump(x.reshape(-1, smooth_map.dim)).reshape(x.shape[:-1])
        return smooth_map.forward(x) + amplitude * values[..., None] * direction

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        gradient = bump.grad(x.reshape(-1, smooth_map.dim)).reshape(x.shape)
        return jacobian_at(smooth_map, x) + amplitude * direction[:, None] * gradient[..., None, :]

    return SmoothMap(
        name=f"{smooth_map.name}+{size:g}",
        dim=smooth_map.dim,
        forward=forward,
        inverse=newton_inverse(forward, jacobian, seed=smooth_map.inverse),
        jacobian=jacobian,
        periods=smooth_map.periods,
        box=smooth_map.box,
    )


def perturbed_center(center: CenterGraph, size: float, seed: int = 0, trial: int = 0,
                     tol: float = DEFAULT_TOLERANCE, max_iters: int = DEFAULT_MAX_ITERS,
                     workers: int = 1) -> CenterGraph:
    """
    Surface invariante S_g de l'application perturbée, dans le même voisinage tubulaire,
    en partant de S.

    Raises:
        NoContractionError, LipschitzViolationError: propagées depuis l'itération
    """
    anchors = center.tube.base_point(center.tube.K_params)
    normal = center.tube.fiber_frame(center.tube.K_params[:1])[0, :, 0]
    g = perturbed_map(center.map, anchors, size, center.ledger.epsilon, seed, trial, normal)
    graph, trace = iterate_to_fixed_point(center.tube, g, center.ledger, center.graph, tol, max_iters, workers)
    return center.with_graph(graph, trace, g)


def surface_distances(first: LipschitzGraph, second: LipschitzGraph) -> Tuple[float, float]:
    """Distance C⁰ aux nœuds et pente maximale de la différence."""
    difference = LipschitzGraph(grid=first.grid, offsets=second.offsets - first.offsets, beta=first.beta)
    return first.distance(second), difference.max_slope


def robustness_probe(center: CenterGraph, sizes: Sequence[float] = DEFAULT_LADDER, trials: int = 1,
                     seed: int = 0, tol: float = DEFAULT_TOLERANCE, max_iters: int = DEFAULT_MAX_ITERS,
                     workers: int = 1) -> CheckReport:
    """
    Distances entre S et S_g sur une échelle de tailles de perturbation.

    Avec au moins deux tailles non nulles, la pente log-log des distances C⁰ doit être
    dans [0.8, 1.2]. Sinon chaque distance doit rester sous 5 × taille + 10 × tol.

    Returns:
        CheckReport 'robustness'
    """
    ladder = []
    for size in sizes:
        c0, slope = 0.0, 0.0
        for trial in range(trials):
            perturbed = perturbed_center(center, size, seed, trial, tol, max_iters, workers)
            trial_c0, trial_slope = surface_distances(center.graph, perturbed.graph)
            c0, slope = max(c0, trial_c0), max(slope, trial_slope)
        ladder.append({'size': float(size), 'c0_distance': c0, 'slope_distance': slope})
        logger.info(f"Perturbation {size:.1e}: distance C⁰ {c0:.3e}, pente {slope:.3e}")

    usable = [entry for entry in ladder if entry['size'] > 0.0 and entry['c0_distance'] > 0.0]
    fitted = None
    if len(usable) >= 2:
        fitted = float(np.polyfit(np.log([entry['size'] for entry in usable]),
                                  np.log([entry['c0_distance'] for entry in usable]), 1)[0])
        passed = SLOPE_RANGE[0] <= fitted <= SLOPE_RANGE[1]
        measured, tolerance = fitted, SLOPE_RANGE[1]
    else:
        passed = all(entry['c0_distance'] <= DISTANCE_FACTOR * entry['size'] + 10.0 * tol for entry in ladder)
        measured = max(entry['c0_distance'] for entry in ladder)
        tolerance = DISTANCE_FACTOR * max(sizes) + 10.0 * tol

    return CheckReport(
        name='robustness',
        passed=passed,
        measured=measured,
        tolerance=tolerance,
        details={'ladder': ladder, 'loglog_slope': fitted, 'slope_range': list(SLOPE_RANGE), 'trials': trials},
    )


def check_robust_containment(center: CenterGraph, U: np.ndarray, resolution: float, size: float = 1e-3,
                             seed: int = 0, tol: float = DEFAULT_TOLERANCE,
                             max_iters: int = DEFAULT_MAX_ITERS, workers: int = 1) -> CheckReport:
    """
    L'ensemble invariant maximal de g dans U reste dans la surface perturbée S_g.

    Returns:
        CheckReport 'robust_containment'
    """
    perturbed = perturbed_center(center, size, seed, 0, tol, max_iters, workers)
    invariant = maximal_invariant(perturbed.map, U, resolution, workers=workers)
    report = check_containment(perturbed, invariant, seed=seed, name='robust_containment')
    report.details['perturbation_size'] = size
    return report
