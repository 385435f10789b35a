"""
Feuilletage stable localement invariant d'un ensemble hyperbolique de surface.

La surface invariante de f̂ autour du relevé stable K̂ (où la fibre projective est
fortement dilatée) est un graphe au-dessus de la base: elle définit un champ de droites
x ↦ p⁻¹(x) ∩ S, intégré en feuilles par Runge-Kutta d'ordre 4.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union
import logging

import numpy as np

from cones.certificates import BunchingCertificate, check_bunched
from cones.splitting import SplittingFrame, estimate_splitting, pseudo_orbit
from core.utils import parallel_map
from dynamics.maps import SmoothMap
from dynamics.topology import NeighborIndex, minimal_image
from graph_transform.surfaces import CenterGraph, build_center_graph
from graph_transform.transform import DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.leaves import grow_unstable_leaf
from verify.checks import c1_evidence, check_local_invariance

from .exceptions import BunchingFailureError
from .lift import ANGLE_PERIOD, LiftedSet, ProjectiveLiftedMap, direction, lift_derivative_bound, lift_map, lift_set

logger = logging.getLogger('projective_lift')

BUNCHING_OPENING = 0.5
BUNCHING_N0 = 5
BUNCHING_SEGMENTS = 8
DEFAULT_SURFACE_RADIUS = 0.1
LEAF_STEPS = 60
NEWTON_ITERS = 12
NEWTON_TOLERANCE = 1e-13
NEWTON_STEP = 1e-7
FIELD_TOLERANCE = 1e-9


def check_stable_bunching(smooth_map: SmoothMap, points: np.ndarray, split: SplittingFrame,
                          n0: int = BUNCHING_N0, opening: float = BUNCHING_OPENING,
                          workers: int = 1) -> BunchingCertificate:
    """
    Pincement, pour f⁻¹, du cône d'axe E^s: la direction centrale de f⁻¹ est une droite.

    Les segments sont les orbites passées (2·n0 pas) des premiers points de K.
    """
    inverse = smooth_map.inverse_map()
    cone = split.dual_cone_field(opening, smooth_map.periods)
    chosen = np.atleast_2d(points)[:BUNCHING_SEGMENTS]
    steps = pseudo_orbit(inverse, chosen, 2 * n0)
    segments = [np.array([step[k] for step in steps]) for k in range(len(chosen))]
    return check_bunched(inverse, cone, segments, n0, workers)


def line_field(center: CenterGraph, x: np.ndarray, periods, guess: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Angle de la droite p⁻¹(x) ∩ S en chaque point x de la base.

    Le paramètre s tel que p(S(s)) = x est obtenu par Newton, à partir de la projection
    de (x, guess) sur le tube.

    Returns:
        (angles dans [0, π), masque des points résolus dans le domaine)
    """
    tube = center.tube
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s, _, ok = tube.project(np.column_stack([x, guess]), strict=False)
    s = tube.grid.clip(np.nan_to_num(s))

    def residual(params):
        return minimal_image(center.points(params)[:, :2] - x, periods)

    current = residual(s)
    for _ in range(NEWTON_ITERS):
        if np.max(np.abs(current), initial=0.0) <= NEWTON_TOLERANCE:
            break
        columns = []
        for a in range(tube.dim):
            shift = np.zeros(tube.dim)
            shift[a] = NEWTON_STEP
            columns.append((center.points(s + shift)[:, :2] - center.points(s - shift)[:, :2]) / (2.0 * NEWTON_STEP))
        jacobian = np.stack(columns, axis=-1)
        try:
            delta = np.linalg.solve(jacobian, current[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = np.einsum('mij,mj->mi', np.linalg.pinv(jacobian), current)
        s = tube.grid.clip(s - delta)
        current = residual(s)

    ok = ok & (np.max(np.abs(current), axis=1) <= FIELD_TOLERANCE) & tube.in_domain(s)
    angles = np.mod(center.points(s)[:, 2], ANGLE_PERIOD)
    return angles, ok


def _oriented(field_fn: Callable, x: np.ndarray, reference: np.ndarray) -> Optional[np.ndarray]:
    angles, ok = field_fn(x[None, :])
    if not ok[0]:
        return None
    u = direction(angles[0])
    return u if u @ reference >= 0.0 else -u


def integrate_leaf(field_fn: Callable, seed: np.ndarray, step: float, steps: int) -> np.ndarray:
    """
    Feuille passant par seed: RK4 dans les deux sens le long du champ de droites,
    orienté par continuité, arrêté à la sortie du domaine.

    Returns:
        Polyligne (M, 2) non repliée, seed inclus
    """
    seed = np.asarray(seed, dtype=float)
    angles, ok = field_fn(seed[None, :])
    if not ok[0]:
        return seed[None, :]
    start = direction(angles[0])

    halves = []
    for sign in (1.0, -1.0):
        x, reference, path = seed.copy(), sign * start, []
        for _ in range(steps):
            k1 = _oriented(field_fn, x, reference)
            k2 = k1 if k1 is None else _oriented(field_fn, x + 0.5 * step * k1, k1)
            k3 = k2 if k2 is None else _oriented(field_fn, x + 0.5 * step * k2, k1)
            k4 = k3 if k3 is None else _oriented(field_fn, x + step * k3, k1)
            if k4 is None:
                break
            increment = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            x = x + step * increment
            reference = increment / np.linalg.norm(increment)
            path.append(x)
        halves.append(path)
    return np.array(halves[1][::-1] + [seed] + halves[0])


def polyline_distance(points: np.ndarray, polyline: np.ndarray, periods) -> np.ndarray:
    """Distance de chaque point à une polyligne, déplacements en image minimale."""
    points = np.atleast_2d(points)
    if len(polyline) < 2:
        return np.linalg.norm(minimal_image(points - polyline[0], periods), axis=1)
    a = polyline[:-1]
    segment = polyline[1:] - a
    lengths = np.maximum(np.einsum('ij,ij->i', segment, segment), 1e-300)
    distances = []
    for y in points:
        delta = minimal_image(y - a, periods)
        t = np.clip(np.einsum('ij,ij->i', delta, segment) / lengths, 0.0, 1.0)
        distances.append(np.min(np.linalg.norm(delta - t[:, None] * segment, axis=1)))
    return np.array(distances)


@dataclass
class FoliationChart:
    """
    Champ de droites stable et feuilles sur un voisinage U de K.

    Attributes:
        lifted: relevé projectif f̂
        lifted_set: relevé stable K̂
        center: surface invariante de f̂ autour de K̂
        upstairs_split: décomposition de f̂ sur K̂ (F = fibre projective)
        bunching: certificat de pincement pour f⁻¹
        seeds: points de départ des feuilles
        leaves: polylignes intégrées
        field_points: points de U échantillonnés
        field_angles: angles du champ en ces points
        diagnostics: mesures de contrôle
    """
    lifted: ProjectiveLiftedMap
    lifted_set: LiftedSet
    center: CenterGraph
    upstairs_split: SplittingFrame
    bunching: BunchingCertificate
    seeds: np.ndarray
    leaves: List[np.ndarray]
    field_points: np.ndarray
    field_angles: np.ndarray
    step: float
    steps: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def periods(self):
        return self.lifted.base_periods

    def line_field(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, idx = NeighborIndex(self.lifted_set.base_points, self.periods).query(x)
        guess = self.lifted_set.angles[np.atleast_1d(idx)]
        return line_field(self.center, x, self.periods, guess)

    def leaf_through(self, x: np.ndarray) -> np.ndarray:
        return integrate_leaf(self.line_field, x, self.step, self.steps)

    def field_rows(self) -> List[List[float]]:
        return [list(x) + [float(phi)] for x, phi in zip(self.field_points, self.field_angles)]

    def leaf_rows(self) -> List[List[float]]:
        """Lignes CSV: indice de feuille, indice du point, coordonnées."""
        return [[float(k), float(j)] + list(p) for k, leaf in enumerate(self.leaves) for j, p in enumerate(leaf)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lifted': self.lifted.to_dict(),
            'lifted_set': self.lifted_set.to_dict(),
            'center': self.center.to_dict(),
            'upstairs_split': self.upstairs_split.to_dict(),
            'bunching': self.bunching.to_dict(),
            'leaves': [len(leaf) for leaf in self.leaves],
            'field_points': int(len(self.field_points)),
            'step': self.step,
            'diagnostics': self.diagnostics,
        }


def holonomy_residual(chart: FoliationChart, smooth_map: SmoothMap, band: float) -> float:
    """
    Invariance locale des feuilles: les points de f(feuille de x) proches de K sont
    sur la feuille de f(x), à la distance mesurée près.
    """
    periods = chart.periods
    index = NeighborIndex(chart.lifted_set.base_points, periods)
    worst = 0.0
    for seed, leaf in zip(chart.seeds, chart.leaves):
        if len(leaf) < 2:
            continue
        image_seed = smooth_map.forward(seed)
        image_leaf = chart.leaf_through(image_seed)
        if len(image_leaf) < 2:
            continue
        reach = min(np.linalg.norm(minimal_image(image_leaf[[0, -1]] - image_seed, periods), axis=1))
        pushed = smooth_map.forward(leaf[index.distance_to(leaf) <= band])
        pushed = pushed[np.linalg.norm(minimal_image(pushed - image_seed, periods), axis=1) <= reach]
        if len(pushed):
            worst = max(worst, float(polyline_distance(pushed, image_leaf, periods).max()))
    return worst


def stable_leaf_distance(chart: FoliationChart, smooth_map: SmoothMap, K: np.ndarray, radius: float) -> float:
    """Écart maximal entre W^s_loc(x) (feuille instable de f⁻¹) et la feuille du feuilletage en x ∈ K."""
    inverse = smooth_map.inverse_map()
    split = estimate_splitting(inverse, K, 1)
    periods = chart.periods
    worst = 0.0
    for x, leaf in zip(K, chart.leaves):
        if len(leaf) < 2:
            continue
        reach = min(np.linalg.norm(minimal_image(leaf[[0, -1]] - x, periods), axis=1))
        patch = grow_unstable_leaf(inverse, split, x, min(radius, reach))
        worst = max(worst, float(polyline_distance(patch.points, leaf, periods).max()))
    return worst


def foliate(smooth_map: SmoothMap, K: Union[SampledInvariantSet, np.ndarray], split: Optional[SplittingFrame] = None,
            surface_radius: float = DEFAULT_SURFACE_RADIUS, seeds: Optional[np.ndarray] = None,
            half_length: Optional[float] = None, steps: int = LEAF_STEPS, spacing: Optional[float] = None,
            targets: Optional[Dict[str, float]] = None, n0: int = BUNCHING_N0,
            tol: float = DEFAULT_TOLERANCE, max_iters: int = DEFAULT_MAX_ITERS,
            seed: int = 0, workers: int = 1) -> FoliationChart:
    """
    Feuilletage localement invariant tangent à E^s sur un voisinage de K.

    Étapes: pincement du cône central de f⁻¹, relevé stable K̂, surface invariante de f̂
    autour de K̂ (fibre projective = direction forte), champ de droites projeté, feuilles.

    Args:
        smooth_map: Difféomorphisme de surface f (avec inverse)
        K: Ensemble hyperbolique
        split: Décomposition E^s ⊕ E^u de f sur K (estimée si absente)
        surface_radius: Rayon visé des cartes de la surface initiale en haut
        seeds: Points de départ des feuilles (défaut: K)
        half_length: Demi-longueur des feuilles (défaut: moitié du rayon du tube)
        steps: Nombre de pas RK4 par demi-feuille
        spacing: Pas de la grille des paramètres en haut
        targets: Cibles du voisinage tubulaire
        n0: Profondeur du certificat de pincement

    Returns:
        FoliationChart

    Raises:
        BunchingFailureError: cône central de f⁻¹ non pincé
        DimensionUnsupportedError: f n'est pas une application de surface
    """
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    lifted = lift_map(smooth_map, seed=seed)
    split = split or estimate_splitting(smooth_map, points, 1)

    bunching = check_stable_bunching(smooth_map, points, split, n0, workers=workers)
    if not bunching.passed:
        raise BunchingFailureError(
            f"Cône central de {smooth_map.name}⁻¹ non pincé (λ = {bunching.measured_lambda:.4f})"
        )

    stable = lift_set(smooth_map, points, split, 'stable')
    upstairs = estimate_splitting(lifted.map, stable.points, 1)
    fiber_alignment = float(np.max(np.arccos(np.clip(np.abs(upstairs.F_frames[:, 2, 0]), 0.0, 1.0))))
    logger.info(f"Relevé stable: λ_fibre = {upstairs.lambda_F:.4f} > λ_base = {upstairs.lambda_E:.4f}, "
                f"écart de la fibre {fiber_alignment:.2e} rad")

    center = build_center_graph(lifted.map, stable.points, upstairs, surface_radius, targets=targets,
                                spacing=spacing, tol=tol, max_iters=max_iters, seed=seed, workers=workers)

    tube = center.tube
    nodes = tube.grid.nodes[tube.distance_to_K(tube.grid.nodes) <= 0.5 * tube.radius]
    lifted_nodes = lifted.map.wrap(center.points(nodes))
    half_length = half_length or 0.5 * tube.radius
    step = half_length / steps

    chart = FoliationChart(
        lifted=lifted,
        lifted_set=stable,
        center=center,
        upstairs_split=upstairs,
        bunching=bunching,
        seeds=points if seeds is None else np.atleast_2d(np.asarray(seeds, dtype=float)),
        leaves=[],
        field_points=lifted_nodes[:, :2],
        field_angles=lifted_nodes[:, 2],
        step=step,
        steps=steps,
    )
    chart.leaves = parallel_map(chart.leaf_through, list(chart.seeds), workers)
    logger.info(f"{len(chart.leaves)} feuille(s) intégrée(s), pas {step:.2e}")

    chart.diagnostics = {
        'fiber_alignment': fiber_alignment,
        'fiber_rate': upstairs.lambda_F,
        'base_rate': upstairs.lambda_E,
        'lifted_set_residual': stable.invariance_residual(lifted),
        'line_field_invariance': check_local_invariance(center).to_dict(),
        'c1_evidence': c1_evidence(center).to_dict(),
        'holonomy_residual': holonomy_residual(chart, smooth_map, center.band),
        'stable_leaf_distance': stable_leaf_distance(chart, smooth_map, points, center.band)
        if seeds is None else None,
        'second_derivative_bound': lift_derivative_bound(smooth_map, points, surface_radius, seed=seed),
    }
    return chart
