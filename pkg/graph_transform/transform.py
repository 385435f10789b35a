"""
Transformée de graphe G_m: tiré en arrière des graphes par f⁻¹, coupé par la bosse φ_m,
itéré jusqu'au point fixe.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple
import logging

import numpy as np

from core.utils import make_rng, parallel_map
from dynamics.maps import SmoothMap, jacobian_at
from smoothing.separators import SmoothSeparator, bump_from_distance

from .exceptions import (
    LipschitzViolationError,
    NewtonDivergenceError,
    NoContractionError,
    NoValidEpsilonError,
)
from .graphs import LipschitzGraph
from .ledger import ConstantsLedger
from .tubular import TubularNeighborhood

logger = logging.getLogger('graph_transform')

SMALLNESS_THRESHOLD = 0.05
NODE_ITERS = 30
NODE_TOLERANCE = 1e-12
NODE_FD_STEP = 1e-7
CHUNK = 128
DEFAULT_TOLERANCE = 1e-11
DEFAULT_MAX_ITERS = 200
STALL_RATIO = 0.98
STALL_WINDOW = 10
MAX_HALVINGS = 12
LENGTH_POINTS = 8


def map_derivative_bound(tube: TubularNeighborhood, smooth_map: SmoothMap) -> float:
    """c_f: max de ‖Df‖ et ‖Df⁻¹‖ aux nœuds du domaine du tube."""
    nodes = tube.grid.nodes
    points = tube.base_point(nodes[tube.in_domain(nodes)])
    singular = np.linalg.svd(jacobian_at(smooth_map, points), compute_uv=False)
    return float(max(np.max(singular[:, 0]), np.max(1.0 / singular[:, -1])))


def epsilon_of_m(tube: TubularNeighborhood, smooth_map: SmoothMap, m: float,
                 threshold: float = SMALLNESS_THRESHOLD, c_f: Optional[float] = None) -> float:
    """
    Rayon ε(m) de la bosse φ_m.

    On descend l'échelle dyadique R, R/2, ... (R rayon du tube) tant que m/ε reste
    sous le seuil, et on garde le premier ε pour lequel f⁻¹ du ε-voisinage de K dans
    Σ₀ reste dans le tube, à hauteur < m. Le résultat est ε/(2c_f).

    Args:
        tube: Voisinage tubulaire
        smooth_map: Application f (inversible)
        m: Hauteur maximale des graphes
        threshold: Seuil de petitesse de m/ε
        c_f: Borne sur ‖Df‖ et ‖Df⁻¹‖ (mesurée si absente)

    Returns:
        ε(m)

    Raises:
        NoValidEpsilonError: échelle épuisée ou m > rayon du tube
    """
    if not 0.0 < m <= tube.radius:
        raise NoValidEpsilonError(f"m={m:.3e} hors de ]0, {tube.radius:.3e}]")
    c_f = c_f if c_f is not None else map_derivative_bound(tube, smooth_map)
    nodes = tube.grid.nodes
    distances = tube.distance_to_K(nodes)

    epsilon = tube.radius
    while m / epsilon <= threshold:
        s = np.vstack([tube.K_params, nodes[distances <= epsilon]])
        pre = smooth_map.wrap(smooth_map.inverse(tube.base_point(s)))
        s_pre, w_pre, ok = tube.project(pre, strict=False)
        inside = ok & tube.in_domain(s_pre) & (np.linalg.norm(w_pre, axis=1) < m)
        if inside.all():
            logger.debug(f"ε₁ = {epsilon:.3e} pour m = {m:.3e}")
            return epsilon / (2.0 * c_f)
        epsilon *= 0.5
    raise NoValidEpsilonError(f"Aucun ε ≥ m/{threshold:g} ne convient pour m={m:.3e}")


def cutoff(tube: TubularNeighborhood, ledger: ConstantsLedger) -> SmoothSeparator:
    """Bosse φ_m: 1 à distance ≤ ε/2 de K dans les paramètres, 0 au-delà de ε."""
    return bump_from_distance(tube.K_params, 0.5 * ledger.epsilon, ledger.epsilon)


def probe_graph(tube: TubularNeighborhood, ledger: ConstantsLedger) -> LipschitzGraph:
    """Graphe admissible non nul, a·φ_m·e₁, de pente au plus β/2."""
    amplitude = 0.5 * min(ledger.m, ledger.beta / ledger.bump_bound)
    offsets = np.zeros((tube.grid.size, tube.fiber_dim))
    offsets[:, 0] = amplitude * cutoff(tube, ledger)(tube.grid.nodes)
    return LipschitzGraph(grid=tube.grid, offsets=offsets, beta=ledger.beta)


def _solve_nodes(tube: TubularNeighborhood, smooth_map: SmoothMap, h: Callable,
                 targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pour chaque paramètre x, point z = Σ₀(σ) + F̃(σ)·h(σ) tel que π(f⁻¹(z)) = x.

    Returns:
        Décalages de f⁻¹(z) dans leur fibre et masque de convergence
    """
    d = tube.dim

    def pulled(sigma):
        z = tube.embed(sigma, h(sigma))
        return tube.project(smooth_map.wrap(smooth_map.inverse(z)), strict=False)

    seed, _, ok = tube.project(smooth_map.wrap(smooth_map.forward(tube.base_point(targets))), strict=False)
    sigma = np.where(ok[:, None], seed, targets)
    scale = np.maximum(1.0, np.max(np.abs(targets), axis=1))
    step = NODE_FD_STEP * scale

    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(NODE_ITERS):
            s_pre, _, _ = pulled(sigma)
            residual = s_pre - targets
            done = np.max(np.abs(residual), axis=1) <= 1e-14 * scale
            if done.all():
                break
            columns = []
            for a in range(d):
                shift = np.zeros(d)
                shift[a] = 1.0
                forward_s, _, _ = pulled(sigma + step[:, None] * shift)
                backward_s, _, _ = pulled(sigma - step[:, None] * shift)
                columns.append((forward_s - backward_s) / (2.0 * step[:, None]))
            jacobian = np.stack(columns, axis=-1)
            try:
                delta = np.linalg.solve(jacobian, residual[..., None])[..., 0]
            except np.linalg.LinAlgError:
                delta = np.einsum('mij,mj->mi', np.linalg.pinv(jacobian), residual)
            sigma = np.where(done[:, None], sigma, sigma - delta)
            if not np.all(np.isfinite(sigma)):
                break
            if np.all(done | (np.max(np.abs(delta), axis=1) <= 4e-16 * scale)):
                break

        s_pre, w_pre, ok = pulled(np.nan_to_num(sigma))
    residual = np.max(np.abs(s_pre - targets), axis=1)
    converged = ok & np.all(np.isfinite(sigma), axis=1) & (residual <= NODE_TOLERANCE * scale)
    return w_pre, converged


def apply_G(tube: TubularNeighborhood, smooth_map: SmoothMap, ledger: ConstantsLedger,
            h: LipschitzGraph, workers: int = 1) -> LipschitzGraph:
    """
    Image G_m(h) = φ_m·h′, h′(x) décalage de f⁻¹(z) pour le point z du graphe tel que π(f⁻¹(z)) = x.

    Args:
        tube: Voisinage tubulaire
        smooth_map: Application f
        ledger: Constantes avec m et ε(m)
        h: Graphe de Lip_{m,β}
        workers: Nombre de workers pour la résolution aux nœuds

    Returns:
        Nouveau LipschitzGraph, nul sur le collier

    Raises:
        NewtonDivergenceError: résolution non convergente en un nœud
        LipschitzViolationError: image hors de Lip_{m,β}
    """
    nodes = tube.grid.nodes
    phi = cutoff(tube, ledger)(nodes)
    active = np.flatnonzero(phi > 0.0)
    chunks = [active[start:start + CHUNK] for start in range(0, len(active), CHUNK)]
    results = parallel_map(lambda idx: _solve_nodes(tube, smooth_map, h, nodes[idx]), chunks, workers)

    raw = np.zeros((tube.grid.size, tube.fiber_dim))
    for idx, (offsets, converged) in zip(chunks, results):
        if not converged.all():
            bad = int(idx[np.flatnonzero(~converged)[0]])
            raise NewtonDivergenceError(f"Résolution non convergente au nœud {bad} (s={nodes[bad].tolist()})")
        raw[idx] = offsets

    image = LipschitzGraph(grid=tube.grid, offsets=phi[:, None] * raw, beta=ledger.beta)
    if image.sup_norm > ledger.m * (1.0 + 1e-9):
        raise LipschitzViolationError(f"‖G(h)‖ = {image.sup_norm:.3e} > m = {ledger.m:.3e}")
    violations = image.slope_violations()
    if violations:
        raise LipschitzViolationError(
            f"Pente {image.max_slope:.3e} > β = {ledger.beta:g} au nœud {violations[0]} "
            f"(s={nodes[violations[0]].tolist()})"
        )
    return image


@dataclass
class ConvergenceTrace:
    """
    Distances C⁰ successives de l'itération.

    Attributes:
        distances: sup-distance entre itérés consécutifs
        converged: tolérance atteinte
    """
    distances: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.distances)

    @property
    def ratios(self) -> List[float]:
        return [b / a for a, b in zip(self.distances, self.distances[1:]) if a > 0.0 and b > 0.0]

    @property
    def contraction_factor(self) -> float:
        """Moyenne géométrique des rapports consécutifs (0 si l'itération est immédiatement stationnaire)."""
        ratios = self.ratios
        if not ratios:
            return 0.0
        return float(np.exp(np.mean(np.log(ratios))))

    def stalled(self) -> bool:
        tail = self.ratios[-STALL_WINDOW:]
        return len(tail) == STALL_WINDOW and min(tail) > STALL_RATIO

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'converged': self.converged,
            'distances': list(self.distances),
            'ratios': self.ratios,
            'contraction_factor': self.contraction_factor,
        }


def iterate_to_fixed_point(tube: TubularNeighborhood, smooth_map: SmoothMap, ledger: ConstantsLedger,
                           h0: Optional[LipschitzGraph] = None, tol: float = DEFAULT_TOLERANCE,
                           max_iters: int = DEFAULT_MAX_ITERS,
                           workers: int = 1) -> Tuple[LipschitzGraph, ConvergenceTrace]:
    """
    Itère G_m depuis h0 (graphe nul par défaut).

    Returns:
        (graphe final, trace)

    Raises:
        NoContractionError: rapports > 0.98 sur 10 itérations consécutives
    """
    h = h0 if h0 is not None else LipschitzGraph.zero(tube.grid, tube.fiber_dim, ledger.beta)
    trace = ConvergenceTrace()
    for iteration in range(max_iters):
        image = apply_G(tube, smooth_map, ledger, h, workers)
        distance = image.distance(h)
        trace.distances.append(distance)
        h = image
        logger.debug(f"Itération {iteration + 1}: distance {distance:.3e}")
        if distance <= tol:
            trace.converged = True
            break
        if trace.stalled():
            raise NoContractionError(
                f"Pas de contraction après {trace.iterations} itérations "
                f"(derniers rapports {[round(r, 4) for r in trace.ratios[-3:]]})"
            )
    if not trace.converged:
        logger.warning(f"Tolérance {tol:g} non atteinte en {max_iters} itérations")
    logger.info(f"Point fixe: {trace.iterations} itération(s), facteur {trace.contraction_factor:.4f}")
    return h, trace


@dataclass
class FixedPointResult:
    """Graphe fixe, trace et registre des constantes retenus par auto_tune_m."""
    graph: LipschitzGraph
    trace: ConvergenceTrace
    ledger: ConstantsLedger
    halvings: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'graph': self.graph.to_dict(),
            'trace': self.trace.to_dict(),
            'ledger': self.ledger.to_dict(),
            'halvings': self.halvings,
        }


def auto_tune_m(tube: TubularNeighborhood, smooth_map: SmoothMap, ledger: ConstantsLedger,
                threshold: float = SMALLNESS_THRESHOLD, tol: float = DEFAULT_TOLERANCE,
                max_iters: int = DEFAULT_MAX_ITERS, probe: bool = True, workers: int = 1) -> FixedPointResult:
    """
    Choisit m en partant de R/4 et en divisant par deux sur échec, au plus 12 fois.

    Args:
        probe: Partir d'un graphe sonde non nul (mesure du facteur de contraction)

    Raises:
        LipschitzViolationError, NoContractionError, NoValidEpsilonError: dernier échec
    """
    c_f = map_derivative_bound(tube, smooth_map)
    m = tube.radius / 4.0
    failure = None
    for halving in range(MAX_HALVINGS + 1):
        try:
            epsilon = epsilon_of_m(tube, smooth_map, m, threshold, c_f)
            scaled = ledger.with_scale(m, epsilon, c_f)
            start = probe_graph(tube, scaled) if probe else None
            graph, trace = iterate_to_fixed_point(tube, smooth_map, scaled, start, tol, max_iters, workers)
            logger.info(f"m = {m:.3e}, ε(m) = {epsilon:.3e} retenus après {halving} division(s)")
            return FixedPointResult(graph=graph, trace=trace, ledger=scaled, halvings=halving)
        except (LipschitzViolationError, NoContractionError, NoValidEpsilonError) as exc:
            logger.info(f"m = {m:.3e} rejeté: {exc}")
            failure = exc
            m *= 0.5
    raise failure


@dataclass
class GraphConeReport:
    """
    Contrôles de cône sur un graphe.

    Attributes:
        max_slope: pente maximale entre nœuds voisins
        slope_violations: nœuds où la pente dépasse β
        length_ratio: max longueur(courbe du graphe)/(2(1+β)·longueur(courbe de base))
        gamma_measured: contraction maximale le long des fibres sous f⁻¹
        gamma: γ du registre
    """
    max_slope: float
    slope_violations: List[int]
    length_ratio: float
    gamma_measured: float
    gamma: float

    @property
    def slopes_ok(self) -> bool:
        return not self.slope_violations

    @property
    def length_ok(self) -> bool:
        return self.length_ratio <= 1.0

    @property
    def contraction_ok(self) -> bool:
        return self.gamma_measured <= self.gamma

    @property
    def passed(self) -> bool:
        return self.slopes_ok and self.length_ok and self.contraction_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_slope': self.max_slope,
            'slope_violations': self.slope_violations[:20],
            'slopes_ok': self.slopes_ok,
            'length_ratio': self.length_ratio,
            'length_ok': self.length_ok,
            'gamma_measured': self.gamma_measured,
            'gamma': self.gamma,
            'contraction_ok': self.contraction_ok,
            'passed': self.passed,
        }


def check_graph_cone(tube: TubularNeighborhood, smooth_map: SmoothMap, h: LipschitzGraph,
                     ledger: ConstantsLedger, samples: int = 200, seed: int = 0) -> GraphConeReport:
    """
    (a) pentes entre nœuds voisins dans C^h_β; (b) longueur des courbes du graphe issues
    de K au plus 2(1+β) fois celle de leur base; (c) contraction γ le long des fibres:
    deux points z₁, z₂ d'une même fibre, l'un sur le graphe, ont des préimages dont les
    décalages diffèrent d'au plus γ·d_π(z₁, z₂).
    """
    rng = make_rng(seed, stream=13)
    nodes = tube.grid.nodes
    domain = np.flatnonzero(tube.in_domain(nodes))
    if len(domain) > samples:
        domain = np.sort(rng.choice(domain, size=samples, replace=False))
    x = nodes[domain]

    _, nearest = tube.nearest_K(x)
    t = np.linspace(0.0, 1.0, LENGTH_POINTS + 1)
    starts = tube.K_params[nearest]
    paths = starts[:, None, :] + t[None, :, None] * (x - starts)[:, None, :]
    flat = paths.reshape(-1, tube.dim)
    graph_curve = tube.embed(flat, h(flat)).reshape(len(x), len(t), -1)
    base_curve = tube.base_point(flat).reshape(len(x), len(t), -1)
    graph_length = np.sum(np.linalg.norm(np.diff(graph_curve, axis=1), axis=2), axis=1)
    base_length = np.sum(np.linalg.norm(np.diff(base_curve, axis=1), axis=2), axis=1)
    moved = base_length > 0.0
    length_ratio = 0.0
    if moved.any():
        length_ratio = float(np.max(graph_length[moved] / (2.0 * (1.0 + ledger.beta) * base_length[moved])))

    gap = 0.5 * (ledger.m if ledger.m else tube.radius)
    direction = rng.normal(size=(len(x), tube.fiber_dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    w1 = h(x)
    z1 = tube.embed(x, w1)
    z2 = tube.embed(x, w1 + gap * direction)
    _, a, ok1 = tube.project(smooth_map.wrap(smooth_map.inverse(z1)), strict=False)
    _, b, ok2 = tube.project(smooth_map.wrap(smooth_map.inverse(z2)), strict=False)
    ok = ok1 & ok2
    gamma_measured = float(np.max(np.linalg.norm(b[ok] - a[ok], axis=1)) / gap) if ok.any() else float('inf')

    violations = h.slope_violations(ledger.beta)
    report = GraphConeReport(max_slope=h.max_slope, slope_violations=violations, length_ratio=length_ratio,
                             gamma_measured=gamma_measured, gamma=ledger.gamma)
    logger.info(f"Contrôle de cône: pente {report.max_slope:.3e}, longueur {length_ratio:.3f}, "
                f"γ mesuré {gamma_measured:.3f} <= {ledger.gamma:.3f}: {report.passed}")
    return report
