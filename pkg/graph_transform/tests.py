"""
Tests pour l'app graph_transform.
"""

from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from django.test import SimpleTestCase

from cones.splitting import estimate_splitting
from dynamics.registry import HENON_A, HENON_B, henon_fixed_point, henon_period_two, lookup, series_graph
from whitney_surface.gluing import build_surface

from .exceptions import NoValidEpsilonError, ProjectionFailureError, PropertiesUnachievableError
from .graphs import LipschitzGraph, graph_from_rows
from .grids import GridField, ParameterGrid
from .ledger import ConstantsLedger, choose_ledger, default_targets, validate_ledger
from .surfaces import build_center_graph
from .transform import (
    apply_G,
    auto_tune_m,
    check_graph_cone,
    epsilon_of_m,
    iterate_to_fixed_point,
    map_derivative_bound,
    probe_graph,
)
from .tubular import build_tubular

LINEAR_TARGETS = {'lambda0': 1.5, 'eta': 0.05, 'beta': 0.08, 'delta': 0.01}
CURVED_TARGETS = {'lambda0': 1.25, 'eta': 0.025, 'beta': 0.08, 'delta': 0.01}
WORKED = ConstantsLedger(lambda0=3.0, eta=0.05, beta=0.05, delta=0.04, gamma=0.4, rho=1.1, beta_bar=0.03)


def linear3_tube(spacing=None):
    """Tube autour de K = {0} pour linear3: Σ₀ = plan xy, fibres verticales."""
    smooth_map = lookup('linear3').map
    K = np.zeros((1, 3))
    split = estimate_splitting(smooth_map, K, 1)
    surface = build_surface(K, split, 0.5)
    return smooth_map, build_tubular(surface, K, split, smooth_map, LINEAR_TARGETS, spacing=spacing)


def curved2_tube(spacing=1e-3):
    smooth_map = lookup('curved2').map
    K = np.zeros((1, 2))
    split = estimate_splitting(smooth_map, K, 1)
    surface = build_surface(K, split, 0.2)
    return smooth_map, build_tubular(surface, K, split, smooth_map, CURVED_TARGETS, spacing=spacing)


class ParameterGridTest(SimpleTestCase):
    """Tests des grilles et des champs interpolés."""

    def test_anchor_is_node(self):
        """Test: un nœud tombe exactement sur l'ancre."""
        grid = ParameterGrid.from_box([[-0.3, 0.2]], 0.07, anchor=[0.01])
        assert np.min(np.abs(grid.axes[0] - 0.01)) == 0.0
        assert grid.box[0, 0] <= -0.3 and grid.box[0, 1] >= 0.2

    def test_neighbor_pairs(self):
        """Test: grille 3 × 4, 2·4 + 3·3 paires voisines."""
        grid = ParameterGrid(axes=(np.arange(3.0), np.arange(4.0)), spacing=1.0)
        first, second = grid.neighbor_pairs()
        assert len(first) == 17
        distances = np.linalg.norm(grid.nodes[second] - grid.nodes[first], axis=1)
        assert np.allclose(distances, 1.0)

    def test_cubic_reproduced_in_one_dimension(self):
        """Test: une cubique est reproduite exactement avec sa dérivée."""
        grid = ParameterGrid.from_box([[-1.0, 1.0]], 0.1)
        field = GridField(grid, grid.nodes[:, 0] ** 3 - grid.nodes[:, 0])
        s = np.array([[-0.537], [0.0123], [0.91]])
        assert np.allclose(field(s)[:, 0], s[:, 0] ** 3 - s[:, 0], atol=1e-12)
        assert np.allclose(field.gradient(s)[:, 0, 0], 3.0 * s[:, 0] ** 2 - 1.0, atol=1e-10)

    def test_bicubic_reproduced_in_two_dimensions(self):
        """Test: x²y est reproduit par les splines bicubiques."""
        grid = ParameterGrid.from_box([[-1.0, 1.0], [-0.5, 0.5]], 0.125)
        nodes = grid.nodes
        field = GridField(grid, np.column_stack([nodes[:, 0] ** 2 * nodes[:, 1], nodes[:, 1]]))
        s = np.array([[0.31, -0.27], [-0.77, 0.05]])
        assert np.allclose(field(s)[:, 0], s[:, 0] ** 2 * s[:, 1], atol=1e-10)
        gradient = field.gradient(s)
        assert np.allclose(gradient[:, 0, 0], 2.0 * s[:, 0] * s[:, 1], atol=1e-9)
        assert np.allclose(gradient[:, 1, 1], 1.0, atol=1e-9)

    def test_three_dimensional_box_rejected(self):
        """Test: maillage limité à d <= 2."""
        from strong_manifolds.exceptions import DimensionUnsupportedError
        with pytest.raises(DimensionUnsupportedError):
            ParameterGrid.from_box([[0.0, 1.0]] * 3, 0.1)


class LedgerTest(SimpleTestCase):
    """Tests du registre des constantes."""

    def test_worked_example_passes(self):
        """Test: (3, 0.05, 0.05, 0.04, 0.4, 1.1, 0.03) satisfait toutes les inégalités."""
        verdict = validate_ledger(WORKED)
        assert verdict
        assert verdict.violated == []

    def test_zero_eta(self):
        """Test: η = 0, la borne du cône est infinie."""
        assert validate_ledger(replace(WORKED, eta=0.0))

    def test_gamma_rho_violation(self):
        """Test: γρ = 1.2 échoue et nomme γρ<1."""
        verdict = validate_ledger(replace(WORKED, rho=3.0))
        assert not verdict
        assert verdict.violated == ['γρ<1']

    def test_single_perturbations_flip(self):
        """Test: chaque inégalité bascule pour une perturbation de 1e-6 de la constante liante."""
        effective = 3.0 - 4.0 * 0.05 * 1.05
        cases = [
            ({'delta': 0.05 + 1e-6}, 'β+δ<1/10'),
            ({'gamma': 1.0 / 1.1 + 1e-6}, 'γρ<1'),
            ({'gamma': 1.0 / effective - 1e-6}, '(λ₀−4η(1+β))⁻¹<γ<1'),
            ({'beta_bar': 0.05 + 1e-6}, 'β/λ₀<β̄<β'),
            ({'beta_bar': 0.05 / 3.0 - 1e-6}, 'β/λ₀<β̄<β'),
            ({'lambda0': 1.0 + 4.0 * 0.05 * 1.05 - 1e-6}, 'λ₀−4η(1+β)>1'),
            ({'beta': (3.0 - 0.1) / 0.3 + 1e-6}, 'β<(λ₀−2η)/(6η)'),
        ]
        for change, name in cases:
            verdict = validate_ledger(replace(WORKED, **change))
            assert not verdict, change
            assert name in verdict.violated, (change, verdict.violated)

    def test_chosen_ledger_is_valid(self):
        """Test: les cibles par défaut complétées par γ et β̄ valident le registre."""
        targets = default_targets(SimpleNamespace(lambda_E=1.0, lambda_F=3.0))
        assert targets['lambda0'] == pytest.approx(1.5)
        assert targets['eta'] == pytest.approx(0.05)
        assert validate_ledger(choose_ledger(targets))


class TubularTest(SimpleTestCase):
    """Tests du voisinage tubulaire."""

    def setUp(self):
        """Initialisation des données de test."""
        self.map, self.tube = linear3_tube()

    def test_linear3_properties_exact(self):
        """Test: linear3, λ₀ = 3, η = 0, δ = 0, fibres orthogonales."""
        properties = self.tube.properties
        assert properties.lambda0 == pytest.approx(3.0, abs=1e-9)
        assert properties.eta <= 1e-12
        assert properties.delta <= 1e-12
        assert properties.cone_factor <= 1.0 / 3.0 + 1e-9
        assert properties.transversality == pytest.approx(90.0, abs=1e-6)
        assert self.tube.radius == pytest.approx(0.2)

    def test_projection_inverts_embedding(self):
        """Test: π∘(plongement des fibres) = identité à 1e-10."""
        rng = np.random.default_rng(3)
        s = rng.uniform(-0.1, 0.1, size=(50, 2))
        w = rng.uniform(-0.1, 0.1, size=(50, 1))
        s_back, w_back = self.tube.project(self.tube.embed(s, w))
        assert np.max(np.abs(s_back - s)) <= 1e-10
        assert np.max(np.abs(w_back - w)) <= 1e-10

    def test_projection_outside_grid(self):
        """Test: un point loin de K ne se projette pas."""
        with pytest.raises(ProjectionFailureError):
            self.tube.project(np.array([[0.9, 0.0, 0.0]]))

    def test_unachievable_expansion(self):
        """Test: λ₀ = 5 est hors d'atteinte sur linear3."""
        K = np.zeros((1, 3))
        split = estimate_splitting(self.map, K, 1)
        surface = build_surface(K, split, 0.5)
        targets = dict(LINEAR_TARGETS, lambda0=5.0)
        with pytest.raises(PropertiesUnachievableError, match='λ₀'):
            build_tubular(surface, K, split, self.map, targets)

    def test_curved2_properties(self):
        """Test: curved2, λ₀ ≈ 2 et η borné par le rayon."""
        _, tube = curved2_tube()
        assert tube.properties.lambda0 == pytest.approx(2.0, abs=1e-3)
        assert tube.properties.eta <= tube.radius * (1.0 + 1e-6)
        assert tube.radius <= 0.025


class GraphTransformTest(SimpleTestCase):
    """Tests de la transformée de graphe sur linear3."""

    def setUp(self):
        """Initialisation des données de test."""
        self.map, self.tube = linear3_tube(spacing=0.2 / 48)
        self.ledger = choose_ledger(LINEAR_TARGETS)
        self.m = self.tube.radius / 64.0
        self.epsilon = epsilon_of_m(self.tube, self.map, self.m)
        self.scaled = self.ledger.with_scale(self.m, self.epsilon, map_derivative_bound(self.tube, self.map))

    def test_epsilon_closed_form(self):
        """Test: ε(m) = (R/2)/(2·3), f⁻¹ doublant x."""
        assert map_derivative_bound(self.tube, self.map) == pytest.approx(3.0)
        assert self.epsilon == pytest.approx(self.tube.radius / 12.0, rel=1e-12)

    def test_epsilon_monotone(self):
        """Test: ε(m/2) <= ε(m)."""
        assert epsilon_of_m(self.tube, self.map, self.m / 2.0) <= self.epsilon

    def test_epsilon_exhausted(self):
        """Test: m égal au rayon, aucun ε ne convient."""
        with pytest.raises(NoValidEpsilonError):
            epsilon_of_m(self.tube, self.map, self.tube.radius)

    def test_zero_graph_fixed(self):
        """Test: G(0) = 0, le plan est invariant."""
        zero = LipschitzGraph.zero(self.tube.grid, 1, self.ledger.beta)
        assert apply_G(self.tube, self.map, self.scaled, zero).sup_norm <= 1e-15

    def test_constant_offset_contracts(self):
        """Test: un décalage a·φ_m contracte d'un facteur au moins 3 (à l'interpolation près)."""
        probe = probe_graph(self.tube, self.scaled)
        image = apply_G(self.tube, self.map, self.scaled, probe)
        assert probe.sup_norm > 0.0
        assert image.sup_norm <= probe.sup_norm / 3.0 * 1.01
        assert np.all(image.offsets[self.tube.distance_to_K(self.tube.grid.nodes) >= self.epsilon] == 0.0)

    def test_iteration_ratio(self):
        """Test: convergence vers 0 au rapport ≈ 1/3."""
        graph, trace = iterate_to_fixed_point(self.tube, self.map, self.scaled, probe_graph(self.tube, self.scaled))
        assert trace.converged
        assert graph.sup_norm <= 1e-10
        assert 0.30 <= trace.contraction_factor <= 0.37

    def test_auto_tune(self):
        """Test: m = R/64 après quatre divisions."""
        result = auto_tune_m(self.tube, self.map, self.ledger)
        assert result.halvings == 4
        assert result.ledger.m == pytest.approx(self.tube.radius / 64.0)
        assert result.trace.converged

    def test_cone_checks_pass_on_zero_graph(self):
        """Test: graphe nul, pentes nulles, γ mesuré = 1/3."""
        zero = LipschitzGraph.zero(self.tube.grid, 1, self.ledger.beta)
        report = check_graph_cone(self.tube, self.map, zero, self.scaled)
        assert report.passed
        assert report.max_slope == 0.0
        assert report.gamma_measured == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_corrupted_slope_detected(self):
        """Test: une pente 2β injectée en un nœud fait échouer le contrôle (a) en ce nœud."""
        graph = LipschitzGraph.zero(self.tube.grid, 1, self.ledger.beta)
        node = int(np.argmin(np.linalg.norm(self.tube.grid.nodes, axis=1)))
        graph.offsets[node, 0] = 2.0 * self.ledger.beta * self.tube.grid.spacing
        report = check_graph_cone(self.tube, self.map, graph, self.scaled)
        assert not report.slopes_ok
        assert node in report.slope_violations

    def test_rows_round_trip(self):
        """Test: un graphe exporté en lignes se relit à l'identique."""
        probe = probe_graph(self.tube, self.scaled)
        loaded = graph_from_rows(self.tube.grid, np.array(probe.rows(self.tube)), 1, probe.beta)
        assert np.array_equal(loaded.offsets, probe.offsets)


class CurvedFixedGraphTest(SimpleTestCase):
    """Tests du graphe fixe de curved2 (oracle de Taylor h(x) = −x² + O(x⁴))."""

    def setUp(self):
        """Initialisation des données de test."""
        self.map, self.tube = curved2_tube(spacing=1e-3)
        self.ledger = choose_ledger(CURVED_TARGETS)

    def _curve(self, graph):
        points = self.tube.embed(self.tube.grid.nodes, graph.offsets)
        center = int(np.argmin(np.abs(self.tube.grid.nodes[:, 0])))
        return points, center

    def test_one_pull_back_step(self):
        """Test: G(0)(x) = −x²/2 + O(x³) près de 0."""
        result = auto_tune_m(self.tube, self.map, self.ledger)
        zero = LipschitzGraph.zero(self.tube.grid, 1, self.ledger.beta)
        points, center = self._curve(apply_G(self.tube, self.map, result.ledger, zero))
        for k in (center - 1, center + 1):
            x, y = points[k]
            assert abs(y + 0.5 * x ** 2) <= 1e-2 * x ** 2

    def test_second_difference(self):
        """Test: différence seconde en 0 du graphe fixe = −2 ± 1e-3, graphe épinglé en 0."""
        result = auto_tune_m(self.tube, self.map, self.ledger)
        assert result.trace.converged
        points, center = self._curve(result.graph)
        spacing = self.tube.grid.spacing
        second = (points[center + 1, 1] - 2.0 * points[center, 1] + points[center - 1, 1]) / spacing ** 2
        assert second == pytest.approx(-2.0, abs=1e-3)
        assert abs(result.graph.offsets[center, 0]) <= 1e-14

        report = check_graph_cone(self.tube, self.map, result.graph, result.ledger)
        assert report.contraction_ok
        assert report.gamma_measured <= result.ledger.gamma


@pytest.mark.slow
class CoupledHenonFixedGraphTest(SimpleTestCase):
    """Graphe fixe de henon_x_expand_coupled contre la série ψ, sur les orbites de période <= 2."""

    def test_matches_series(self):
        """Test: S passe par (p, ψ(p)) à 1e-5 près et n'est pas plate."""
        smooth_map = lookup('henon_x_expand_coupled').map
        base = np.vstack([henon_fixed_point(HENON_A, HENON_B)[None, :], henon_period_two(HENON_A, HENON_B)])
        values, tails = series_graph(base)
        K = np.column_stack([base, values])
        split = estimate_splitting(smooth_map, K, 1)

        center = build_center_graph(smooth_map, K, split, 0.05, spacing=5e-3, samples=100)
        assert center.trace.converged
        distances, _, ok = center.fiber_distance(K)
        assert ok.all()
        assert distances.max() <= 1e-5
        assert tails.max() <= 1e-20

        heights = center.points(center.tube.K_params)[:, 2]
        assert np.ptp(heights) >= 1e-4
        np.testing.assert_allclose(heights, values, rtol=0.0, atol=1e-5)
