"""
Tests pour l'app verify.
"""

from functools import lru_cache
from unittest.mock import patch

import numpy as np
import pytest
from django.test import SimpleTestCase

from cones.splitting import estimate_splitting
from dynamics.registry import lookup
from graph_transform.graphs import LipschitzGraph
from graph_transform.ledger import choose_ledger
from graph_transform.surfaces import CenterGraph, build_center_graph
from graph_transform.tests import CURVED_TARGETS, LINEAR_TARGETS, linear3_tube
from graph_transform.transform import epsilon_of_m, iterate_to_fixed_point, map_derivative_bound
from invariant_set.boxes import maximal_invariant
from strong_manifolds.connections import ConnectionReport

from .checks import c1_evidence, check_containment, check_local_invariance, check_oracle, check_tangency
from .exceptions import IntersectionDegenerateError, StrongConnectionError
from .perturbation import check_robust_containment, perturbed_map, robustness_probe
from .reports import CheckReport, VerificationSummary
from .saddle import saddle_intersection

SMALL_U = np.array([[-0.1, 0.1]] * 3)


@lru_cache(maxsize=None)
def linear3_center():
    """Plan z = 0 de linear3, graphe fixe obtenu depuis le graphe nul."""
    smooth_map, tube = linear3_tube(spacing=0.2 / 48)
    m = tube.radius / 64.0
    ledger = choose_ledger(LINEAR_TARGETS).with_scale(
        m, epsilon_of_m(tube, smooth_map, m), map_derivative_bound(tube, smooth_map))
    graph, trace = iterate_to_fixed_point(tube, smooth_map, ledger)
    return CenterGraph(tube=tube, map=smooth_map, graph=graph, ledger=ledger, trace=trace)


@lru_cache(maxsize=None)
def curved2_center():
    smooth_map = lookup('curved2').map
    K = np.zeros((1, 2))
    split = estimate_splitting(smooth_map, K, 1)
    return build_center_graph(smooth_map, K, split, 0.2, targets=CURVED_TARGETS, spacing=1e-3), split


class ReportTest(SimpleTestCase):
    """Tests des rapports."""

    def test_summary_lists_failures(self):
        """Test: le résumé échoue dès qu'un contrôle échoue et le nomme."""
        summary = VerificationSummary()
        summary.add(CheckReport(name='a', passed=True, measured=0.0, tolerance=1.0))
        summary.add(CheckReport(name='b', passed=False, measured=2.0, tolerance=1.0))
        assert not summary.passed
        assert summary.failed == ['b']
        assert summary.to_dict()['checks']['b']['tolerance'] == 1.0


class LinearChecksTest(SimpleTestCase):
    """Tests des contrôles sur le plan invariant de linear3."""

    def setUp(self):
        """Initialisation des données de test."""
        self.center = linear3_center()

    def test_local_invariance_exact(self):
        """Test: résidu d'invariance nul sur le plan fixe."""
        report = check_local_invariance(self.center)
        assert report.passed
        assert report.measured <= 1e-12
        assert report.details['samples'] > 1

    def test_perturbed_graph_fails_invariance(self):
        """Test: un décalage de 1e-3 dans la bande est détecté."""
        tube = self.center.tube
        offsets = self.center.graph.offsets.copy()
        offsets[tube.distance_to_K(tube.grid.nodes) <= self.center.band] += 1e-3
        bumped = self.center.with_graph(LipschitzGraph(grid=tube.grid, offsets=offsets, beta=self.center.graph.beta))
        report = check_local_invariance(bumped)
        assert not report.passed
        assert report.measured > 1e-4

    def test_tangency(self):
        """Test: plan tangent = E = plan xy en 0."""
        split = estimate_splitting(self.center.map, np.zeros((1, 3)), 1)
        report = check_tangency(self.center, split)
        assert report.passed
        assert report.measured <= 1e-12

    def test_containment(self):
        """Test: l'ensemble invariant maximal de [−0.1, 0.1]³ (axe y) est à moins de 2h du plan."""
        invariant = maximal_invariant(self.center.map, SMALL_U, 0.025)
        report = check_containment(self.center, invariant)
        assert report.passed
        assert report.measured <= 0.05
        assert report.details['pullback_contracts']
        assert report.details['pullback_growth'] <= 1.0 + 1e-6

    def test_oracle(self):
        """Test: points du plan z = 0 sur S, points décalés de 1e-3 rejetés."""
        expected = np.array([[0.0, 0.05, 0.0], [0.02, -0.05, 0.0]])
        report = check_oracle(self.center, expected, 1e-10, name='plane', details={'source': 'z = 0'})
        assert report.passed
        assert report.details == {'points': 2, 'outside_tube': 0, 'source': 'z = 0'}

        shifted = check_oracle(self.center, expected + np.array([0.0, 0.0, 1e-3]), 1e-6, name='plane')
        assert not shifted.passed
        assert shifted.measured == pytest.approx(1e-3, rel=1e-6)

    def test_c1_evidence_flat(self):
        """Test: module de continuité nul pour un plan."""
        report = c1_evidence(self.center)
        assert report.passed
        assert report.measured <= 1e-10
        assert report.details['evidence_only']

    def test_c1_evidence_quadratic(self):
        """Test: graphe quadratique, le module est divisé par 2 avec le pas."""
        tube = self.center.tube
        nodes = tube.grid.nodes
        offsets = 0.01 * np.sum(nodes ** 2, axis=1, keepdims=True)
        quadratic = self.center.with_graph(LipschitzGraph(grid=tube.grid, offsets=offsets, beta=0.08))
        report = c1_evidence(quadratic)
        assert report.passed
        assert report.details['ratio'] == pytest.approx(2.0, rel=0.2)


class RobustnessTest(SimpleTestCase):
    """Tests de la robustesse sous perturbation."""

    def setUp(self):
        """Initialisation des données de test."""
        self.center = linear3_center()

    def test_perturbation_is_local(self):
        """Test: g = f hors du support et ‖g − f‖ <= taille."""
        anchors = np.zeros((1, 3))
        g = perturbed_map(self.center.map, anchors, 1e-3, 0.05)
        far = np.array([[0.3, 0.2, -0.1]])
        near = np.zeros((1, 3))
        assert np.array_equal(g.forward(far), self.center.map.forward(far))
        assert 0.0 < np.linalg.norm(g.forward(near) - self.center.map.forward(near)) <= 1e-3
        assert np.allclose(g.forward(g.inverse(near)), near, atol=1e-14)

    def test_zero_perturbation(self):
        """Test: taille nulle, S_g = S."""
        report = robustness_probe(self.center, sizes=(0.0,))
        assert report.passed
        assert report.measured <= 1e-10

    def test_single_size(self):
        """Test: taille 1e-3, distance C⁰ <= 5e-3."""
        report = robustness_probe(self.center, sizes=(1e-3,))
        assert report.passed
        assert 0.0 < report.details['ladder'][0]['c0_distance'] <= 5e-3

    def test_ladder_is_linear(self):
        """Test: pente log-log dans [0.8, 1.2] sur {1e-2, 1e-3, 1e-4}."""
        report = robustness_probe(self.center)
        assert report.passed
        assert 0.8 <= report.details['loglog_slope'] <= 1.2

    def test_robust_containment(self):
        """Test: l'ensemble invariant maximal de g reste près de S_g."""
        report = check_robust_containment(self.center, SMALL_U, 0.025)
        assert report.name == 'robust_containment'
        assert report.passed


class SaddleTest(SimpleTestCase):
    """Tests de l'intersection S^cs ∩ S^cu."""

    def test_saddle3_curve(self):
        """Test: saddle3, courbe tangente à l'axe y et localement invariante à 1e-6."""
        smooth_map = lookup('saddle3').map
        surface = saddle_intersection(smooth_map, np.zeros((1, 3)), 1, 1, 0.2)
        assert surface.transversality >= 80.0
        assert surface.tangent_angle <= 1e-3
        assert surface.invariance_residual <= 1e-6
        assert surface.motion <= 1e-10
        assert surface.points.shape == (1, 9, 3)

    def test_linear3_axis(self):
        """Test: linear3, intersection = axe y."""
        surface = saddle_intersection(lookup('linear3').map, np.zeros((1, 3)), 1, 1, 0.25)
        assert np.max(np.abs(surface.points[0][:, [0, 2]])) <= 1e-9
        assert surface.tangent_angle <= 1e-8

    def test_connection_refused(self):
        """Test: une connexion forte détectée interdit la construction."""
        connected = ConnectionReport(resolution=0.01, delta=0.03, exclusion=0.06, radius=0.2,
                                     per_point=[{'offenders': [{'pair_criterion': True}]}])
        with patch('verify.saddle.detect_connection', return_value=connected):
            with pytest.raises(StrongConnectionError):
                saddle_intersection(lookup('linear3').map, np.zeros((1, 3)), 1, 1, 0.25)

    def test_degenerate_intersection(self):
        """Test: angle de 1° entre les surfaces, intersection refusée."""
        with patch('verify.saddle.transversality_degrees', return_value=1.0):
            with pytest.raises(IntersectionDegenerateError):
                saddle_intersection(lookup('linear3').map, np.zeros((1, 3)), 1, 1, 0.25,
                                    check_connections=False)


@pytest.mark.slow
class CurvedChecksTest(SimpleTestCase):
    """Tests des contrôles sur le graphe fixe de curved2."""

    def setUp(self):
        """Initialisation des données de test."""
        self.center, self.split = curved2_center()

    def test_local_invariance(self):
        """Test: résidu d'invariance <= 1e-9 dans le cœur."""
        report = check_local_invariance(self.center)
        assert report.passed
        assert report.measured <= 1e-9

    def test_tangency(self):
        """Test: tangente en 0 = axe x, angle <= 1e-6."""
        assert check_tangency(self.center, self.split).measured <= 1e-6

    def test_ladder(self):
        """Test: pente log-log dans [0.8, 1.2]."""
        report = robustness_probe(self.center)
        assert report.passed
