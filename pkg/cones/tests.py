"""
Tests pour l'app cones.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from dynamics.registry import HENON_A, HENON_B, henon_fixed_point, linear_map, lookup

from .certificates import check_bunched, check_contraction, check_dual_contraction, cone_thinness
from .exceptions import NoDominationError, OrbitEscapeError
from .fields import ConeField
from .splitting import estimate_splitting


def henon_cycles():
    """Points fixes et orbite de période 2 de l'Hénon a=6, b=0.4, plongés en z=0."""
    a, b = HENON_A, HENON_B
    right = henon_fixed_point(a, b)
    x_left = (b - 1.0 - np.sqrt((1.0 - b) ** 2 + 4.0 * a)) / (2.0 * a)
    s = (1.0 - b) / a
    p = (s ** 2 - (2.0 - (1.0 - b) * s) / a) / 2.0
    x1, x2 = (s + np.sqrt(s ** 2 - 4.0 * p)) / 2.0, (s - np.sqrt(s ** 2 - 4.0 * p)) / 2.0
    fixed = [np.array([right[0], right[1], 0.0]), np.array([x_left, b * x_left, 0.0])]
    pair = [np.array([x1, b * x2, 0.0]), np.array([x2, b * x1, 0.0])]
    return fixed, pair


def cycle_segment(cycle, length):
    return np.array([cycle[k % len(cycle)] for k in range(length + 1)])


class ConeFieldTest(SimpleTestCase):
    """Tests du champ de cônes."""

    def setUp(self):
        """Initialisation des données de test."""
        self.cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 1.0)

    def test_membership(self):
        """Test de l'appartenance au cône d'ouverture 1 autour de z."""
        assert self.cone.contains(np.array([0.5, 0.5, 1.0]), np.zeros(3))
        assert not self.cone.contains(np.array([1.0, 1.0, 1.0]), np.zeros(3))

    def test_generators_inside(self):
        """Test: tous les générateurs sont des vecteurs unitaires du cône."""
        generators = self.cone.generators(np.zeros(3))
        assert len(generators) == 1 + 2 * 2 + 32
        assert np.allclose(np.linalg.norm(generators, axis=1), 1.0)
        assert np.all(self.cone.contains(generators, np.zeros(3)))

    def test_outside_generators(self):
        """Test: les générateurs extérieurs sont hors du cône."""
        outside = self.cone.outside_generators(np.zeros(3))
        assert not np.any(self.cone.contains(outside, np.zeros(3), tol=0.0))

    def test_dual(self):
        """Test du cône dual: axe complémentaire, ouverture inverse."""
        dual = self.cone.dual()
        assert dual.dim == 2
        assert dual.opening_at(np.zeros(3)) == pytest.approx(1.0)
        assert dual.orthonormality_defect() < 1e-12


class SplittingTest(SimpleTestCase):
    """Tests de l'estimation de la décomposition dominée."""

    def test_linear3(self):
        """Test: F = axe z, E = plan xy, λ_F = 3, λ_E = 1."""
        entry = lookup('linear3')
        K = np.column_stack([np.zeros(5), np.linspace(-0.5, 0.5, 5), np.zeros(5)])
        splitting = estimate_splitting(entry.map, K, 1)

        assert np.max(np.abs(splitting.F_frames[:, :2, 0])) < 1e-10
        assert np.max(np.abs(splitting.E_frames[:, 2, :])) < 1e-10
        assert splitting.lambda_F == pytest.approx(3.0, rel=1e-9)
        assert splitting.lambda_E == pytest.approx(1.0, rel=1e-9)
        assert splitting.invariance_residual < 1e-10

    def test_henon_product(self):
        """Test: sur le fer à cheval, F est exactement l'axe z."""
        fixed, pair = henon_cycles()
        K = np.array(fixed + pair)
        splitting = estimate_splitting(lookup('henon_x_expand').map, K, 1)

        assert np.max(np.abs(splitting.F_frames[:, :2, 0])) < 1e-10
        assert np.max(np.abs(splitting.E_frames[:, 2, :])) < 1e-10
        assert splitting.lambda_F == pytest.approx(20.0, rel=1e-9)

    def test_henon_saddle_eigenvector(self):
        """Test: F au point fixe = vecteur propre instable de la jacobienne."""
        entry = lookup('henon_saddle')
        point = entry.known_set
        assert point[0] == pytest.approx([0.6314, 0.1894], abs=1e-4)

        splitting = estimate_splitting(entry.map, point, 1)
        values, vectors = np.linalg.eig(entry.map.jacobian(point[0]))
        unstable = vectors[:, np.argmax(np.abs(values))].real
        unstable /= np.linalg.norm(unstable)
        assert abs(abs(splitting.F_frames[0, :, 0] @ unstable) - 1.0) < 1e-10

    def test_forward_and_backward_are_complementary(self):
        """Test: E de l'application et F de l'inverse engendrent le même plan."""
        entry = lookup('linear3')
        K = np.column_stack([np.zeros(3), np.linspace(-0.5, 0.5, 3), np.zeros(3)])
        forward = estimate_splitting(entry.map, K, 1)
        backward = estimate_splitting(entry.map.inverse_map(), K, 2)
        for E, F in zip(forward.E_frames, backward.F_frames):
            assert np.allclose(E @ E.T, F @ F.T, atol=1e-10)

    def test_no_domination(self):
        """Test: une isométrie n'a pas de décomposition dominée."""
        rotation = linear_map('rotation', [[0.0, -1.0], [1.0, 0.0]], [[-1.0, 1.0]] * 2)
        with pytest.raises(NoDominationError):
            estimate_splitting(rotation, np.zeros((1, 2)), 1)

    def test_orbit_escape(self):
        """Test: l'orbite passée d'un point hors de l'axe central quitte la boîte."""
        with pytest.raises(OrbitEscapeError):
            estimate_splitting(lookup('linear3').map, np.array([[0.5, 0.0, 0.0]]), 1)


class ContractionTest(SimpleTestCase):
    """Tests des certificats de contraction."""

    def setUp(self):
        """Initialisation des données de test."""
        self.linear3 = lookup('linear3').map
        self.segment = np.tile([0.0, 0.5, 0.0], (21, 1))

    def test_linear3_strong_cone(self):
        """Test: le cône d'ouverture 1 autour de z est contracté avec λ ≈ 3."""
        cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 1.0)
        certificate = check_contraction(self.linear3, cone, [self.segment], r=1.0, n0=10)
        assert certificate.passed
        assert certificate.measured_lambda >= 2.9
        assert certificate.measured_lambda == pytest.approx(3.0, rel=1e-4)
        assert certificate.to_dict()['segments'][0]['invariant']

    def test_center_cone_fails_forward(self):
        """Test: le cône autour de l'axe y n'est pas invariant par f."""
        cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [1.0], [0.0]]), 1.0)
        certificate = check_contraction(self.linear3, cone, [self.segment], n0=10)
        assert not certificate.passed

    def test_henon_product(self):
        """Test: segments de longueur 20 sur le fer à cheval, r = 2."""
        fixed, pair = henon_cycles()
        segments = [cycle_segment([point], 20) for point in fixed] + [cycle_segment(pair, 20)]
        cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 0.5)
        certificate = check_contraction(lookup('henon_x_expand').map, cone, segments, r=2.0, n0=10)
        assert certificate.passed
        assert len(certificate.segments) == 3

    def test_dual_contraction(self):
        """Test: le plan xy est contracté par l'inverse de linear3."""
        cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 1.0)
        certificate = check_dual_contraction(self.linear3, cone, [self.segment], n0=10)
        assert certificate.passed


class BunchingTest(SimpleTestCase):
    """Tests des certificats de pincement."""

    def test_cat_one_dimensional(self):
        """Test: en dimension 1 le cône central est pincé."""
        cat = lookup('cat_linear').map
        golden = (1.0 + np.sqrt(5.0)) / 2.0
        stable = np.array([[1.0], [-golden]]) / np.sqrt(1.0 + golden ** 2)
        cone = ConeField.build(np.zeros((1, 2)), stable, 0.5, periods=(1.0, 1.0))
        certificate = check_bunched(cat.inverse_map(), cone, [np.zeros((11, 2))], n0=5)
        assert certificate.passed

    def test_diagonal_bunched(self):
        """Test: diag(0.5, 0.9), cône autour de l'axe 0.9."""
        diagonal = linear_map('diag2', np.diag([0.5, 0.9]), [[-1.0, 1.0]] * 2)
        cone = ConeField.build(np.zeros((1, 2)), np.array([[0.0], [1.0]]), 0.5)
        certificate = check_bunched(diagonal, cone, [np.zeros((21, 2))], n0=10)
        assert certificate.passed
        assert certificate.measured_lambda > 1.5

    def test_diagonal_not_bunched(self):
        """Test: diag(0.5, 0.6, 1.5), l'écart 0.6/1.5 dans le cône bat 0.5."""
        diagonal = linear_map('diag3', np.diag([0.5, 0.6, 1.5]), [[-1.0, 1.0]] * 3)
        axes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        cone = ConeField.build(np.zeros((1, 3)), axes, 0.5)
        certificate = check_bunched(diagonal, cone, [np.zeros((21, 3))], n0=10)
        assert not certificate.passed
        assert certificate.measured_lambda < 1.0


class ThinnessTest(SimpleTestCase):
    """Tests de la finesse des cônes itérés."""

    def setUp(self):
        """Initialisation des données de test."""
        self.cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 1.0)
        self.x = np.array([0.0, 0.5, 0.0])

    def test_linear3_exact(self):
        """Test: finesse = 3^{-n}."""
        for n in (1, 5, 10, 20):
            thinness = cone_thinness(lookup('linear3').map, self.cone, self.x, n)
            assert thinness == pytest.approx(3.0 ** (-n), rel=1e-10)

    def test_zero_steps(self):
        """Test: n = 0 donne l'ouverture initiale."""
        assert cone_thinness(lookup('linear3').map, self.cone, self.x, 0) == pytest.approx(1.0)

    def test_slope_matches_lambda(self):
        """Test: log(finesse) affine en n, pente <= -log λ + 0.1."""
        ns = np.arange(2, 12)
        logs = [np.log(cone_thinness(lookup('linear3').map, self.cone, self.x, n)) for n in ns]
        slope = np.polyfit(ns, logs, 1)[0]
        assert slope <= -np.log(3.0) + 0.1

    def test_henon_product(self):
        """Test: finesse <= 1e-4 après 10 pas sur le fer à cheval."""
        fixed, _ = henon_cycles()
        cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 0.5)
        assert cone_thinness(lookup('henon_x_expand').map, cone, fixed[0], 10) <= 1e-4
