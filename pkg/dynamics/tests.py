"""
Tests pour l'app dynamics.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from .exceptions import MissingInverseError, NonFiniteError, PolynomialSyntaxError, SystemNotFoundError
from .maps import SmoothMap, evaluate, finite_difference_jacobian, jacobian_at, orbit
from .polynomial import parse_polynomial, polynomial_map
from .registry import (
    COUPLING, FIBER_RATE, HENON_A, HENON_B, builtin_registry, henon_fixed_point, henon_period_two, lookup, series_graph,
)
from .topology import NeighborIndex, minimal_image


class EvaluateTest(SimpleTestCase):
    """Tests de l'itération des applications."""

    def test_linear_action(self):
        """Test de l'action diagonale de linear3."""
        image = evaluate(lookup('linear3').map, np.array([1.0, 1.0, 1.0]), 1)
        np.testing.assert_allclose(image, [0.5, 1.0, 3.0])

    def test_zero_steps_is_identity(self):
        """Test du cas steps=0."""
        x = np.array([0.3, -0.2])
        np.testing.assert_array_equal(evaluate(lookup('curved2').map, x, 0), x)

    def test_curved2_substitution(self):
        """Test de substitution directe sur curved2."""
        image = evaluate(lookup('curved2').map, np.array([0.1, 0.0]), 1)
        np.testing.assert_allclose(image, [0.1, 0.01], atol=1e-15)

    def test_negative_steps_need_inverse(self):
        """Test de l'erreur MissingInverse."""
        smooth_map = SmoothMap(name='sans_inverse', dim=1, forward=lambda x: 2.0 * x)
        with pytest.raises(MissingInverseError):
            evaluate(smooth_map, np.array([1.0]), -1)

    def test_escape_raises_non_finite(self):
        """Test de l'erreur NonFinite quand l'orbite s'échappe."""
        with pytest.raises(NonFiniteError):
            evaluate(lookup('henon_x_expand').map, np.array([100.0, 0.0, 0.0]), 20)

    def test_wrapping_on_torus(self):
        """Test du repliement des coordonnées périodiques."""
        image = evaluate(lookup('cat_linear').map, np.array([0.25, 0.5]), 1)
        np.testing.assert_allclose(image, [0.0, 0.75], atol=1e-12)

    def test_orbit_backward(self):
        """Test d'un segment d'orbite passée."""
        points = orbit(lookup('linear3').map, np.array([0.0, 0.0, 0.9]), -2)
        np.testing.assert_allclose(points[:, 2], [0.9, 0.3, 0.1])


class JacobianTest(SimpleTestCase):
    """Tests des jacobiennes."""

    def test_linear3_jacobian(self):
        """Test de la jacobienne constante."""
        jac = jacobian_at(lookup('linear3').map, np.array([0.2, -0.4, 0.1]))
        np.testing.assert_allclose(jac, np.diag([0.5, 1.0, 3.0]))

    def test_curved2_jacobian_at_origin(self):
        """Test de la dérivation directe en 0."""
        np.testing.assert_allclose(jacobian_at(lookup('curved2').map, np.zeros(2)), [[1.0, 0.0], [0.0, 2.0]])

    def test_analytic_jacobians_match_finite_differences(self):
        """Test des jacobiennes analytiques contre les différences centrées."""
        rng = np.random.default_rng(3)
        for entry in builtin_registry():
            smooth_map = entry.map
            points = smooth_map.sample_box(rng, 100, shrink=0.5)
            analytic = jacobian_at(smooth_map, points)
            numeric = finite_difference_jacobian(smooth_map.forward, points)
            scale = np.maximum(1.0, np.linalg.norm(analytic, axis=(-2, -1)))
            error = np.linalg.norm(analytic - numeric, axis=(-2, -1)) / scale
            assert error.max() <= 1e-4, entry.name

    def test_inverse_map_jacobian(self):
        """Test de la jacobienne de l'inverse."""
        inverse = lookup('linear3').map.inverse_map()
        np.testing.assert_allclose(jacobian_at(inverse, np.zeros(3)), np.diag([2.0, 1.0, 1.0 / 3.0]))


class RegistryTest(SimpleTestCase):
    """Tests du registre des systèmes."""

    def test_names_unique(self):
        """Test de l'unicité des noms."""
        names = [entry.name for entry in builtin_registry()]
        assert len(names) == len(set(names))
        for required in ('linear3', 'curved2', 'saddle3', 'henon_x_expand', 'henon_x_expand_coupled',
                         'solenoid', 'cat_linear', 'henon_saddle'):
            assert required in names

    def test_known_answers(self):
        """Test des réponses analytiques enregistrées."""
        assert lookup('linear3').known_answers['center_manifold'] == 'y-axis'
        assert lookup('curved2').known_answers['h2'] == -2.0

    def test_missing_system(self):
        """Test d'un nom absent."""
        with pytest.raises(SystemNotFoundError):
            lookup('missing')

    def test_round_trip_inverses(self):
        """Test de f^{-1}∘f = id sur 10³ points de la région de travail."""
        rng = np.random.default_rng(11)
        for entry in builtin_registry():
            smooth_map = entry.map
            points = smooth_map.sample_box(rng, 1000, shrink=0.5)
            back = smooth_map.wrap(smooth_map.inverse(smooth_map.forward(points)))
            error = np.abs(minimal_image(back - smooth_map.wrap(points), smooth_map.periods))
            assert error.max() <= 1e-9, entry.name
            image = smooth_map.forward(points)
            again = smooth_map.forward(smooth_map.inverse(image))
            error = np.abs(minimal_image(again - image, smooth_map.periods))
            assert error.max() <= 1e-9, entry.name

    def test_henon_saddle_fixed_point(self):
        """Test du point fixe par la formule quadratique."""
        entry = lookup('henon_saddle')
        point = henon_fixed_point(1.4, 0.3)
        assert abs(point[0] - 0.6314) < 1e-4
        np.testing.assert_allclose(entry.map.forward(point), point, atol=1e-14)

    def test_solenoid_samples_on_attractor(self):
        """Test des échantillons de l'attracteur du solénoïde."""
        samples = lookup('solenoid').known_set
        radius = np.hypot(samples[:, 1], samples[:, 2])
        assert np.all(radius <= 0.4 / 0.75 + 1e-12)
        assert np.all(radius >= 0.4 - 0.4 / 3.0 - 1e-12)


class PolynomialTest(SimpleTestCase):
    """Tests des applications polynomiales de la configuration."""

    def test_parse_and_evaluate(self):
        """Test de lecture d'une définition polynomiale."""
        smooth_map = polynomial_map(
            'user', {'f0': '1:1:0; 1:1:1', 'f1': '2:0:1; 1:2:0'}, 2, [-0.5, 0.5, -0.5, 0.5],
        )
        np.testing.assert_allclose(smooth_map.forward(np.array([0.1, 0.0])), [0.1, 0.01])
        x = np.array([0.2, -0.1])
        np.testing.assert_allclose(jacobian_at(smooth_map, x), [[0.9, 0.2], [0.4, 2.0]])

    def test_bad_term(self):
        """Test d'un terme mal formé."""
        with pytest.raises(PolynomialSyntaxError):
            parse_polynomial('1:2', 2)

    def test_missing_component(self):
        """Test d'une composante manquante."""
        with pytest.raises(PolynomialSyntaxError):
            polynomial_map('user', {'f0': '1:1:0'}, 2, [0, 1, 0, 1])


class NeighborIndexTest(SimpleTestCase):
    """Tests de l'index de voisinage périodique."""

    def test_periodic_neighbor(self):
        """Test d'un voisin à travers le bord du tore."""
        index = NeighborIndex(np.array([[0.99, 0.5], [0.5, 0.5]]), periods=(1.0, None))
        dist, idx = index.query(np.array([0.01, 0.5]))
        assert idx == 0
        assert abs(dist - 0.02) < 1e-12


class HenonProductTest(SimpleTestCase):
    """Tests des produits Hénon × droite et de leur graphe invariant en série."""

    def test_fiber_rate(self):
        """Test: la troisième coordonnée est dilatée par FIBER_RATE, plus que le fer à cheval."""
        plain = lookup('henon_x_expand').map.forward(np.array([0.0, 0.0, 1.0]))
        coupled = lookup('henon_x_expand_coupled').map.forward(np.array([0.5, 0.0, 1.0]))
        assert plain[2] == FIBER_RATE
        assert coupled[2] == pytest.approx(FIBER_RATE + COUPLING * 0.25)
        cycle = henon_period_two(HENON_A, HENON_B)
        assert FIBER_RATE > 2.0 * HENON_A * np.max(np.abs(cycle[:, 0]))

    def test_period_two_orbit(self):
        """Test: H échange les deux points de l'orbite de période 2."""
        cycle = henon_period_two(HENON_A, HENON_B)
        smooth_map = lookup('henon_horseshoe2').map
        np.testing.assert_allclose(smooth_map.forward(cycle), cycle[::-1], atol=1e-14)

    def test_series_at_fixed_point(self):
        """Test: au point fixe, ψ = −c x²/(rate − 1)."""
        point = henon_fixed_point(HENON_A, HENON_B)
        values, tails = series_graph(point)
        expected = -COUPLING * point[0] ** 2 / (FIBER_RATE - 1.0)
        assert values[0] == pytest.approx(expected, rel=1e-12)
        assert tails[0] <= 1e-30

    def test_series_is_invariant(self):
        """Test: ψ(H(p)) = rate·ψ(p) + c x² sur l'orbite de période 2."""
        cycle = henon_period_two(HENON_A, HENON_B)
        values, _ = series_graph(cycle)
        np.testing.assert_allclose(values[::-1], FIBER_RATE * values + COUPLING * cycle[:, 0] ** 2,
                                   rtol=0.0, atol=1e-14)

    def test_series_graph_is_invariant_for_coupled_map(self):
        """Test: f envoie le point (p, ψ(p)) sur (H(p), ψ(H(p)))."""
        cycle = henon_period_two(HENON_A, HENON_B)
        values, _ = series_graph(cycle)
        lifted = np.column_stack([cycle, values])
        image = lookup('henon_x_expand_coupled').map.forward(lifted)
        np.testing.assert_allclose(image, lifted[::-1], rtol=0.0, atol=1e-14)
        assert np.all(values < 0.0)

    def test_escaping_point_truncated(self):
        """Test: un point hors de [−2, 2]² n'ajoute aucun terme, reste majoré au premier rang."""
        values, tails = series_graph(np.array([[3.0, 0.0]]))
        assert values[0] == 0.0
        assert tails[0] == pytest.approx(4.0 * COUPLING / (FIBER_RATE - 1.0))
