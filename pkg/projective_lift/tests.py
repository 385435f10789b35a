"""
Tests pour l'app projective_lift.
"""

from functools import lru_cache
from unittest.mock import patch

import numpy as np
import pytest
from django.test import SimpleTestCase

from cones.certificates import BunchingCertificate
from cones.splitting import estimate_splitting
from dynamics.exceptions import MissingInverseError
from dynamics.maps import SmoothMap
from dynamics.registry import linear_map, lookup
from invariant_set.periodic import periodic_samples, seed_grid
from strong_manifolds.exceptions import DimensionUnsupportedError, SplittingMissingError

from .exceptions import BunchingFailureError
from .foliation import check_stable_bunching, foliate, polyline_distance
from .lift import angle_gap, angle_of, direction, lift_derivative_bound, lift_map, lift_set

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def diagonal_saddle():
    return linear_map('saddle2', np.diag([0.5, 2.0]), [[-1.0, 1.0], [-1.0, 1.0]])


@lru_cache(maxsize=None)
def cat_chart():
    return foliate(lookup('cat_linear').map, np.zeros((1, 2)), surface_radius=0.1)


@lru_cache(maxsize=None)
def saddle_chart():
    return foliate(diagonal_saddle(), np.zeros((1, 2)), surface_radius=0.1,
                   seeds=np.array([[0.0, 0.0], [0.0, 0.01], [0.0, -0.01]]))


class AngleTest(SimpleTestCase):
    """Tests du codage des droites par un angle."""

    def test_opposite_vectors_same_line(self):
        """Test: v et −v ont le même angle dans [0, π)."""
        v = np.array([[1.0, -2.0], [-1.0, 2.0]])
        angles = angle_of(v)
        assert angles[0] == pytest.approx(angles[1], abs=1e-15)
        assert 0.0 <= angles[0] < np.pi

    def test_gap_across_branch(self):
        """Test: 0.01 et π − 0.01 sont à 0.02 l'un de l'autre."""
        assert angle_gap(0.01, np.pi - 0.01) == pytest.approx(0.02, abs=1e-12)

    def test_direction_is_unit(self):
        assert np.allclose(np.linalg.norm(direction(np.linspace(0.0, 3.0, 7)), axis=1), 1.0)


class LiftMapTest(SimpleTestCase):
    """Tests du relèvement projectif."""

    def setUp(self):
        """Initialisation des données de test."""
        self.cat = lookup('cat_linear')
        self.lifted_cat = lift_map(self.cat.map)

    def test_equivariance_exact(self):
        """Test: p∘f̂ = f∘p exactement sur l'échantillon d'auto-test."""
        assert self.lifted_cat.equivariance_defect == 0.0
        assert self.lifted_cat.map.dim == 3
        assert self.lifted_cat.map.periods == (1.0, 1.0, np.pi)

    def test_cat_unstable_direction_fixed(self):
        """Test: l'angle de la direction instable du chat est fixe, en tout point."""
        phi_u = self.cat.known_answers['unstable_angle']
        image = self.lifted_cat.angle_image(np.array([[0.3, 0.7], [0.0, 0.0]]), phi_u)
        assert np.max(np.abs(angle_gap(image, phi_u))) <= 1e-12

    def test_cat_slope_action(self):
        """Test: pente t ↦ (1 + t)/(2 + t); l'horizontale va sur la pente 1/2."""
        image = self.lifted_cat.angle_image(np.zeros((1, 2)), 0.0)
        assert image[0] == pytest.approx(np.arctan(0.5), abs=1e-14)

    def test_rotation_quarter_turn(self):
        """Test: rotation de 90°, φ ↦ φ + π/2 mod π."""
        rotation = linear_map('rot90', [[0.0, -1.0], [1.0, 0.0]], [[-1.0, 1.0], [-1.0, 1.0]])
        lifted = lift_map(rotation)
        phi = np.linspace(0.0, np.pi, 7, endpoint=False)
        x = np.zeros((7, 2))
        image = lifted.angle_image(x, phi)
        assert np.max(np.abs(angle_gap(image, phi + 0.5 * np.pi))) <= 1e-12

    def test_henon_saddle_fixed_lifted_point(self):
        """Test: (x*, φ_u) est fixe, φ_u donné par le vecteur propre instable."""
        entry = lookup('henon_saddle')
        fixed = entry.known_set[0]
        values, vectors = np.linalg.eig(entry.map.jacobian(fixed))
        unstable = vectors[:, np.argmax(np.abs(values))].real
        phi_u = angle_of(unstable)

        lifted = lift_map(entry.map)
        image = lifted.map.wrap(lifted.map.forward(lifted.lift(fixed, phi_u)))
        assert np.allclose(image[0, :2], fixed, atol=1e-12)
        assert abs(angle_gap(image[0, 2], phi_u)) <= 1e-10

    def test_fiber_contraction_at_unstable_lift(self):
        """Test: dérivée dans la fibre = λ_s/λ_u au relevé instable du point fixe."""
        entry = lookup('henon_saddle')
        fixed = entry.known_set[0]
        values, vectors = np.linalg.eig(entry.map.jacobian(fixed))
        order = np.argsort(np.abs(values))
        unstable = vectors[:, order[1]].real

        lifted = lift_map(entry.map)
        jac = lifted.map.jacobian(lifted.lift(fixed, angle_of(unstable)))[0]
        assert abs(jac[2, 2]) == pytest.approx(abs(values[order[0]] / values[order[1]]), rel=1e-9)
        assert np.allclose(jac[:2, 2], 0.0)

    def test_inverse_round_trip(self):
        """Test: f̂⁻¹∘f̂ = id, angles comparés modulo π."""
        smooth_map = lookup('henon_saddle').map
        lifted = lift_map(smooth_map)
        rng = np.random.default_rng(3)
        points = lifted.lift(smooth_map.sample_box(rng, 50, shrink=0.5), rng.uniform(0.0, np.pi, 50))
        back = lifted.map.inverse(lifted.map.forward(points))
        assert np.allclose(back[:, :2], points[:, :2], atol=1e-12)
        assert np.max(np.abs(angle_gap(back[:, 2], points[:, 2]))) <= 1e-10

    def test_dimension_unsupported(self):
        """Test: une application de dimension 3 est refusée."""
        with pytest.raises(DimensionUnsupportedError):
            lift_map(lookup('linear3').map)

    def test_missing_inverse(self):
        """Test: une application sans inverse est refusée."""
        with pytest.raises(MissingInverseError):
            lift_map(SmoothMap(name='identity', dim=2, forward=lambda p: p))


class LiftSetTest(SimpleTestCase):
    """Tests du relevé de K."""

    def setUp(self):
        """Initialisation des données de test."""
        self.cat = lookup('cat_linear')
        self.K = np.zeros((1, 2))
        self.split = estimate_splitting(self.cat.map, self.K, 1)

    def test_cat_unstable_angle(self):
        """Test: angle instable = atan(φ − 1)."""
        lifted = lift_set(self.cat.map, self.K, self.split, 'unstable')
        assert abs(angle_gap(lifted.angles[0], self.cat.known_answers['unstable_angle'])) <= 1e-10

    def test_cat_stable_angle(self):
        """Test: angle stable = atan(−φ) mod π."""
        lifted = lift_set(self.cat.map, self.K, self.split, 'stable')
        assert abs(angle_gap(lifted.angles[0], self.cat.known_answers['stable_angle'])) <= 1e-10
        assert lifted.points.shape == (1, 3)

    def test_cat_lift_invariant(self):
        lifted = lift_set(self.cat.map, self.K, self.split, 'unstable')
        assert lifted.invariance_residual(lift_map(self.cat.map)) <= 1e-12

    def test_missing_splitting(self):
        """Test: pas de décomposition, pas de relevé."""
        with pytest.raises(SplittingMissingError):
            lift_set(self.cat.map, self.K, None)

    def test_point_without_frame(self):
        """Test: un point de K loin des points de la décomposition est refusé."""
        with pytest.raises(SplittingMissingError):
            lift_set(self.cat.map, np.array([[0.3, 0.3]]), self.split)

    def test_horseshoe_lift_invariant(self):
        """Test: sur les orbites périodiques du fer à cheval, f̂ préserve le relevé instable."""
        smooth_map = lookup('henon_horseshoe2').map
        points = periodic_samples(smooth_map, 3, seed_grid([[-1.0, 1.0], [-0.5, 0.5]], 9))
        split = estimate_splitting(smooth_map, points, 1)
        lifted = lift_set(smooth_map, points, split, 'unstable')
        assert len(lifted) == len(points)
        assert lifted.invariance_residual(lift_map(smooth_map)) <= 1e-8


class DerivativeBoundTest(SimpleTestCase):
    """Tests de la borne des dérivées secondes."""

    def test_linear_map(self):
        """Test: application linéaire, dérivées secondes nulles au bruit près."""
        bound = lift_derivative_bound(lookup('cat_linear').map, np.zeros((1, 2)), 0.1)
        assert bound <= 1e-6

    def test_henon(self):
        """Test: Hénon, |∂²f/∂x²| = 2a."""
        entry = lookup('henon_saddle')
        bound = lift_derivative_bound(entry.map, entry.known_set, 0.05)
        assert bound == pytest.approx(2.0 * entry.known_answers['henon'][0], rel=1e-5)


class BunchingTest(SimpleTestCase):
    """Tests du pincement pour f⁻¹."""

    def test_cat_bunched(self):
        cat = lookup('cat_linear').map
        K = np.zeros((1, 2))
        certificate = check_stable_bunching(cat, K, estimate_splitting(cat, K, 1))
        assert certificate.passed

    def test_failure_stops_foliation(self):
        """Test: un cône non pincé interdit la construction."""
        failed = BunchingCertificate(passed=False, measured_lambda=0.9, n0=5)
        with patch('projective_lift.foliation.check_bunched', return_value=failed):
            with pytest.raises(BunchingFailureError):
                foliate(lookup('cat_linear').map, np.zeros((1, 2)))

    def test_surface_maps_only(self):
        with pytest.raises(DimensionUnsupportedError):
            foliate(lookup('linear3').map, np.zeros((1, 3)))


class CatFoliationTest(SimpleTestCase):
    """Tests du feuilletage stable du chat linéaire."""

    def setUp(self):
        """Initialisation des données de test."""
        self.chart = cat_chart()
        self.stable = lookup('cat_linear').known_answers['stable_angle']

    def test_line_field_constant(self):
        """Test: champ de droites = direction propre stable à 1e-8 près."""
        assert len(self.chart.field_points) > 1
        assert np.max(np.abs(angle_gap(self.chart.field_angles, self.stable))) <= 1e-8

    def test_line_field_off_nodes(self):
        angles, ok = self.chart.line_field(np.array([[0.01, -0.005], [0.99, 0.002]]))
        assert ok.all()
        assert np.max(np.abs(angle_gap(angles, self.stable))) <= 1e-8

    def test_leaf_is_straight(self):
        """Test: la feuille en 0 est la droite stable."""
        leaf = self.chart.leaves[0]
        assert len(leaf) >= 3
        u = direction(self.stable)
        cross = leaf[:, 0] * u[1] - leaf[:, 1] * u[0]
        assert np.max(np.abs(cross)) <= 1e-8

    def test_diagnostics(self):
        """Test: fibre projective fortement dilatée, invariance et holonomie exactes."""
        diagnostics = self.chart.diagnostics
        assert diagnostics['fiber_rate'] > diagnostics['base_rate']
        assert diagnostics['fiber_alignment'] <= 1e-8
        assert diagnostics['line_field_invariance']['passed']
        assert diagnostics['holonomy_residual'] <= 1e-8
        assert diagnostics['stable_leaf_distance'] <= 1e-6

    def test_rows(self):
        assert len(self.chart.field_rows()[0]) == 3
        assert len(self.chart.leaf_rows()) == sum(len(leaf) for leaf in self.chart.leaves)


class SaddleFoliationTest(SimpleTestCase):
    """Tests du feuilletage de diag(0.5, 2): droites horizontales."""

    def setUp(self):
        """Initialisation des données de test."""
        self.chart = saddle_chart()

    def test_horizontal_line_field(self):
        """Test: angle 0 modulo π, à travers la coupure."""
        assert np.max(np.abs(angle_gap(self.chart.field_angles, 0.0))) <= 1e-8

    def test_horizontal_leaves(self):
        """Test: chaque feuille reste à l'ordonnée de son point de départ."""
        for seed, leaf in zip(self.chart.seeds, self.chart.leaves):
            assert len(leaf) >= 3
            assert np.max(np.abs(leaf[:, 1] - seed[1])) <= 1e-8

    def test_polyline_distance(self):
        leaf = self.chart.leaves[0]
        distances = polyline_distance(np.array([[0.0, 0.003]]), leaf, (None, None))
        assert distances[0] == pytest.approx(0.003, abs=1e-8)


@pytest.mark.slow
class HenonSaddleFoliationTest(SimpleTestCase):
    """Tests du feuilletage stable près du point fixe de l'Hénon selle."""

    def setUp(self):
        """Initialisation des données de test."""
        self.entry = lookup('henon_saddle')
        self.chart = foliate(self.entry.map, self.entry.known_set, surface_radius=0.05)

    def test_tangent_to_stable_direction(self):
        """Test: le champ au point fixe est la direction propre stable."""
        fixed = self.entry.known_set[0]
        values, vectors = np.linalg.eig(self.entry.map.jacobian(fixed))
        stable = angle_of(vectors[:, np.argmin(np.abs(values))].real)
        angles, ok = self.chart.line_field(self.entry.known_set)
        assert ok[0]
        assert abs(angle_gap(angles[0], stable)) <= 1e-6

    def test_locally_invariant(self):
        """Test: f(feuille) ∩ U sur la feuille de f(x) à 1e-4 près."""
        assert self.chart.diagnostics['holonomy_residual'] <= 1e-4
        assert self.chart.diagnostics['line_field_invariance']['passed']
