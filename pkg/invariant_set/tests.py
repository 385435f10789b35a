"""
Tests pour l'app invariant_set.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from dynamics.registry import henon_fixed_point, lookup

from .boxes import cover_is_invariant, maximal_invariant
from .exceptions import EmptyResultError, TooFewPointsError
from .periodic import find_periodic, periodic_samples, seed_grid
from .sets import SampledInvariantSet
from .tangent import estimate_tangent_set


class MaximalInvariantTest(SimpleTestCase):
    """Tests de l'algorithme de subdivision."""

    def test_linear3_concentrates_on_center_axis(self):
        """Test: linear3 dans [−1,1]³, h=1/64: boîtes autour de l'axe y."""
        h = 1.0 / 64.0
        entry = lookup('linear3')
        result = maximal_invariant(entry.map, entry.map.box, h)

        assert len(result) > 0
        assert np.max(np.abs(result.points[:, 0])) <= 4 * h
        assert np.max(np.abs(result.points[:, 2])) <= 4 * h
        assert result.invariance_residual <= 2 * h
        assert cover_is_invariant(entry.map, result)

    def test_refinement_is_monotone(self):
        """Test: diviser h par 2 n'agrandit pas l'union."""
        entry = lookup('linear3')
        coarse = maximal_invariant(entry.map, entry.map.box, 1.0 / 16.0)
        fine = maximal_invariant(entry.map, entry.map.box, 1.0 / 32.0)
        assert np.all(coarse.box_cover.contains(fine.points))

    def test_cat_keeps_whole_torus(self):
        """Test: automorphisme du tore, toutes les boîtes survivent."""
        cat = lookup('cat_linear').map
        result = maximal_invariant(cat, cat.box, 1.0 / 16.0)
        assert len(result) == 256

    def test_henon_product_contains_periodic_points(self):
        """Test: le fer à cheval est dans z ≈ 0 et contient les orbites périodiques."""
        h = 1.0 / 32.0
        smooth_map = lookup('henon_x_expand').map
        result = maximal_invariant(smooth_map, smooth_map.box, h)

        assert len(result) > 0
        assert np.max(np.abs(result.points[:, 2])) <= 2 * h
        seeds = np.column_stack([seed_grid([[-1.0, 1.0], [-0.5, 0.5]], 7), np.zeros(49)])
        for period in (1, 2, 3):
            for found in find_periodic(smooth_map, period, seeds):
                assert np.all(result.box_cover.contains(found.points))

    @pytest.mark.slow
    def test_henon_product_fine_resolution(self):
        """Test à h = 1/128 (lent)."""
        h = 1.0 / 128.0
        smooth_map = lookup('henon_x_expand').map
        result = maximal_invariant(smooth_map, smooth_map.box, h, workers=2)
        assert len(result) > 0
        assert np.max(np.abs(result.points[:, 2])) <= 2 * h

    def test_empty_result(self):
        """Test: une translation n'a pas d'ensemble invariant borné."""
        from dynamics.maps import SmoothMap
        shift = SmoothMap(
            name='shift', dim=1,
            forward=lambda p: p + 1.0, inverse=lambda p: p - 1.0,
            jacobian=lambda p: np.ones(np.shape(p)[:-1] + (1, 1)),
            box=[[0.0, 1.0]],
        )
        with pytest.raises(EmptyResultError):
            maximal_invariant(shift, shift.box, 1.0 / 8.0)


class PeriodicTest(SimpleTestCase):
    """Tests de la recherche d'orbites périodiques."""

    def test_linear3_origin(self):
        """Test: linear3, p=1, graines dans le plan y=0 -> {0}."""
        seeds = seed_grid([[-0.5, 0.5], [0.0, 0.0], [-0.5, 0.5]], 5)
        orbits = find_periodic(lookup('linear3').map, 1, seeds)
        assert len(orbits) == 1
        assert np.allclose(orbits[0].points, 0.0, atol=1e-12)
        assert not orbits[0].hyperbolic

    def test_henon_saddle_fixed_points(self):
        """Test: deux points fixes, le droit donné par la formule quadratique."""
        seeds = seed_grid([[-2.0, 2.0], [-2.0, 2.0]], 9)
        orbits = find_periodic(lookup('henon_saddle').map, 1, seeds)
        assert len(orbits) == 2
        right = henon_fixed_point(1.4, 0.3)
        assert np.allclose(orbits[1].points[0], right, atol=1e-10)
        assert orbits[1].hyperbolic and orbits[1].unstable_dim == 1

    def test_curved2_has_only_origin(self):
        """Test: aucune orbite de période 2 autre que 0 dans [−0.5, 0.5]²."""
        seeds = seed_grid([[-0.5, 0.5], [-0.5, 0.5]], 11)
        orbits = find_periodic(lookup('curved2').map, 2, seeds)
        inside = [o for o in orbits if np.all(np.abs(o.points) <= 0.5)]
        assert len(inside) >= 1
        for found in inside:
            assert np.max(np.linalg.norm(found.points, axis=1)) <= 1e-3

    def test_period_two_orbit(self):
        """Test: orbite de période 2 du fer à cheval, de période minimale 2."""
        seeds = seed_grid([[-1.0, 1.0], [-0.5, 0.5]], 9)
        orbits = find_periodic(lookup('henon_horseshoe2').map, 2, seeds)
        minimal = [o for o in orbits if o.minimal_period == 2]
        assert len(minimal) >= 1
        assert minimal[0].points.shape == (2, 2)
        assert minimal[0].to_dict()['period'] == 2

    def test_samples(self):
        """Test: échantillon du fer à cheval par orbites périodiques."""
        seeds = seed_grid([[-1.0, 1.0], [-0.5, 0.5]], 9)
        points = periodic_samples(lookup('henon_horseshoe2').map, 3, seeds)
        assert len(points) >= 4
        assert np.all(np.abs(points) <= 2.0)


class SampledInvariantSetTest(SimpleTestCase):
    """Tests de l'ensemble invariant échantillonné."""

    def test_residual_of_fixed_line(self):
        """Test: des points de l'axe y sont exactement invariants."""
        points = np.column_stack([np.zeros(5), np.linspace(-0.5, 0.5, 5), np.zeros(5)])
        sampled = SampledInvariantSet.from_points(lookup('linear3').map, points)
        assert sampled.invariance_residual == pytest.approx(0.0, abs=1e-15)
        assert sampled.to_dict()['points'] == 5


class TangentSetTest(SimpleTestCase):
    """Tests de l'estimation de l'ensemble tangent."""

    def test_parabola_tangent(self):
        """Test: parabole (t, t²) en 0 -> directions proches de ±e1."""
        t = np.linspace(-0.1, 0.1, 201)
        K = np.column_stack([t, t ** 2])
        estimate = estimate_tangent_set(K, np.zeros(2), [0.01, 0.02, 0.05])
        assert len(estimate.directions) > 0
        assert estimate.max_angle_to(np.array([[1.0], [0.0]])) <= np.deg2rad(5.0)
        assert np.allclose(np.linalg.norm(estimate.directions, axis=1), 1.0)

    def test_symmetric(self):
        """Test: l'estimation est fermée par v -> −v."""
        t = np.linspace(-0.1, 0.1, 41)
        estimate = estimate_tangent_set(np.column_stack([t, t ** 2]), np.zeros(2), [0.02, 0.04])
        forward = {tuple(np.round(v, 9)) for v in estimate.directions}
        backward = {tuple(np.round(-v, 9)) for v in estimate.directions}
        assert forward == backward

    def test_single_point(self):
        """Test: K = {0} -> TooFewPointsError."""
        with pytest.raises(TooFewPointsError):
            estimate_tangent_set(np.zeros((1, 2)), np.zeros(2), [0.1, 0.2])

    def test_horseshoe_in_center_plane(self):
        """Test: directions du fer à cheval × {0} dans le cône de E^c = plan xy."""
        seeds = seed_grid([[-1.0, 1.0], [-0.5, 0.5]], 9)
        planar = periodic_samples(lookup('henon_horseshoe2').map, 4, seeds)
        K = np.column_stack([planar, np.zeros(len(planar))])
        estimate = estimate_tangent_set(K, K[0], [1.0, 2.0])
        xy = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert estimate.max_angle_to(xy) <= np.arctan(0.2)
        assert estimate.max_angle_to(xy) <= np.deg2rad(5.0)
