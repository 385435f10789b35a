"""
Tests pour l'app smoothing.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from .dyadic import adjacency_level_gap, build_cover
from .exceptions import BadRadiiError, LevelOverflowError, SetsIntersectError
from .separators import build_separator, bump_from_distance, smoothstep


class DyadicCoverTest(SimpleTestCase):
    """Tests du recouvrement dyadique."""

    def setUp(self):
        """Initialisation des données de test."""
        self.box = np.array([[-2.0, 2.0]])
        self.cover = build_cover(np.zeros((1, 1)), self.box, 6)

    def test_levels_grow_linearly_toward_point(self):
        """Test de l'accumulation dyadique vers 0."""
        for j in range(4):
            for sign in (-1.0, 1.0):
                x = np.array([sign * 1.3 * 2.0 ** (-j)])
                found = self.cover.containing(x, strict=True)
                assert len(found) == 1
                assert self.cover.levels[found[0]] == j + 3

    def test_tripled_cubes_avoid_point(self):
        """Test de la règle de sélection: Ĉ disjoint de K."""
        centers, sides = self.cover.centers, self.cover.sides
        assert np.all(np.abs(centers[:, 0]) > 1.5 * sides)

    def test_cover_property(self):
        """Test: chaque point hors collier est dans exactement un cube."""
        rng = np.random.default_rng(0)
        finest = 4.0 * 2.0 ** (-6)
        for x in rng.uniform(-2.0, 2.0, size=(500, 1)):
            interior = self.cover.containing(x, strict=True)
            closed = self.cover.containing(x)
            assert len(interior) <= 1
            if len(closed) == 0:
                assert abs(x[0]) <= 2.0 * finest

    def test_whole_box_gives_empty_cover(self):
        """Test: K dense dans la boîte -> recouvrement vide."""
        K = np.linspace(0.0, 1.0, 1001)[:, None]
        assert len(build_cover(K, np.array([[0.0, 1.0]]), 6)) == 0

    def test_symmetric_cover(self):
        """Test de la symétrie x -> -x."""
        K = np.array([[-1.0, 0.0], [1.0, 0.0]])
        cover = build_cover(K, np.array([[-2.0, 2.0], [-2.0, 2.0]]), 5)
        items = {(int(k), tuple(c)) for k, c in zip(cover.levels, cover.centers)}
        mirrored = {(k, (-c[0], c[1])) for k, c in items}
        assert items == mirrored

    def test_adjacent_levels(self):
        """Test de l'écart de niveau entre cubes adjacents."""
        K = np.array([[-1.0, 0.0], [1.0, 0.0]])
        cover = build_cover(K, np.array([[-2.0, 2.0], [-2.0, 2.0]]), 5)
        assert adjacency_level_gap(cover) <= 1
        assert adjacency_level_gap(self.cover) <= 1

    def test_level_overflow(self):
        """Test de l'erreur LevelOverflow."""
        with pytest.raises(LevelOverflowError):
            build_cover(np.zeros((1, 1)), self.box, 41)


class SeparatorTest(SimpleTestCase):
    """Tests des fonctions de séparation."""

    def test_defining_property(self):
        """Test: φ(K) = 0, φ(L) = 1, valeurs intermédiaires ailleurs."""
        separator = build_separator(np.array([[0.0]]), np.array([[-1.0], [1.0]]),
                                    np.array([[-1.5, 1.5]]), sample_size=20000)
        values = separator(np.array([[0.0], [-1.0], [1.0], [0.5], [-0.5]]))
        assert values[0] == 0.0
        assert values[1] == 1.0 and values[2] == 1.0
        assert 0.0 < values[3] < 1.0 and 0.0 < values[4] < 1.0

    def test_gradient_bound(self):
        """Test de la borne C_impl/d(K, L) sur un échantillon dense."""
        separator = build_separator(np.array([[-2.0]]), np.array([[2.0]]), np.array([[-3.0, 3.0]]))
        x = np.linspace(-3.0, 3.0, 100001)[:, None]
        grad = np.abs(separator.grad(x)[:, 0])
        assert grad.max() * 4.0 <= separator.constant
        assert separator.derivative_bound == pytest.approx(separator.constant / 4.0)
        values = separator(x)
        assert values.min() >= 0.0 and values.max() <= 1.0
        assert separator(np.array([[-2.0]]))[0] == 0.0
        assert separator(np.array([[2.0]]))[0] == 1.0

    def test_intersecting_sets(self):
        """Test de l'erreur SetsIntersect."""
        with pytest.raises(SetsIntersectError):
            build_separator(np.zeros((1, 1)), np.zeros((1, 1)), np.array([[-1.0, 1.0]]))


class BumpTest(SimpleTestCase):
    """Tests de la bosse fonction de la distance."""

    def setUp(self):
        """Initialisation des données de test."""
        self.bump = bump_from_distance(np.zeros((1, 1)), 0.5, 1.0)

    def test_inside_and_outside(self):
        """Test des valeurs 1 et 0."""
        assert self.bump(np.array([[0.25]]))[0] == 1.0
        assert self.bump(np.array([[-0.25]]))[0] == 1.0
        assert self.bump(np.array([[2.0]]))[0] == 0.0

    def test_derivative_bound(self):
        """Test: sup |d/dx| <= 4/(outer - inner) = 8."""
        x = np.linspace(-1.5, 1.5, 300001)[:, None]
        slope = np.abs(self.bump.grad(x)[:, 0])
        assert slope.max() <= 8.0 * (1.0 + 1e-6)
        assert self.bump.derivative_bound == 8.0
        numeric = np.abs(np.diff(self.bump(x))) / np.diff(x[:, 0])
        assert numeric.max() <= 8.0

    def test_monotone_in_distance(self):
        """Test de la monotonie en d(·, K)."""
        values = self.bump(np.linspace(0.0, 1.5, 1001)[:, None])
        assert np.all(np.diff(values) <= 0.0)

    def test_bad_radii(self):
        """Test de l'erreur BadRadii."""
        with pytest.raises(BadRadiiError):
            bump_from_distance(np.zeros((1, 1)), 1.0, 0.5)

    def test_smoothstep_endpoints(self):
        """Test des valeurs extrêmes du smoothstep."""
        np.testing.assert_allclose(smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])), [0, 0, 0.5, 1, 1])
