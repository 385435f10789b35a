"""
Tests pour l'app strong_manifolds.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from cones.fields import ConeField
from cones.splitting import estimate_splitting
from dynamics.maps import evaluate
from dynamics.registry import linear_map, lookup, solenoid_attractor_samples
from cones.tests import henon_cycles

from .connections import check_pair_criterion, detect_connection, expansion_pair_test
from .exceptions import SplittingMissingError
from .leaves import grow_unstable_leaf, hausdorff_inside, seeding_depth


def solenoid_point(theta):
    """Image f^30 du point (θ, 0, 0): un point de l'attracteur."""
    smooth_map = lookup('solenoid').map
    return evaluate(smooth_map, np.array([theta, 0.0, 0.0]), 30)


class LeafGrowthTest(SimpleTestCase):
    """Tests de la croissance des feuilles fortes."""

    def setUp(self):
        """Initialisation des données de test."""
        self.linear3 = lookup('linear3').map
        self.split = estimate_splitting(self.linear3, np.zeros((1, 3)), 1)

    def test_linear3_segment(self):
        """Test: en 0, la feuille est le segment {(0, 0, t): |t| <= 0.5}."""
        leaf = grow_unstable_leaf(self.linear3, self.split, np.zeros(3), 0.5)
        assert np.max(np.abs(leaf.points[:, :2])) < 1e-12
        assert np.allclose(np.abs(leaf.points[:, 2]), np.abs(leaf.params[:, 0]), atol=1e-12)
        assert leaf.radius == pytest.approx(0.5)
        assert not leaf.shrunk

    def test_rate_certificate(self):
        """Test: contraction passée μ = 3 > λ_E = 1."""
        leaf = grow_unstable_leaf(self.linear3, self.split, np.zeros(3), 0.5)
        assert leaf.mu == pytest.approx(3.0, rel=1e-9)
        assert leaf.rate_certified

    def test_seeding_depth(self):
        """Test: (λ_E/λ_F)^N <= 1e-8, plafond à 60."""
        depth, capped = seeding_depth(1.0, 3.0)
        assert depth == 17 and not capped
        assert (1.0 / 3.0) ** depth <= 1e-8
        assert seeding_depth(1.0, 1.1)[0] == 60

    def test_doubling_radius_is_consistent(self):
        """Test: la feuille de rayon ρ est dans celle de rayon 2ρ."""
        for name in ('linear3', 'curved2'):
            smooth_map = lookup(name).map
            origin = np.zeros((1, smooth_map.dim))
            split = estimate_splitting(smooth_map, origin, 1)
            small = grow_unstable_leaf(smooth_map, split, origin[0], 0.2)
            large = grow_unstable_leaf(smooth_map, split, origin[0], 0.4)
            assert hausdorff_inside(small, large) <= 1e-6 * 0.2

    def test_henon_product_vertical(self):
        """Test: au fer à cheval, feuille verticale {(p_x, p_y, t)}."""
        fixed, pair = henon_cycles()
        smooth_map = lookup('henon_x_expand').map
        split = estimate_splitting(smooth_map, np.array(fixed + pair), 1)
        leaf = grow_unstable_leaf(smooth_map, split, fixed[0], 0.2)
        assert np.allclose(leaf.points[:, :2], fixed[0][:2], atol=1e-12)
        assert leaf.points[:, 2].min() == pytest.approx(-0.2, abs=1e-9)
        assert leaf.points[:, 2].max() == pytest.approx(0.2, abs=1e-9)

    def test_solenoid_tangent(self):
        """Test: tangente de la feuille à moins de 2° du F estimé."""
        smooth_map = lookup('solenoid').map
        K = solenoid_attractor_samples(count=200)
        split = estimate_splitting(smooth_map, K, 1)
        leaf = grow_unstable_leaf(smooth_map, split, K[0], 0.3)
        cosine = abs(float(leaf.tangent_at_base() @ split.F_frames[0][:, 0]))
        assert np.degrees(np.arccos(min(cosine, 1.0))) <= 2.0
        assert leaf.rate_certified

    def test_two_dimensional_patch(self):
        """Test: F de dimension 2, disque dans le plan yz."""
        smooth_map = linear_map('diag3', np.diag([0.5, 2.0, 3.0]), [[-1.0, 1.0]] * 3)
        split = estimate_splitting(smooth_map, np.zeros((1, 3)), 2)
        leaf = grow_unstable_leaf(smooth_map, split, np.zeros(3), 0.3)
        assert leaf.triangles is not None
        assert np.max(np.abs(leaf.points[:, 0])) < 1e-12
        assert np.max(np.linalg.norm(leaf.params, axis=1)) <= 0.3
        assert leaf.mu > split.lambda_E

    def test_missing_splitting(self):
        """Test: point de base hors de la décomposition."""
        with pytest.raises(SplittingMissingError):
            grow_unstable_leaf(self.linear3, self.split, np.array([0.0, 0.5, 0.0]), 0.5)


class PairCriterionTest(SimpleTestCase):
    """Tests du critère de paire."""

    def setUp(self):
        """Initialisation des données de test."""
        self.linear3 = lookup('linear3').map
        self.cone = ConeField.build(np.zeros((1, 3)), np.array([[0.0], [0.0], [1.0]]), 1.0)

    def test_linear3_strong_pair(self):
        """Test: y sur l'axe z, différence contractée par 3^{-n}."""
        assert check_pair_criterion(self.linear3, np.zeros(3), np.array([0.0, 0.0, 0.1]),
                                    self.cone, 0.5, 0, 20)

    def test_linear3_stable_pair(self):
        """Test: segment le long de E^ss, hors du cône."""
        assert not check_pair_criterion(self.linear3, np.zeros(3), np.array([0.1, 0.0, 0.0]),
                                        self.cone, 0.5, 0, 20)

    def test_expansion_step(self):
        """Test: d(f x, f y) >= 2 d(x, y) pour une paire dans le cône."""
        y = np.array([0.0, 0.0, 0.1])
        assert expansion_pair_test(self.linear3, np.zeros(3), y, self.cone)
        assert not expansion_pair_test(self.linear3, np.zeros(3), y, self.cone, factor=3.5)
        assert check_pair_criterion(self.linear3, np.zeros(3), y, self.cone, 0.5, 0, 10, expansion=2.0)

    def test_solenoid_leaves(self):
        """Test: même feuille -> vrai, feuilles différentes -> faux (itinéraires symboliques)."""
        smooth_map = lookup('solenoid').map
        theta = 0.3
        x = solenoid_point(theta)
        same = solenoid_point(theta + 0.05 / 2.0 ** 30)
        other = solenoid_point(theta + 4.05 / 2.0 ** 30)
        K = np.vstack([x, same, other, solenoid_attractor_samples(count=300)])
        split = estimate_splitting(smooth_map, K, 1)
        cone = split.cone_field(1.0, smooth_map.periods)

        assert check_pair_criterion(smooth_map, x, same, cone, 0.5, 0, 8)
        assert not check_pair_criterion(smooth_map, x, other, cone, 0.5, 0, 8)


class ConnectionTest(SimpleTestCase):
    """Tests de la détection de connexions fortes."""

    def test_linear3_none(self):
        """Test: K = {0}, pas de connexion."""
        smooth_map = lookup('linear3').map
        split = estimate_splitting(smooth_map, np.zeros((1, 3)), 1)
        report = detect_connection(smooth_map, np.zeros((1, 3)), split, 0.5)
        assert not report.has_connection
        assert report.to_dict()['resolution'] == 0.0

    def test_henon_product_none(self):
        """Test: feuilles verticales, K dans z = 0."""
        fixed, pair = henon_cycles()
        K = np.array(fixed + pair)
        smooth_map = lookup('henon_x_expand').map
        split = estimate_splitting(smooth_map, K, 1)
        report = detect_connection(smooth_map, K, split, 0.2)
        assert not report.has_connection
        assert len(report.per_point) == 4

    def test_solenoid_connections(self):
        """Test: les feuilles du solénoïde rencontrent K en d'autres points."""
        smooth_map = lookup('solenoid').map
        K = solenoid_attractor_samples(count=600)
        split = estimate_splitting(smooth_map, K, 1)
        report = detect_connection(smooth_map, K, split, 0.3, base_indices=range(0, 600, 60))
        assert report.has_connection
        assert all(isinstance(pair['pair_criterion'], bool) for pair in report.pairs)
        assert report.to_dict()['qualifier'].startswith('verdict')

    def test_pair_criterion_on_flagged_point(self):
        """Test: point de K sur la feuille confirmé, point à 1e-3 de la feuille rejeté."""
        smooth_map = lookup('linear3').map
        split = estimate_splitting(smooth_map, np.zeros((1, 3)), 1)
        K = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.2], [1e-3, 0.0, -0.2]])
        report = detect_connection(smooth_map, K, split, 0.5, tol=0.01, base_indices=[0])

        verdicts = {pair['other']: pair['pair_criterion'] for pair in report.pairs}
        assert set(verdicts) == {1, 2}
        assert verdicts[1] is True
        assert verdicts[2] is False
        assert not report.agreement
