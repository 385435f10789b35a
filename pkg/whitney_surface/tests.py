"""
Tests pour l'app whitney_surface.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from cones.fields import complement_frame
from cones.splitting import SplittingFrame, estimate_splitting
from dynamics.registry import lookup

from .charts import AdaptedChart, build_adapted_charts, canonical_frame
from .exceptions import ChartFailureError, GraphObstructionError, ResidualTooLargeError
from .fitting import fit_local_graph, whitney_quotient
from .gluing import build_surface, glue_charts


def prescribed_split(points, planes):
    """Décomposition synthétique: E prescrit, F orthogonal."""
    points = np.asarray(points, dtype=float)
    planes = np.asarray(planes, dtype=float)
    planes = planes / np.linalg.norm(planes, axis=1, keepdims=True)
    F = np.array([complement_frame(plane) for plane in planes])
    return SplittingFrame(points=points, E_frames=planes, F_frames=F, lambda_E=1.0, lambda_F=3.0,
                          C=1.0, invariance_residual=0.0, min_angle=np.pi / 2)


def parabola(count=241):
    t = np.linspace(-0.3, 0.3, count)
    points = np.column_stack([t, t ** 2, np.zeros(count)])
    tangents = np.column_stack([np.ones(count), 2.0 * t, np.zeros(count)])[:, :, None]
    return points, prescribed_split(points, tangents)


def cantor_plane(depth=4):
    """Produit de deux ensembles de Cantor dans le plan z = 0."""
    values = np.array([0.0])
    for k in range(1, depth + 1):
        values = np.concatenate([values, values + 2.0 / 3.0 ** k])
    x, y = np.meshgrid(values - 0.5, values - 0.5, indexing='ij')
    points = np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])
    planes = np.broadcast_to(np.eye(3)[:, :2], (len(points), 3, 2))
    return points, prescribed_split(points, planes)


def line_chart(horizontal, heights, slopes):
    horizontal = np.asarray(horizontal, dtype=float)[:, None]
    return AdaptedChart(
        center=np.zeros(2),
        rotation=np.eye(2),
        radius=0.5,
        indices=np.arange(len(horizontal)),
        horizontal=horizontal,
        heights=np.asarray(heights, dtype=float)[:, None],
        slopes=np.asarray(slopes, dtype=float)[:, None, None],
    )


class AdaptedChartTest(SimpleTestCase):
    """Tests des cartes adaptées."""

    def test_canonical_frame_of_xy_plane(self):
        """Test: le plan xy donne la rotation identité."""
        plane = np.array([[0.6, 0.8], [0.8, -0.6], [0.0, 0.0]])
        assert np.allclose(canonical_frame(plane), np.eye(3), atol=1e-12)

    def test_linear3_single_chart(self):
        """Test: K = {0} dans linear3, une carte, rotation identité."""
        smooth_map = lookup('linear3').map
        split = estimate_splitting(smooth_map, np.zeros((1, 3)), 1)
        charts = build_adapted_charts(np.zeros((1, 3)), split, 0.5)
        assert len(charts) == 1
        assert np.allclose(np.abs(charts[0].rotation), np.eye(3), atol=1e-10)

    def test_parabola_slope_bound(self):
        """Test: parabole (t, t², 0), une ou deux cartes, pente <= 0.6."""
        points, split = parabola()
        charts = build_adapted_charts(points, split, 0.5)
        assert 1 <= len(charts) <= 2
        assert max(chart.max_slope for chart in charts) <= 0.6 + 1e-9
        captured = np.unique(np.concatenate([chart.indices for chart in charts]))
        assert len(captured) == len(points)

    def test_cantor_plane_cover(self):
        """Test: chaque fibre verticale rencontre un seul échantillon."""
        points, split = cantor_plane()
        charts = build_adapted_charts(points, split, 0.3)
        captured = np.unique(np.concatenate([chart.indices for chart in charts]))
        assert len(captured) == len(points)
        for chart in charts:
            assert np.all(chart.heights == 0.0)
            assert chart.max_slope == 0.0

    def test_vertical_accumulation(self):
        """Test: deux points empilés sur la verticale."""
        points = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 5e-5]])
        split = prescribed_split(points, np.broadcast_to(np.eye(3)[:, :2], (2, 3, 2)))
        with pytest.raises(ChartFailureError):
            build_adapted_charts(points, split, 0.5)


class LocalGraphTest(SimpleTestCase):
    """Tests de l'ajustement de Hermite."""

    def test_straight_line(self):
        """Test: données d'une droite, ajustement exact et quotient nul."""
        u = np.linspace(-0.2, 0.2, 5)
        graph = fit_local_graph(line_chart(u, 0.5 * u, 0.5 * np.ones(5)))
        samples = np.linspace(-0.3, 0.3, 13)[:, None]
        values, gradients = graph.evaluate(samples)
        assert graph.whitney_quotient == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(values[:, 0], 0.5 * samples[:, 0], atol=1e-12)
        assert np.allclose(gradients, 0.5, atol=1e-10)

    def test_whitney_quotient_mean_slope(self):
        """Test: pente moyenne, quotient nul sur u², égal à ½|y − x|² sur u³."""
        u = np.linspace(-0.2, 0.2, 9)[:, None]
        assert whitney_quotient(u, u ** 2, 2.0 * u[:, :, None]) <= 1e-13
        assert whitney_quotient(u, u ** 3, 3.0 * u[:, :, None] ** 2) == pytest.approx(0.5 * 0.4 ** 2, rel=1e-10)
        half = 0.5 * u
        assert whitney_quotient(half, half ** 3, 3.0 * half[:, :, None] ** 2) == pytest.approx(0.5 * 0.2 ** 2,
                                                                                             rel=1e-10)

    def test_quadratic_reproduction(self):
        """Test: Φ(u) = u² reproduit sur [−0.2, 0.2] à partir de trois points."""
        u = np.array([-0.2, 0.0, 0.2])
        graph = fit_local_graph(line_chart(u, u ** 2, 2.0 * u))
        samples = np.linspace(-0.2, 0.2, 41)[:, None]
        assert np.max(np.abs(graph(samples)[:, 0] - samples[:, 0] ** 2)) <= 1e-6

    def test_incompatible_data(self):
        """Test: hauteurs nulles en ±0.1 mais pente 1 imposée."""
        chart = line_chart([-0.1, 0.1], [0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ResidualTooLargeError):
            fit_local_graph(chart, tolerance=0.05)


class GluingTest(SimpleTestCase):
    """Tests du recollement."""

    def test_linear3_plane(self):
        """Test: Σ₀ est le plan xy."""
        smooth_map = lookup('linear3').map
        split = estimate_splitting(smooth_map, np.zeros((1, 3)), 1)
        surface = build_surface(np.zeros((1, 3)), split, 0.5)
        s = np.array([[0.1, -0.2], [-0.05, 0.0]])
        assert surface.dim == 2
        assert np.allclose(surface.evaluate(s), np.column_stack([s, np.zeros(2)]), atol=1e-12)

    def test_plane_from_overlapping_charts(self):
        """Test: plusieurs cartes d'un même plan, le recollement est exact."""
        x, y = np.meshgrid(np.linspace(-0.5, 0.5, 21), np.linspace(-0.1, 0.1, 3), indexing='ij')
        points = np.column_stack([x.ravel(), y.ravel(), np.zeros(x.size)])
        split = prescribed_split(points, np.broadcast_to(np.eye(3)[:, :2], (len(points), 3, 2)))
        surface = build_surface(points, split, 0.3)
        assert len(surface.graphs) >= 2
        s = np.column_stack([np.linspace(-0.45, 0.45, 19), np.zeros(19)])
        assert np.max(np.abs(surface.evaluate(s)[:, 2])) <= 1e-12

    def test_parabola_charts(self):
        """Test: cartes de centres différents, Σ₀ = (t, t², 0) à 1e-6."""
        points, split = parabola()
        surface = build_surface(points, split, 0.2)
        assert len(surface.graphs) >= 2
        s = np.linspace(-0.28, 0.28, 57)[:, None]
        expected = np.column_stack([s[:, 0], s[:, 0] ** 2, np.zeros(len(s))])
        assert np.max(np.abs(surface.evaluate(s) - expected)) <= 1e-6
        assert surface.fit_residual <= 1e-5
        assert surface.tangent_defect <= 1e-3

    def test_tangent_continuity(self):
        """Test: pas de saut de plan tangent entre nœuds voisins."""
        points, split = parabola()
        surface = build_surface(points, split, 0.2)
        s = np.linspace(-0.25, 0.25, 501)[:, None]
        left, right = surface.tangent(s)[:, :, 0], surface.tangent(s + 1e-4)[:, :, 0]
        cosines = np.clip(np.abs(np.sum(left * right, axis=1)), 0.0, 1.0)
        assert np.max(np.arccos(cosines)) <= 1e-3

    def test_order_invariance_at_samples(self):
        """Test: permuter l'ordre des cartes ne change pas Σ₀ sur K."""
        points, split = parabola()
        charts = build_adapted_charts(points, split, 0.2)
        graphs = [fit_local_graph(chart) for chart in charts]
        forward = glue_charts(charts, graphs)
        backward = glue_charts(charts, graphs, order=list(reversed(range(len(charts)))))
        s = forward.parameters(points)
        assert np.max(np.abs(forward.evaluate(s) - backward.evaluate(s))) <= 1e-6

    def test_cantor_plane_surface(self):
        """Test: surface à moins de 1e-6 du plan z = 0 sur l'union des cartes."""
        points, split = cantor_plane()
        surface = build_surface(points, split, 0.3)
        s = surface.mesh(9)
        values = surface.evaluate(s)
        defined = np.all(np.isfinite(values), axis=1)
        assert defined.any()
        assert np.max(np.abs(values[defined, 2])) <= 1e-6

    def test_graph_obstruction(self):
        """Test: une carte verticale au-dessus de la surface courante."""
        u = np.linspace(-0.2, 0.2, 9)
        flat = line_chart(u, np.zeros(9), np.zeros(9))
        vertical = AdaptedChart(
            center=np.array([0.05, 0.0]),
            rotation=np.array([[0.0, 1.0], [1.0, 0.0]]),
            radius=0.1,
            indices=np.array([0]),
            horizontal=np.zeros((1, 1)),
            heights=np.zeros((1, 1)),
            slopes=np.zeros((1, 1, 1)),
        )
        charts = [flat, vertical]
        graphs = [fit_local_graph(chart) for chart in charts]
        with pytest.raises(GraphObstructionError):
            glue_charts(charts, graphs)
