"""
Voisinage tubulaire de K: surface de base Σ₀ maillée, fibres affines transverses,
projection π le long des fibres et mesure des propriétés d'expansion.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from cones.splitting import SplittingFrame
from core.utils import make_rng
from dynamics.maps import SmoothMap, jacobian_at
from dynamics.topology import NeighborIndex, minimal_image
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.exceptions import SplittingMissingError
from whitney_surface.charts import LOCATE_TOLERANCE
from whitney_surface.fitting import local_spacing
from whitney_surface.gluing import FittedSurface

from .exceptions import ProjectionFailureError, PropertiesUnachievableError
from .grids import GridField, ParameterGrid

logger = logging.getLogger('graph_transform')

TRANSVERSALITY_DEGREES = 30.0
MIN_RADIUS = 1e-4
RADIUS_FRACTION = 0.4
FIBER_BANDWIDTH = 2.0
NODES_PER_RADIUS = {1: 32, 2: 12}
PROJECTION_ITERS = 30
PROJECTION_TOLERANCE = 1e-10
VERIFY_SAMPLES = 300
CHUNK = 512


def unit_directions(basis: np.ndarray) -> np.ndarray:
    """Colonnes d'une base orthonormale (M, n, k) et leurs sommes et différences normalisées."""
    k = basis.shape[2]
    directions = [basis[:, :, a] for a in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            directions.append((basis[:, :, a] + basis[:, :, b]) / np.sqrt(2.0))
            directions.append((basis[:, :, a] - basis[:, :, b]) / np.sqrt(2.0))
    return np.stack(directions, axis=-1)


def smooth_fiber_field(K_params: np.ndarray, F_frames: np.ndarray, s: np.ndarray,
                       bandwidth: float) -> np.ndarray:
    """
    Repères de fibres (M, n, k) lissés par moyenne gaussienne des projecteurs sur F.

    Chaque repère est aligné (Procrustes) sur le repère F du point de K le plus proche.
    """
    projectors = np.einsum('nik,njk->nij', F_frames, F_frames)
    k = F_frames.shape[2]
    _, nearest = cKDTree(K_params).query(s)
    frames = np.empty((len(s), F_frames.shape[1], k))
    for start in range(0, len(s), CHUNK):
        block = slice(start, start + CHUNK)
        squared = cdist(s[block], K_params, 'sqeuclidean')
        weights = np.exp(-(squared - squared.min(axis=1, keepdims=True)) / bandwidth ** 2)
        average = np.einsum('mn,nij->mij', weights, projectors) / weights.sum(axis=1)[:, None, None]
        _, vectors = np.linalg.eigh(average)
        basis = vectors[:, :, -k:]
        U, _, Vt = np.linalg.svd(np.einsum('mnk,mnl->mkl', basis, F_frames[nearest[block]]))
        frames[block] = basis @ (U @ Vt)
    return frames


@dataclass
class TubeProperties:
    """
    Propriétés mesurées du voisinage tubulaire sur un échantillon.

    Attributes:
        lambda0: min ‖Df·u_v‖/‖u_v‖ sur les vecteurs verticaux
        eta: max ‖Dπ·Df·u_v‖/‖u_v‖
        delta: max |‖Dπ·u_h‖/‖u_h‖ − 1| sur les vecteurs horizontaux
        cone_factor: pente max de Df⁻¹·C^h_β, divisée par β
        transversality: angle minimal (degrés) entre fibres et Σ₀ aux nœuds
        samples: nombre de points échantillonnés
    """
    lambda0: float
    eta: float
    delta: float
    cone_factor: float
    transversality: float
    samples: int

    def failures(self, targets: Dict[str, float]) -> List[str]:
        """Inégalités non satisfaites pour les cibles données."""
        failed = []
        if self.lambda0 < targets['lambda0']:
            failed.append(f"λ₀ mesuré {self.lambda0:.4g} < {targets['lambda0']:.4g}")
        if self.eta > targets['eta']:
            failed.append(f"η mesuré {self.eta:.4g} > {targets['eta']:.4g}")
        if self.delta > targets['delta']:
            failed.append(f"δ mesuré {self.delta:.4g} > {targets['delta']:.4g}")
        if self.cone_factor > (1.0 + 1e-9) / targets['lambda0']:
            failed.append(f"Df⁻¹·C^h_β ⊄ C^h_(β/λ₀) (facteur {self.cone_factor:.4g})")
        if self.transversality < TRANSVERSALITY_DEGREES:
            failed.append(f"transversalité {self.transversality:.1f}° < {TRANSVERSALITY_DEGREES:.0f}°")
        return failed

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lambda0': self.lambda0,
            'eta': self.eta,
            'delta': self.delta,
            'cone_factor': self.cone_factor,
            'transversality': self.transversality,
            'samples': self.samples,
        }


@dataclass
class TubularNeighborhood:
    """
    Voisinage tubulaire: Σ₀ et les fibres F̃ interpolés sur une grille de paramètres.

    Attributes:
        surface: surface initiale
        grid: grille des paramètres de base
        base: champ s -> Σ₀(s)
        fibers: champ s -> F̃(s), aplati
        K_params: paramètres des points de K
        radius: rayon du voisinage (paramètres et fibres)
        periods: périodes des axes ambiants
        properties: propriétés mesurées
    """
    surface: FittedSurface
    grid: ParameterGrid
    base: GridField
    fibers: GridField
    K_params: np.ndarray
    radius: float
    periods: Tuple = ()
    properties: Optional[TubeProperties] = None
    _tree: Any = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def ambient_dim(self) -> int:
        return self.base.components

    @property
    def fiber_dim(self) -> int:
        return self.ambient_dim - self.dim

    def base_point(self, s: np.ndarray) -> np.ndarray:
        return self.base(s)

    def base_tangent(self, s: np.ndarray) -> np.ndarray:
        return self.base.gradient(s)

    def fiber_frame(self, s: np.ndarray) -> np.ndarray:
        return self.fibers(s).reshape(-1, self.ambient_dim, self.fiber_dim)

    def fiber_gradient(self, s: np.ndarray) -> np.ndarray:
        return self.fibers.gradient(s).reshape(-1, self.ambient_dim, self.fiber_dim, self.dim)

    def embed(self, s: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Point Σ₀(s) + F̃(s)·w."""
        s = np.atleast_2d(s)
        return self.base_point(s) + np.einsum('mnk,mk->mn', self.fiber_frame(s), np.atleast_2d(w))

    def nearest_K(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Distance aux paramètres de K et indice du plus proche."""
        if self._tree is None:
            self._tree = cKDTree(self.K_params)
        return self._tree.query(np.atleast_2d(s))

    def distance_to_K(self, s: np.ndarray) -> np.ndarray:
        return self.nearest_K(s)[0]

    def in_domain(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        return self.grid.contains(s) & (self.distance_to_K(s) <= self.radius * (1.0 + 1e-9))

    def _jacobian(self, s: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Matrice (M, n, n) de (s, w) -> Σ₀(s) + F̃(s)·w."""
        horizontal = self.base_tangent(s) + np.einsum('mnkd,mk->mnd', self.fiber_gradient(s), w)
        return np.concatenate([horizontal, self.fiber_frame(s)], axis=2)

    def _residual(self, points: np.ndarray, s: np.ndarray, w: np.ndarray) -> np.ndarray:
        periods = tuple(self.periods) or (None,) * self.ambient_dim
        return minimal_image(self.embed(s, w) - points, periods)

    def project(self, points: np.ndarray, strict: bool = True):
        """
        Coordonnées (s, w) de points ambiants: Σ₀(s) + F̃(s)·w = p, par Newton.

        Args:
            points: Points (M, n)
            strict: Lever une erreur si un point ne se projette pas

        Returns:
            (s, w) si strict, sinon (s, w, ok)

        Raises:
            ProjectionFailureError: point hors de la grille ou Newton non convergent
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.dim
        s = self.grid.clip(self.surface.parameters(points))
        w = np.einsum('mnk,mn->mk', self.fiber_frame(s), -self._residual(points, s, np.zeros((len(s), self.fiber_dim))))

        scale = np.maximum(1.0, np.max(np.abs(points), axis=1))
        with np.errstate(over='ignore', invalid='ignore'):
            for _ in range(PROJECTION_ITERS):
                residual = self._residual(points, s, w)
                if np.all(np.max(np.abs(residual), axis=1) <= 1e-15 * scale):
                    break
                jacobian = self._jacobian(s, w)
                try:
                    step = np.linalg.solve(jacobian, residual[..., None])[..., 0]
                except np.linalg.LinAlgError:
                    step = np.einsum('mij,mj->mi', np.linalg.pinv(jacobian), residual)
                s, w = s - step[:, :d], w - step[:, d:]
                if not (np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
                    break
                if np.all(np.max(np.abs(step), axis=1) <= 4e-16 * scale):
                    break

            residual = self._residual(points, s, w)
        ok = (np.all(np.isfinite(residual), axis=1)
              & (np.max(np.abs(np.nan_to_num(residual, nan=np.inf)), axis=1) <= PROJECTION_TOLERANCE * scale)
              & self.grid.contains(np.nan_to_num(s, nan=np.inf)))
        if strict:
            if not ok.all():
                worst = int(np.flatnonzero(~ok)[0])
                raise ProjectionFailureError(
                    f"{int(np.sum(~ok))} point(s) hors du voisinage tubulaire, dont {points[worst].tolist()}"
                )
            return s, w
        return s, w, ok

    def projection_jacobian(self, s: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Différentielle (M, d, n) de la coordonnée de base s au point de coordonnées (s, w)."""
        return np.linalg.inv(self._jacobian(np.atleast_2d(s), np.atleast_2d(w)))[:, :self.dim, :]

    def horizontal_projection(self, s: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Dπ (M, n, n) au point de coordonnées (s, w), à valeurs dans TΣ₀."""
        return np.einsum('mnd,mdj->mnj', self.base_tangent(s), self.projection_jacobian(s, w))

    def decompose(self, s: np.ndarray, w: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Normes horizontale et verticale de vecteurs (M, n, r) au point de coordonnées (s, w)."""
        coefficients = np.linalg.solve(self._jacobian(s, w), vectors)
        horizontal = np.einsum('mnd,mdr->mnr', self.base_tangent(s), coefficients[:, :self.dim, :])
        return np.linalg.norm(horizontal, axis=1), np.linalg.norm(coefficients[:, self.dim:, :], axis=1)

    def transversality(self) -> float:
        """Angle minimal (degrés) entre F̃ et TΣ₀ aux nœuds du domaine."""
        nodes = self.grid.nodes
        nodes = nodes[self.in_domain(nodes)]
        tangent, _ = np.linalg.qr(self.base_tangent(nodes))
        overlap = np.linalg.svd(np.einsum('mnd,mnk->mdk', tangent, self.fiber_frame(nodes)), compute_uv=False)
        cosine = np.clip(np.max(overlap, axis=1), 0.0, 1.0)
        return float(np.degrees(np.min(np.arccos(cosine))))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'grid': self.grid.to_dict(),
            'radius': self.radius,
            'K_points': len(self.K_params),
            'properties': self.properties.to_dict() if self.properties else None,
        }


def _fiber_frames(K: np.ndarray, split: SplittingFrame, periods) -> np.ndarray:
    distances, nearest = NeighborIndex(split.points, periods).query(K)
    distances = np.atleast_1d(distances)
    if np.max(distances) > LOCATE_TOLERANCE * max(1.0, float(np.max(np.abs(K)))):
        raise SplittingMissingError(f"Décomposition absente en {K[int(np.argmax(distances))].tolist()}")
    return split.F_frames[np.atleast_1d(nearest)]


def assemble_tube(surface: FittedSurface, K: np.ndarray, split: SplittingFrame, radius: float,
                  spacing: float, periods: Sequence = ()) -> TubularNeighborhood:
    """Maille Σ₀ et le champ de fibres lissé sur la boîte des paramètres de K élargie de radius."""
    periods = tuple(periods) or (None,) * surface.ambient_dim
    K_params = surface.parameters(K)
    box = np.column_stack([K_params.min(axis=0) - radius, K_params.max(axis=0) + radius])
    grid = ParameterGrid.from_box(box, spacing, anchor=K_params[0])
    nodes = grid.nodes

    offsets = surface.offsets(nodes)
    finite = np.all(np.isfinite(offsets), axis=1)
    if not finite.any():
        raise PropertiesUnachievableError("Σ₀ n'est défini en aucun nœud de la grille")
    if not finite.all():
        _, nearest = cKDTree(nodes[finite]).query(nodes[~finite])
        offsets[~finite] = offsets[finite][nearest]
    base = nodes @ surface.horizontal_frame.T + offsets @ surface.vertical_frame.T

    F_frames = _fiber_frames(K, split, periods)
    bandwidth = FIBER_BANDWIDTH * local_spacing(K_params, radius / 4.0)
    frames = smooth_fiber_field(K_params, F_frames, nodes, bandwidth)
    return TubularNeighborhood(
        surface=surface,
        grid=grid,
        base=GridField(grid, base),
        fibers=GridField(grid, frames.reshape(len(nodes), -1)),
        K_params=K_params,
        radius=float(radius),
        periods=periods,
    )


def measure_tube_properties(tube: TubularNeighborhood, smooth_map: SmoothMap, targets: Dict[str, float],
                            samples: int = VERIFY_SAMPLES, seed: int = 0) -> TubeProperties:
    """
    Mesure (λ₀, η, δ, facteur de cône, transversalité) sur des points du tube.

    Les points sont pris aux nœuds du domaine, avec des décalages aléatoires dans
    les fibres de norme au plus le rayon; les points dont l'image ou la préimage
    sort du tube sont ignorés pour η et le facteur de cône.
    """
    rng = make_rng(seed, stream=11)
    nodes = tube.grid.nodes
    nodes = nodes[tube.in_domain(nodes)]
    if len(nodes) > samples:
        nodes = nodes[np.sort(rng.choice(len(nodes), size=samples, replace=False))]
    count = len(nodes)
    w = rng.uniform(-1.0, 1.0, size=(count, tube.fiber_dim)) * tube.radius / np.sqrt(tube.fiber_dim)
    w[: count // 2] = 0.0
    q = tube.embed(nodes, w)

    vertical = tube.fiber_frame(nodes)
    tangent, _ = np.linalg.qr(tube.base_tangent(nodes))
    jacobian = jacobian_at(smooth_map, q)
    pushed = np.einsum('mij,mjk->mik', jacobian, vertical)
    lambda0 = float(np.min(np.linalg.svd(pushed, compute_uv=False)[:, -1]))

    image = smooth_map.wrap(smooth_map.forward(q))
    s_image, w_image, ok = tube.project(image, strict=False)
    eta = 0.0
    if ok.any():
        leaked = np.einsum('mij,mjk->mik', tube.horizontal_projection(s_image[ok], w_image[ok]), pushed[ok])
        eta = float(np.max(np.linalg.svd(leaked, compute_uv=False)[:, 0]))

    local = np.einsum('mij,mjk->mik', tube.horizontal_projection(nodes, w), tangent)
    singular = np.linalg.svd(local, compute_uv=False)
    delta = float(np.max(np.abs(singular - 1.0)))

    cone_factor = 0.0
    beta = targets['beta']
    if smooth_map.has_inverse:
        pre = smooth_map.wrap(smooth_map.inverse(q))
        s_pre, w_pre, ok_pre = tube.project(pre, strict=False)
        if ok_pre.any():
            h = unit_directions(tangent[ok_pre])
            v = unit_directions(vertical[ok_pre])
            v = np.concatenate([v, -v], axis=-1)
            generators = (h[:, :, :, None] + beta * v[:, :, None, :]).reshape(int(ok_pre.sum()), tube.ambient_dim, -1)
            pulled = np.linalg.solve(jacobian_at(smooth_map, pre[ok_pre]), generators)
            horizontal, fiber = tube.decompose(s_pre[ok_pre], w_pre[ok_pre], pulled)
            cone_factor = float(np.max(fiber / np.maximum(horizontal, 1e-300)) / beta)

    skipped = int(np.sum(~ok))
    if skipped:
        logger.debug(f"{skipped} image(s) hors du tube ignorée(s) pour η")
    return TubeProperties(lambda0=lambda0, eta=eta, delta=delta, cone_factor=cone_factor,
                          transversality=tube.transversality(), samples=count)


def build_tubular(surface: FittedSurface, K: Union[SampledInvariantSet, np.ndarray], split: SplittingFrame,
                  smooth_map: SmoothMap, targets: Dict[str, float], radius: Optional[float] = None,
                  spacing: Optional[float] = None, samples: int = VERIFY_SAMPLES,
                  seed: int = 0) -> TubularNeighborhood:
    """
    Construit le voisinage tubulaire et le réduit jusqu'à ce que ses propriétés passent.

    Args:
        surface: Surface initiale tangente à E sur K
        K: Ensemble invariant
        split: Décomposition E ⊕ F sur K
        smooth_map: Application f
        targets: Cibles {lambda0, eta, beta, delta}
        radius: Rayon initial (défaut: 0.4 × plus petit rayon de carte)
        spacing: Pas de la grille (défaut: rayon/32 en dimension 1, rayon/12 en dimension 2)
        samples: Taille de l'échantillon de vérification
        seed: Graine de l'échantillon

    Returns:
        TubularNeighborhood avec ses propriétés mesurées

    Raises:
        PropertiesUnachievableError: échec en dessous du rayon 1e-4
    """
    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    radius = radius or RADIUS_FRACTION * min(chart.radius for chart in surface.charts)
    nodes_per_radius = NODES_PER_RADIUS.get(surface.dim, 12)

    while True:
        step = min(spacing, radius / 4.0) if spacing else radius / nodes_per_radius
        tube = assemble_tube(surface, points, split, radius, step, smooth_map.periods)
        properties = measure_tube_properties(tube, smooth_map, targets, samples, seed)
        failures = properties.failures(targets)
        if not failures:
            tube.properties = properties
            logger.info(
                f"Voisinage tubulaire de rayon {radius:.3e} ({tube.grid.size} nœuds): "
                f"λ₀={properties.lambda0:.4g}, η={properties.eta:.3g}, δ={properties.delta:.3g}, "
                f"cône={properties.cone_factor:.3g}"
            )
            return tube
        logger.info(f"Rayon {radius:.3e} rejeté: {'; '.join(failures)}")
        radius *= 0.5
        if radius < MIN_RADIUS:
            raise PropertiesUnachievableError(
                f"Propriétés du voisinage tubulaire inatteignables au rayon {MIN_RADIUS:g}: {'; '.join(failures)}"
            )
