"""
Relèvement projectif d'un difféomorphisme de surface.

Une droite tangente en x est codée par un angle φ ∈ [0, π), de vecteur directeur
(cos φ, sin φ). Le relevé f̂(x, φ) = (f(x), angle de Df(x)·(cos φ, sin φ)) est une
application de dimension 3 dont le dernier axe est périodique de période π.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union
import logging

import numpy as np

from cones.splitting import SplittingFrame
from core.utils import make_rng
from dynamics.exceptions import MissingInverseError
from dynamics.maps import FD_STEP, SmoothMap, jacobian_at
from dynamics.topology import NeighborIndex, minimal_image
from invariant_set.sets import SampledInvariantSet
from strong_manifolds.exceptions import DimensionUnsupportedError, SplittingMissingError

from .exceptions import EquivarianceError

logger = logging.getLogger('projective_lift')

ANGLE_PERIOD = np.pi
SELF_TEST_SAMPLES = 10000
BASE_TOLERANCE = 1e-6
HESSIAN_STEP = 1e-4


def direction(phi: np.ndarray) -> np.ndarray:
    """Vecteur directeur unitaire (..., 2) de l'angle φ."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def angle_of(vectors: np.ndarray) -> np.ndarray:
    """Angle dans [0, π) de la droite engendrée par chaque vecteur (..., 2)."""
    vectors = np.asarray(vectors, dtype=float)
    return np.mod(np.arctan2(vectors[..., 1], vectors[..., 0]), ANGLE_PERIOD)


def angle_gap(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Écart signé entre deux angles de droites, ramené dans [−π/2, π/2]."""
    delta = np.asarray(first, dtype=float) - np.asarray(second, dtype=float)
    return minimal_image(delta[..., None], (ANGLE_PERIOD,))[..., 0]


def _raw_angle(base: SmoothMap, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    v = np.einsum('...ij,...j->...i', jacobian_at(base, x), u)
    return np.arctan2(v[..., 1], v[..., 0])


def _lifted_functions(base: SmoothMap):
    def forward(p):
        p = np.asarray(p, dtype=float)
        x, phi = p[..., :2], p[..., 2]
        return np.concatenate([base.forward(x), _raw_angle(base, x, direction(phi))[..., None]], axis=-1)

    def inverse(p):
        p = np.asarray(p, dtype=float)
        y, phi = p[..., :2], p[..., 2]
        x = base.inverse(y)
        v = np.linalg.solve(jacobian_at(base, x), direction(phi)[..., None])[..., 0]
        return np.concatenate([x, np.arctan2(v[..., 1], v[..., 0])[..., None]], axis=-1)

    def jacobian(p):
        # Bloc de base analytique, ligne angulaire en x par différences centrées repliées.
        p = np.asarray(p, dtype=float)
        x, phi = p[..., :2], p[..., 2]
        J = jacobian_at(base, x)
        u = direction(phi)
        v = np.einsum('...ij,...j->...i', J, u)
        jac = np.zeros(p.shape[:-1] + (3, 3))
        jac[..., :2, :2] = J
        jac[..., 2, 2] = np.linalg.det(J) / np.sum(v ** 2, axis=-1)
        h = FD_STEP * np.maximum(1.0, np.linalg.norm(x, axis=-1))
        for j in range(2):
            shift = np.zeros(2)
            shift[j] = 1.0
            offset = h[..., None] * shift
            delta = angle_gap(_raw_angle(base, x + offset, u), _raw_angle(base, x - offset, u))
            jac[..., 2, j] = delta / (2.0 * h)
        return jac

    return forward, inverse, jacobian


@dataclass(frozen=True)
class ProjectiveLiftedMap:
    """
    Relevé f̂ de f au fibré projectif tangent.

    Attributes:
        base: application f de la surface
        map: application f̂ sur (x, y, φ)
        equivariance_defect: écart maximal mesuré entre p∘f̂ et f∘p
    """
    base: SmoothMap
    map: SmoothMap
    equivariance_defect: float = 0.0

    @property
    def base_periods(self):
        return self.base.periods

    def lift(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Points (N, 3) du fibré projectif, repliés."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phi = np.broadcast_to(np.asarray(phi, dtype=float), x.shape[:-1])
        return self.map.wrap(np.concatenate([x, phi[..., None]], axis=-1))

    @staticmethod
    def project(points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float)[..., :2]

    def angle_image(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Angle de Df(x)·(cos φ, sin φ) dans [0, π)."""
        return np.mod(self.map.forward(self.lift(x, phi))[..., 2], ANGLE_PERIOD)

    def to_dict(self) -> Dict[str, Any]:
        return {'base': self.base.name, 'map': self.map.name, 'equivariance_defect': self.equivariance_defect}


def _self_test(base: SmoothMap, lifted: SmoothMap, samples: int, seed: int) -> float:
    rng = make_rng(seed, stream=41)
    if base.box is not None:
        x = base.sample_box(rng, samples)
    else:
        x = rng.uniform(-1.0, 1.0, size=(samples, 2))
    phi = rng.uniform(0.0, ANGLE_PERIOD, size=samples)
    with np.errstate(over='ignore', invalid='ignore'):
        upstairs = base.wrap(lifted.forward(np.column_stack([x, phi]))[:, :2])
        downstairs = base.wrap(base.forward(x))
    if np.array_equal(upstairs, downstairs, equal_nan=True):
        return 0.0
    return float(np.nanmax(np.abs(upstairs - downstairs)))


def lift_map(smooth_map: SmoothMap, samples: int = SELF_TEST_SAMPLES, seed: int = 0) -> ProjectiveLiftedMap:
    """
    Construit f̂ et vérifie l'équivariance p∘f̂ = f∘p sur des points tirés au hasard.

    Args:
        smooth_map: Difféomorphisme de surface f (avec inverse)
        samples: Nombre de points de l'auto-test
        seed: Graine de l'auto-test

    Returns:
        ProjectiveLiftedMap

    Raises:
        DimensionUnsupportedError: f n'est pas de dimension 2
        MissingInverseError: f sans inverse
        EquivarianceError: la projection du relevé diffère de f
    """
    if smooth_map.dim != 2:
        raise DimensionUnsupportedError(
            f"Relèvement projectif limité aux surfaces: {smooth_map.name} est de dimension {smooth_map.dim}"
        )
    if not smooth_map.has_inverse:
        raise MissingInverseError(f"Le relèvement de {smooth_map.name} exige son inverse")

    forward, inverse, jacobian = _lifted_functions(smooth_map)
    box = None
    if smooth_map.box is not None:
        box = np.vstack([smooth_map.box, [[0.0, ANGLE_PERIOD]]])
    lifted = SmoothMap(
        name=f"{smooth_map.name}^",
        dim=3,
        forward=forward,
        inverse=inverse,
        jacobian=jacobian,
        periods=tuple(smooth_map.periods) + (ANGLE_PERIOD,),
        box=box,
    )

    defect = _self_test(smooth_map, lifted, samples, seed)
    if defect > 0.0:
        raise EquivarianceError(f"p∘f̂ ≠ f∘p pour {smooth_map.name}: écart {defect:.3e}")
    logger.info(f"Relevé projectif de {smooth_map.name}: équivariance exacte sur {samples} point(s)")
    return ProjectiveLiftedMap(base=smooth_map, map=lifted, equivariance_defect=defect)


@dataclass
class LiftedSet:
    """
    Relevé K̂ = {(x, φ(x))} de K, φ angle de la direction choisie.

    Attributes:
        base_points: K (N, 2)
        angles: angles (N,) dans [0, π)
        which: 'stable' ou 'unstable'
    """
    base_points: np.ndarray
    angles: np.ndarray
    which: str

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.base_points, self.angles])

    def __len__(self) -> int:
        return len(self.base_points)

    def invariance_residual(self, lifted: ProjectiveLiftedMap) -> float:
        """Écart angulaire maximal entre f̂(x, φ(x)) et (f(x), φ(f(x))) là où f(x) est dans K."""
        periods = lifted.base_periods
        images = lifted.map.wrap(lifted.map.forward(self.points))
        distances, idx = NeighborIndex(self.base_points, periods).query(images[:, :2])
        scale = max(1.0, float(np.max(np.abs(self.base_points))))
        matched = np.atleast_1d(distances) <= BASE_TOLERANCE * scale
        if not matched.any():
            return 0.0
        gaps = angle_gap(images[matched, 2], self.angles[np.atleast_1d(idx)[matched]])
        return float(np.max(np.abs(gaps)))

    def rows(self) -> List[List[float]]:
        return [list(x) + [float(phi)] for x, phi in zip(self.base_points, self.angles)]

    def to_dict(self) -> Dict[str, Any]:
        return {'which': self.which, 'points': len(self), 'angles': self.angles.tolist()}


def lift_set(smooth_map: SmoothMap, K: Union[SampledInvariantSet, np.ndarray],
             split: Optional[SplittingFrame], which: str = 'unstable') -> LiftedSet:
    """
    Attache à chaque point de K l'angle de sa direction instable (F) ou stable (E).

    Args:
        smooth_map: Difféomorphisme de surface
        K: Ensemble hyperbolique
        split: Décomposition E ⊕ F de f sur K (F instable)
        which: 'unstable' ou 'stable'

    Returns:
        LiftedSet

    Raises:
        SplittingMissingError: pas de décomposition, fibré de dimension ≠ 1, ou point de K sans repère
    """
    if which not in ('stable', 'unstable'):
        raise ValueError(f"Direction inconnue: {which}")
    if split is None:
        raise SplittingMissingError("Le relèvement de K exige une décomposition E ⊕ F")
    if split.d_F != 1 or split.d_E != 1:
        raise SplittingMissingError(f"Fibrés de dimensions ({split.d_E}, {split.d_F}): droites requises")

    points = K.points if isinstance(K, SampledInvariantSet) else np.atleast_2d(np.asarray(K, dtype=float))
    distances, idx = NeighborIndex(split.points, smooth_map.periods).query(points)
    scale = max(1.0, float(np.max(np.abs(points))))
    distances, idx = np.atleast_1d(distances), np.atleast_1d(idx)
    if np.any(distances > BASE_TOLERANCE * scale):
        far = int(np.argmax(distances))
        raise SplittingMissingError(f"Aucun repère près de {points[far].tolist()} (distance {distances[far]:.2e})")

    frames = split.F_frames if which == 'unstable' else split.E_frames
    angles = angle_of(frames[idx, :, 0])
    logger.info(f"Relevé {which} de K: {len(points)} point(s)")
    return LiftedSet(base_points=points, angles=angles, which=which)


def lift_derivative_bound(smooth_map: SmoothMap, points: np.ndarray, radius: float, samples: int = 200,
                          seed: int = 0, step: float = HESSIAN_STEP) -> float:
    """
    Borne des dérivées secondes de f près de K par différences croisées.
    Le relèvement n'est C¹ que si f est C²: la borne est enregistrée, pas prouvée.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rng = make_rng(seed, stream=42)
    picks = rng.integers(0, len(points), size=samples)
    offsets = rng.uniform(-radius, radius, size=(samples, smooth_map.dim))
    x = np.vstack([points, points[picks] + offsets])

    bound = 0.0
    eye = np.eye(smooth_map.dim) * step
    for i in range(smooth_map.dim):
        for j in range(i, smooth_map.dim):
            mixed = (smooth_map.forward(x + eye[i] + eye[j]) - smooth_map.forward(x + eye[i] - eye[j])
                     - smooth_map.forward(x - eye[i] + eye[j]) + smooth_map.forward(x - eye[i] - eye[j]))
            bound = max(bound, float(np.max(np.abs(mixed))) / (4.0 * step ** 2))
    return bound
