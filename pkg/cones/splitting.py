"""
Estimation d'une décomposition dominée TM|_K = E ⊕ F sur un ensemble échantillonné.

F(x) est le sous-espace dominant du cocycle le long de l'orbite passée de x,
E(x) celui du cocycle inverse le long de l'orbite future.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional
import logging

import numpy as np
from scipy.linalg import subspace_angles

from dynamics.maps import SmoothMap, evaluate, jacobian_at
from dynamics.exceptions import MissingInverseError, NonFiniteError
from dynamics.topology import NeighborIndex

from .exceptions import NoDominationError, OrbitEscapeError
from .fields import ConeField

logger = logging.getLogger('cones')

DOMINATION_GAP = 1.05
TRANSVERSALITY_FLOOR = 1e-3
DEFAULT_ITERS = 30
SNAP_FLOOR = 1e-6
MIN_WINDOW = 8
FRAME_SEED = 31337


@dataclass
class SplittingFrame:
    """
    Décomposition estimée sur K.

    Attributes:
        points: K (N, n)
        E_frames: (N, n, d_E)
        F_frames: (N, n, d_F)
        lambda_E: borne d'expansion par pas sur E
        lambda_F: borne d'expansion par pas sur F
        C: constante transitoire mesurée
        invariance_residual: angle max entre Df·F(x) et F(f(x))
        min_angle: plus petit angle principal entre E et F
    """
    points: np.ndarray
    E_frames: np.ndarray
    F_frames: np.ndarray
    lambda_E: float
    lambda_F: float
    C: float
    invariance_residual: float
    min_angle: float

    @property
    def d_F(self) -> int:
        return self.F_frames.shape[2]

    @property
    def d_E(self) -> int:
        return self.E_frames.shape[2]

    def locate(self, x: np.ndarray, periods=None):
        """Indice du point de K le plus proche de x et sa distance."""
        distances, idx = NeighborIndex(self.points, periods).query(np.asarray(x, dtype=float))
        return int(idx), float(distances)

    def cone_field(self, opening: float, periods=None) -> ConeField:
        """Cône d'axe F et d'ouverture constante."""
        return ConeField.build(self.points, self.F_frames, opening, periods)

    def dual_cone_field(self, opening: float, periods=None) -> ConeField:
        """Cône d'axe E et d'ouverture constante."""
        return ConeField.build(self.points, self.E_frames, opening, periods)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': len(self.points),
            'd_E': self.d_E,
            'd_F': self.d_F,
            'lambda_E': self.lambda_E,
            'lambda_F': self.lambda_F,
            'C': self.C,
            'invariance_residual': self.invariance_residual,
            'min_angle': self.min_angle,
        }


def check_in_box(smooth_map: SmoothMap, x: np.ndarray, direction: str) -> None:
    if smooth_map.box is None:
        return
    for axis, period in enumerate(smooth_map.periods):
        if period:
            continue
        low, high = smooth_map.box[axis]
        margin = 1e-9 * max(high - low, 1.0)
        if np.any(x[..., axis] < low - margin) or np.any(x[..., axis] > high + margin):
            raise OrbitEscapeError(
                f"L'orbite {direction} sort de la région de travail de {smooth_map.name} (axe {axis})"
            )


def pseudo_orbit(smooth_map: SmoothMap, K: np.ndarray, steps: int,
                 min_steps: Optional[int] = None) -> list:
    """
    Orbites [x_0, x_{±1}, ...] des points de K; une image à moins de SNAP_FLOOR d'un
    point de K y est ramenée, ce qui stabilise les orbites périodiques échantillonnées.

    Si min_steps est fourni, l'orbite est tronquée au dernier pas resté dans la région
    de travail (au moins min_steps pas), sinon la sortie lève OrbitEscapeError.
    """
    K = np.atleast_2d(K)
    direction = 'passée' if steps < 0 else 'future'
    index = NeighborIndex(K, smooth_map.periods)
    tolerance = SNAP_FLOOR * max(1.0, float(np.max(np.abs(K))))
    points = [K]
    for k in range(abs(steps)):
        try:
            image = evaluate(smooth_map, points[-1], 1 if steps > 0 else -1)
            distances, nearest = index.query(image)
            image = np.where((distances <= tolerance)[:, None], K[nearest], image)
            check_in_box(smooth_map, image, direction)
        except (OrbitEscapeError, NonFiniteError):
            if min_steps is None or k < min_steps:
                raise OrbitEscapeError(
                    f"L'orbite {direction} de {smooth_map.name} quitte la région après {k} pas"
                )
            logger.warning(f"Orbite {direction} de {smooth_map.name} tronquée à {k} pas")
            break
        points.append(image)
    return points


def _initial_frame(n: int, d: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(FRAME_SEED + d)
    Q, _ = np.linalg.qr(rng.normal(size=(n, d)))
    return np.broadcast_to(Q, (count, n, d)).copy()


def _push_forward(jacobians: list, d: int) -> np.ndarray:
    """Pousse un repère générique par la suite de jacobiennes (N, n, n), avec QR."""
    count, n, _ = jacobians[0].shape
    Q = _initial_frame(n, d, count)
    for J in jacobians:
        Q, _ = np.linalg.qr(J @ Q)
    return Q


def _pull_back(jacobians: list, d: int) -> np.ndarray:
    """Pousse un repère par les inverses des jacobiennes, de la dernière à la première."""
    count, n, _ = jacobians[0].shape
    Q = _initial_frame(n, d, count)
    for J in reversed(jacobians):
        Q, _ = np.linalg.qr(np.linalg.solve(J, Q))
    return Q


def _principal_angles(A: np.ndarray, B: np.ndarray, smallest: bool) -> np.ndarray:
    angles = []
    for a, b in zip(A, B):
        theta = subspace_angles(a, b)
        angles.append(theta.min() if smallest else theta.max())
    return np.array(angles)


def estimate_splitting(smooth_map: SmoothMap, K: np.ndarray, d_F: int,
                       iters: int = DEFAULT_ITERS) -> SplittingFrame:
    """
    Estime E ⊕ F sur K par orthonormalisation itérée.

    Args:
        smooth_map: Application inversible
        K: Points de l'ensemble invariant (N, n)
        d_F: Dimension du fibré dominant
        iters: Longueur des fenêtres d'orbite

    Returns:
        SplittingFrame

    Raises:
        NoDominationError: écart de valeurs singulières < 1.05 par pas ou E, F non transverses
        OrbitEscapeError: une orbite sort de la région de travail
    """
    if not smooth_map.has_inverse:
        raise MissingInverseError(f"estimate_splitting exige l'inverse de {smooth_map.name}")

    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = smooth_map.dim
    if not 0 < d_F < n:
        raise NoDominationError(f"Dimension d_F={d_F} invalide en dimension {n}")

    past = pseudo_orbit(smooth_map, K, -iters, min_steps=MIN_WINDOW)[::-1]
    window = len(past) - 1
    past_jacobians = [jacobian_at(smooth_map, x) for x in past[:-1]]

    # Fenêtre passée: x_{-window} -> x
    F_frames = _push_forward(past_jacobians, d_F)
    # Fenêtre décalée d'un pas: x_{-window+1} -> f(x)
    shifted = past_jacobians[1:] + [jacobian_at(smooth_map, K)]
    F_next = _push_forward(shifted, d_F)

    future_points = pseudo_orbit(smooth_map, K, iters, min_steps=MIN_WINDOW)
    future_jacobians = [jacobian_at(smooth_map, x) for x in future_points[:-1]]
    E_frames = _pull_back(future_jacobians, n - d_F)

    count = len(K)
    product = np.broadcast_to(np.eye(n), (count, n, n)).copy()
    transient = 1.0
    partial = []
    for J in past_jacobians:
        product = J @ product
        partial.append(np.linalg.svd(product, compute_uv=False))
    singular = partial[-1]

    gap = (singular[:, d_F - 1] / singular[:, d_F]) ** (1.0 / window)
    if np.min(gap) < DOMINATION_GAP:
        raise NoDominationError(
            f"Écart de domination {np.min(gap):.4f} < {DOMINATION_GAP} pour {smooth_map.name}"
        )

    lambda_F = float(np.min(singular[:, d_F - 1]) ** (1.0 / window))
    lambda_E = float(np.max(singular[:, d_F]) ** (1.0 / window))
    for k, s in enumerate(partial, start=1):
        transient = max(
            transient,
            float(np.max(s[:, d_F] / lambda_E ** k)),
            float(np.max(lambda_F ** k / s[:, d_F - 1])),
        )

    pushed, _ = np.linalg.qr(jacobian_at(smooth_map, K) @ F_frames)
    residual = float(np.max(_principal_angles(pushed, F_next, smallest=False)))
    min_angle = float(np.min(_principal_angles(E_frames, F_frames, smallest=True)))
    if min_angle < TRANSVERSALITY_FLOOR:
        raise NoDominationError(f"E et F non transverses (angle {min_angle:.2e} rad)")

    logger.info(
        f"Décomposition de {smooth_map.name}: d_F={d_F}, λ_F={lambda_F:.4f}, "
        f"λ_E={lambda_E:.4f}, résidu={residual:.2e}"
    )
    return SplittingFrame(
        points=K,
        E_frames=E_frames,
        F_frames=F_frames,
        lambda_E=lambda_E,
        lambda_F=lambda_F,
        C=transient,
        invariance_residual=residual,
        min_angle=min_angle,
    )
