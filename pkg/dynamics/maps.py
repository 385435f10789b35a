"""
Applications lisses à temps discret: évaluation, inverse et jacobiennes.

Les fonctions forward/inverse/jacobian agissent sur des tableaux de forme (..., n)
et ne replient pas les coordonnées périodiques; le repliement est fait par evaluate.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple
import logging

import numpy as np

from .exceptions import MissingInverseError, NonFiniteError
from .topology import Periods, wrap

logger = logging.getLogger('dynamics')

FD_STEP = 1e-5


@dataclass(frozen=True)
class SmoothMap:
    """
    Difféomorphisme f de l'espace ambiant plat.

    Attributes:
        name: Identifiant
        dim: Dimension ambiante n
        forward: x -> f(x)
        inverse: y -> f^{-1}(y), optionnel
        jacobian: x -> Df(x), optionnel (différences finies sinon)
        periods: période par coordonnée (None pour une droite)
        box: région de travail, tableau (n, 2)
    """
    name: str
    dim: int
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    periods: Periods = field(default=())
    box: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.periods:
            object.__setattr__(self, 'periods', (None,) * self.dim)
        if self.box is not None:
            object.__setattr__(self, 'box', np.asarray(self.box, dtype=float).reshape(self.dim, 2))

    @property
    def has_inverse(self) -> bool:
        return self.inverse is not None

    @property
    def is_periodic(self) -> bool:
        return any(self.periods)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return wrap(x, self.periods)

    def inverse_map(self) -> 'SmoothMap':
        """Application inverse, avec jacobienne Df(f^{-1}(y))^{-1} si disponible."""
        if self.inverse is None:
            raise MissingInverseError(f"L'application {self.name} n'a pas d'inverse")

        jacobian = None
        if self.jacobian is not None:
            forward_jacobian, inverse = self.jacobian, self.inverse

            def jacobian(y):
                return np.linalg.inv(forward_jacobian(inverse(y)))

        return SmoothMap(
            name=f"{self.name}^-1",
            dim=self.dim,
            forward=self.inverse,
            inverse=self.forward,
            jacobian=jacobian,
            periods=self.periods,
            box=self.box,
        )

    def sample_box(self, rng: np.random.Generator, count: int, shrink: float = 1.0) -> np.ndarray:
        """Points uniformes dans la région de travail (éventuellement réduite)."""
        center = self.box.mean(axis=1)
        half = 0.5 * (self.box[:, 1] - self.box[:, 0]) * shrink
        return center + rng.uniform(-1.0, 1.0, size=(count, self.dim)) * half


def _check_finite(x: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"Valeur non finie pendant {context}")
    return x


def evaluate(smooth_map: SmoothMap, x: np.ndarray, steps: int = 1) -> np.ndarray:
    """
    Calcule f^steps(x), coordonnées repliées selon la topologie.

    Args:
        smooth_map: Application
        x: Point(s) de forme (..., n)
        steps: Nombre signé d'itérations

    Returns:
        Image de x
    """
    x = np.asarray(x, dtype=float)
    if steps < 0 and smooth_map.inverse is None:
        raise MissingInverseError(f"Itération négative impossible: {smooth_map.name} sans inverse")

    step = smooth_map.forward if steps >= 0 else smooth_map.inverse
    with np.errstate(over='ignore', invalid='ignore'):
        for k in range(abs(steps)):
            x = smooth_map.wrap(step(x))
            _check_finite(x, f"l'itération {k + 1} de {smooth_map.name}")
    return smooth_map.wrap(x) if steps == 0 else x


def orbit(smooth_map: SmoothMap, x: np.ndarray, steps: int) -> np.ndarray:
    """Segment d'orbite (x, f(x), ..., f^steps(x)); steps < 0 pour l'orbite passée."""
    points = [smooth_map.wrap(np.asarray(x, dtype=float))]
    for _ in range(abs(steps)):
        points.append(evaluate(smooth_map, points[-1], 1 if steps > 0 else -1))
    return np.stack(points)


def finite_difference_jacobian(func: Callable, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """
    Jacobienne par différences centrées, pas h = step·max(1, ‖x‖).

    Args:
        func: Application vectorisée (..., n) -> (..., m)
        x: Point(s) de forme (..., n)

    Returns:
        Tableau (..., m, n)
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = step * np.maximum(1.0, np.linalg.norm(x, axis=-1))[..., None]
    columns = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        columns.append((func(x + h * e) - func(x - h * e)) / (2.0 * h))
    return np.stack(columns, axis=-1)


def jacobian_at(smooth_map: SmoothMap, x: np.ndarray) -> np.ndarray:
    """Jacobienne analytique si fournie, sinon différences finies centrées."""
    x = _check_finite(np.asarray(x, dtype=float), "l'évaluation de la jacobienne")
    with np.errstate(over='ignore', invalid='ignore'):
        if smooth_map.jacobian is not None:
            jac = smooth_map.jacobian(x)
        else:
            jac = finite_difference_jacobian(smooth_map.forward, x)
    return _check_finite(np.asarray(jac, dtype=float), f"la jacobienne de {smooth_map.name}")


def cocycle(smooth_map: SmoothMap, points: np.ndarray) -> np.ndarray:
    """Produit Df(x_{k-1})···Df(x_0) le long d'un segment d'orbite (x_0, ..., x_k)."""
    product = np.eye(smooth_map.dim)
    for x in points[:-1]:
        product = jacobian_at(smooth_map, x) @ product
    return product


def newton_inverse(forward: Callable, jacobian: Callable, seed: Callable,
                   max_iter: int = 50, tol: float = 1e-14) -> Callable:
    """
    Construit un inverse vectorisé de forward par la méthode de Newton.

    Args:
        forward: x -> f(x)
        jacobian: x -> Df(x)
        seed: y -> point de départ (typiquement l'inverse linéarisé)

    Returns:
        Fonction y -> f^{-1}(y)
    """
    def inverse(y):
        y = np.asarray(y, dtype=float)
        x = np.array(seed(y), dtype=float)
        for _ in range(max_iter):
            residual = forward(x) - y
            if np.all(np.abs(residual) <= tol * np.maximum(1.0, np.abs(y))):
                break
            delta = np.linalg.solve(jacobian(x), residual[..., None])[..., 0]
            x = x - delta
        return x

    return inverse
