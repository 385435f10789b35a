"""
Registre des systèmes de test intégrés, avec leurs réponses analytiques connues.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from .exceptions import SystemNotFoundError
from .maps import SmoothMap, newton_inverse

logger = logging.getLogger('dynamics')

HENON_A, HENON_B = 6.0, 0.4
SADDLE_A, SADDLE_B = 1.4, 0.3
# Taux de la direction fortement dilatée du produit Hénon × droite.
# Doit dépasser la dilatation du fer à cheval, 12|x| entre 4 et 6 sur K.
FIBER_RATE = 20.0
COUPLING = 0.1
SERIES_TERMS = 25
HORSESHOE_BOUND = 2.0


@dataclass(frozen=True)
class SystemRegistryEntry:
    """
    Entrée du registre: application, graine de l'ensemble invariant et faits analytiques.
    """
    name: str
    map: SmoothMap
    known_set: Optional[np.ndarray] = None
    known_answers: Dict[str, Any] = field(default_factory=dict)


def henon_fixed_point(a: float, b: float) -> np.ndarray:
    """Point fixe droit de (x, y) -> (1 - a x² + y, b x)."""
    x = (b - 1.0 + np.sqrt((1.0 - b) ** 2 + 4.0 * a)) / (2.0 * a)
    return np.array([x, b * x])


def henon_period_two(a: float, b: float) -> np.ndarray:
    """Orbite de période 2 de (x, y) -> (1 - a x² + y, b x): x₁ + x₂ = (1 - b)/a."""
    s = (1.0 - b) / a
    p = (s ** 2 - (2.0 - (1.0 - b) * s) / a) / 2.0
    root = np.sqrt(s ** 2 - 4.0 * p)
    x1, x2 = (s + root) / 2.0, (s - root) / 2.0
    return np.array([[x1, b * x2], [x2, b * x1]])


def _henon_2d(name: str, a: float, b: float, box) -> SmoothMap:
    def forward(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([1.0 - a * x ** 2 + y, b * x], axis=-1)

    def inverse(p):
        X, Y = p[..., 0], p[..., 1]
        x = Y / b
        return np.stack([x, X - 1.0 + a * x ** 2], axis=-1)

    def jacobian(p):
        x = p[..., 0]
        jac = np.zeros(p.shape[:-1] + (2, 2))
        jac[..., 0, 0] = -2.0 * a * x
        jac[..., 0, 1] = 1.0
        jac[..., 1, 0] = b
        return jac

    return SmoothMap(name=name, dim=2, forward=forward, inverse=inverse, jacobian=jacobian, box=box)


def _henon_product(name: str, coupling: float) -> SmoothMap:
    a, b, rate = HENON_A, HENON_B, FIBER_RATE

    def forward(p):
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([1.0 - a * x ** 2 + y, b * x, rate * z + coupling * x ** 2], axis=-1)

    def inverse(p):
        X, Y, Z = p[..., 0], p[..., 1], p[..., 2]
        x = Y / b
        return np.stack([x, X - 1.0 + a * x ** 2, (Z - coupling * x ** 2) / rate], axis=-1)

    def jacobian(p):
        x = p[..., 0]
        jac = np.zeros(p.shape[:-1] + (3, 3))
        jac[..., 0, 0] = -2.0 * a * x
        jac[..., 0, 1] = 1.0
        jac[..., 1, 0] = b
        jac[..., 2, 0] = 2.0 * coupling * x
        jac[..., 2, 2] = rate
        return jac

    return SmoothMap(name=name, dim=3, forward=forward, inverse=inverse, jacobian=jacobian,
                     box=[[-2.0, 2.0], [-2.0, 2.0], [-1.0, 1.0]])


def series_graph(points: np.ndarray, terms: int = SERIES_TERMS, rate: float = FIBER_RATE,
                 coupling: float = COUPLING, a: float = HENON_A, b: float = HENON_B):
    """
    Graphe invariant z = ψ(x, y) du produit couplé, par la série
    ψ = −c·Σ_{k<=terms} rate^{−(k+1)} x_k², x_k première coordonnée de H^k(x, y).

    Une orbite numérique qui quitte [−2, 2]² est tronquée à sa sortie; le reste négligé
    est majoré par c·4·rate^{−(k+1)}/(1 − 1/rate).

    Args:
        points: Points (M, >= 2), seules les deux premières coordonnées comptent
        terms: Dernier indice k de la somme

    Returns:
        (valeurs ψ, majorants du reste tronqué)
    """
    xy = np.atleast_2d(np.asarray(points, dtype=float))[:, :2].copy()
    total = np.zeros(len(xy))
    tail = np.zeros(len(xy))
    alive = np.ones(len(xy), dtype=bool)
    ratio = 1.0 / (1.0 - 1.0 / rate)
    for k in range(terms + 1):
        weight = rate ** -(k + 1)
        inside = alive & np.all(np.abs(xy) <= HORSESHOE_BOUND, axis=1)
        tail[alive & ~inside] = HORSESHOE_BOUND ** 2 * weight * ratio
        alive = inside
        total[alive] += weight * xy[alive, 0] ** 2
        x, y = xy[alive, 0], xy[alive, 1]
        xy[alive] = np.column_stack([1.0 - a * x ** 2 + y, b * x])
    tail[alive] = HORSESHOE_BOUND ** 2 * rate ** -(terms + 2) * ratio
    return -coupling * total, coupling * tail


def linear_map(name: str, matrix, box, periods=()) -> SmoothMap:
    matrix = np.asarray(matrix, dtype=float)
    inverse_matrix = np.linalg.inv(matrix)
    return SmoothMap(
        name=name,
        dim=len(matrix),
        forward=lambda p: p @ matrix.T,
        inverse=lambda p: p @ inverse_matrix.T,
        jacobian=lambda p: np.broadcast_to(matrix, np.shape(p)[:-1] + matrix.shape).copy(),
        periods=periods,
        box=box,
    )


def _curved2() -> SmoothMap:
    def forward(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([x + x * y, 2.0 * y + x ** 2], axis=-1)

    def jacobian(p):
        x, y = p[..., 0], p[..., 1]
        jac = np.zeros(p.shape[:-1] + (2, 2))
        jac[..., 0, 0] = 1.0 + y
        jac[..., 0, 1] = x
        jac[..., 1, 0] = 2.0 * x
        jac[..., 1, 1] = 2.0
        return jac

    inverse = newton_inverse(forward, jacobian, seed=lambda q: q * np.array([1.0, 0.5]))
    return SmoothMap(name='curved2', dim=2, forward=forward, inverse=inverse, jacobian=jacobian,
                     box=[[-0.5, 0.5], [-0.5, 0.5]])


def _saddle3() -> SmoothMap:
    def forward(p):
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([0.2 * x + 0.1 * y ** 2, y, 5.0 * z + 0.1 * x * y], axis=-1)

    def inverse(p):
        X, Y, Z = p[..., 0], p[..., 1], p[..., 2]
        x = (X - 0.1 * Y ** 2) / 0.2
        return np.stack([x, Y, (Z - 0.1 * x * Y) / 5.0], axis=-1)

    def jacobian(p):
        x, y = p[..., 0], p[..., 1]
        jac = np.zeros(p.shape[:-1] + (3, 3))
        jac[..., 0, 0] = 0.2
        jac[..., 0, 1] = 0.2 * y
        jac[..., 1, 1] = 1.0
        jac[..., 2, 0] = 0.1 * y
        jac[..., 2, 1] = 0.1 * x
        jac[..., 2, 2] = 5.0
        return jac

    return SmoothMap(name='saddle3', dim=3, forward=forward, inverse=inverse, jacobian=jacobian,
                     box=[[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]])


def _solenoid() -> SmoothMap:
    two_pi = 2.0 * np.pi

    def forward(p):
        t, u, v = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([2.0 * t, 0.25 * u + 0.4 * np.cos(two_pi * t),
                         0.25 * v + 0.4 * np.sin(two_pi * t)], axis=-1)

    def inverse(p):
        t, u, v = p[..., 0], p[..., 1], p[..., 2]
        best = None
        for branch in (0.0, 0.5):
            theta = np.mod(t, 1.0) / 2.0 + branch
            pre_u = (u - 0.4 * np.cos(two_pi * theta)) / 0.25
            pre_v = (v - 0.4 * np.sin(two_pi * theta)) / 0.25
            candidate = np.stack([theta, pre_u, pre_v], axis=-1)
            if best is None:
                best = candidate
            else:
                closer = (pre_u ** 2 + pre_v ** 2) < (best[..., 1] ** 2 + best[..., 2] ** 2)
                best = np.where(closer[..., None], candidate, best)
        return best

    def jacobian(p):
        t = p[..., 0]
        jac = np.zeros(p.shape[:-1] + (3, 3))
        jac[..., 0, 0] = 2.0
        jac[..., 1, 0] = -0.4 * two_pi * np.sin(two_pi * t)
        jac[..., 1, 1] = 0.25
        jac[..., 2, 0] = 0.4 * two_pi * np.cos(two_pi * t)
        jac[..., 2, 2] = 0.25
        return jac

    return SmoothMap(name='solenoid', dim=3, forward=forward, inverse=inverse, jacobian=jacobian,
                     periods=(1.0, None, None), box=[[0.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]])


def solenoid_attractor_samples(count: int = 1500, depth: int = 30, seed: int = 7) -> np.ndarray:
    """Points de l'attracteur: images f^depth de points du tore plein (multiplication par 2 exacte)."""
    smooth_map = _solenoid()
    rng = np.random.default_rng(seed)
    points = np.column_stack([rng.uniform(0.0, 1.0, count), np.zeros(count), np.zeros(count)])
    for _ in range(depth):
        points = smooth_map.wrap(smooth_map.forward(points))
    return points


def builtin_registry() -> List[SystemRegistryEntry]:
    """
    Construit la liste des systèmes intégrés.

    Returns:
        Liste d'entrées aux noms uniques
    """
    saddle_point = henon_fixed_point(SADDLE_A, SADDLE_B)
    saddle_box = [[saddle_point[0] - 0.3, saddle_point[0] + 0.3],
                  [saddle_point[1] - 0.15, saddle_point[1] + 0.15]]
    golden = (1.0 + np.sqrt(5.0)) / 2.0

    entries = [
        SystemRegistryEntry(
            name='linear3',
            map=linear_map('linear3', np.diag([0.5, 1.0, 3.0]), [[-1.0, 1.0]] * 3),
            known_set=np.zeros((1, 3)),
            known_answers={
                'center_manifold': 'y-axis',
                'center_unstable_surface': 'z=0',
                'strong_dim': 1,
                'strong_rate': 3.0,
                'center_rates': [0.5, 1.0],
            },
        ),
        SystemRegistryEntry(
            name='curved2',
            map=_curved2(),
            known_set=np.zeros((1, 2)),
            known_answers={'h2': -2.0, 'strong_dim': 1, 'strong_rate': 2.0,
                           'center_graph': 'y = -x^2 + 2x^4 + O(x^6)'},
        ),
        SystemRegistryEntry(
            name='saddle3',
            map=_saddle3(),
            known_set=np.zeros((1, 3)),
            known_answers={'strong_dim': 1, 'stable_dim': 1,
                           'center_curve': 'x = y^2/8, z = -y^3/320',
                           'center_stable_graph': 'z = -xy/48 - y^3/1920',
                           'center_unstable_graph': 'x = y^2/8'},
        ),
        SystemRegistryEntry(
            name='henon_x_expand',
            map=_henon_product('henon_x_expand', 0.0),
            known_answers={'strong_dim': 1, 'strong_rate': FIBER_RATE, 'henon': (HENON_A, HENON_B),
                           'center_graph': 'z = 0'},
        ),
        SystemRegistryEntry(
            name='henon_x_expand_coupled',
            map=_henon_product('henon_x_expand_coupled', COUPLING),
            known_answers={'strong_dim': 1, 'strong_rate': FIBER_RATE, 'henon': (HENON_A, HENON_B),
                           'coupling': COUPLING, 'series_terms': SERIES_TERMS},
        ),
        SystemRegistryEntry(
            name='henon_horseshoe2',
            map=_henon_2d('henon_horseshoe2', HENON_A, HENON_B, [[-2.0, 2.0], [-2.0, 2.0]]),
            known_answers={'henon': (HENON_A, HENON_B)},
        ),
        SystemRegistryEntry(
            name='solenoid',
            map=_solenoid(),
            known_set=solenoid_attractor_samples(),
            known_answers={'strong_dim': 1, 'strong_rate': 2.0, 'strong_connection': True},
        ),
        SystemRegistryEntry(
            name='cat_linear',
            map=linear_map('cat_linear', [[2.0, 1.0], [1.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]],
                        periods=(1.0, 1.0)),
            known_set=np.zeros((1, 2)),
            known_answers={
                'unstable_eigenvalue': golden ** 2,
                'unstable_angle': float(np.arctan(golden - 1.0)),
                'stable_angle': float(np.mod(np.arctan(-golden), np.pi)),
            },
        ),
        SystemRegistryEntry(
            name='henon_saddle',
            map=_henon_2d('henon_saddle', SADDLE_A, SADDLE_B, saddle_box),
            known_set=saddle_point[None, :],
            known_answers={'fixed_point': saddle_point.tolist(), 'henon': (SADDLE_A, SADDLE_B)},
        ),
    ]
    return entries


def lookup(name: str, registry: Optional[List[SystemRegistryEntry]] = None) -> SystemRegistryEntry:
    """
    Recherche une entrée du registre par son nom.

    Raises:
        SystemNotFoundError: si le nom est inconnu
    """
    for entry in registry if registry is not None else builtin_registry():
        if entry.name == name:
            return entry
    raise SystemNotFoundError(f"Système inconnu: {name}")
