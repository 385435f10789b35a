"""
Applications polynomiales définies par l'utilisateur dans le fichier de configuration.

Chaque coordonnée image est une somme de termes `c:e1:...:en` séparés par `;`.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import PolynomialSyntaxError
from .maps import SmoothMap


@dataclass(frozen=True)
class Polynomial:
    """Polynôme à n variables: coefficients (m,) et exposants (m, n)."""
    coefficients: np.ndarray
    exponents: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.coefficients) == 0:
            return np.zeros(x.shape[:-1])
        monomials = np.prod(x[..., None, :] ** self.exponents, axis=-1)
        return monomials @ self.coefficients

    def derivative(self, axis: int) -> 'Polynomial':
        powers = self.exponents[:, axis]
        keep = powers > 0
        exponents = self.exponents[keep].copy()
        exponents[:, axis] -= 1
        return Polynomial(self.coefficients[keep] * powers[keep], exponents)


def parse_polynomial(text: str, dim: int) -> Polynomial:
    """
    Lit un polynôme `c:e1:...:en; c:e1:...:en`.

    Args:
        text: Définition textuelle
        dim: Nombre de variables

    Returns:
        Polynomial
    """
    coefficients, exponents = [], []
    for term in filter(None, (t.strip() for t in text.split(';'))):
        parts = term.split(':')
        if len(parts) != dim + 1:
            raise PolynomialSyntaxError(f"Terme '{term}': {dim} exposants attendus")
        try:
            coefficients.append(float(parts[0]))
            powers = [int(p) for p in parts[1:]]
        except ValueError as e:
            raise PolynomialSyntaxError(f"Terme '{term}' illisible: {e}") from e
        if min(powers) < 0:
            raise PolynomialSyntaxError(f"Terme '{term}': exposant négatif")
        exponents.append(powers)
    return Polynomial(np.array(coefficients, dtype=float),
                      np.array(exponents, dtype=int).reshape(-1, dim))


class PolynomialField:
    """Champ polynomial R^n -> R^n avec jacobienne exacte."""

    def __init__(self, components: Sequence[Polynomial]):
        self.components = list(components)
        self.dim = len(self.components)
        self.partials: List[List[Polynomial]] = [
            [p.derivative(j) for j in range(self.dim)] for p in self.components
        ]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.stack([p(x) for p in self.components], axis=-1)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        rows = [np.stack([d(x) for d in row], axis=-1) for row in self.partials]
        return np.stack(rows, axis=-2)


def polynomial_map(name: str, forward: Dict[str, str], dim: int, box: Sequence[float],
                   inverse: Optional[Dict[str, str]] = None) -> SmoothMap:
    """
    Construit une SmoothMap à partir des sections [system] et [system.inverse].

    Args:
        name: Nom du système
        forward: {'f0': ..., 'f1': ...}
        dim: Dimension
        box: Bornes (2·dim valeurs)
        inverse: Définition optionnelle de l'inverse
    """
    def build(terms: Dict[str, str]) -> PolynomialField:
        missing = [f"f{i}" for i in range(dim) if f"f{i}" not in terms]
        if missing:
            raise PolynomialSyntaxError(f"Composantes manquantes: {', '.join(missing)}")
        return PolynomialField([parse_polynomial(terms[f"f{i}"], dim) for i in range(dim)])

    if len(box) != 2 * dim:
        raise PolynomialSyntaxError(f"La boîte doit contenir {2 * dim} bornes")

    field = build(forward)
    inverse_field = build(inverse) if inverse else None
    return SmoothMap(
        name=name,
        dim=dim,
        forward=field,
        inverse=inverse_field,
        jacobian=field.jacobian,
        box=np.asarray(box, dtype=float).reshape(dim, 2),
    )
