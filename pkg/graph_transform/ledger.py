"""
Registre des constantes de la transformée de graphe et de leurs inégalités.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from cones.splitting import SplittingFrame

logger = logging.getLogger('graph_transform')

DEFAULT_BETA = 0.08
DEFAULT_DELTA = 0.01
LAMBDA_FRACTION = 0.25
DEFAULT_RHO = 1.0 + 1e-6


@dataclass(frozen=True)
class ConstantsLedger:
    """
    Constantes (λ₀, η, β, δ, γ, ρ, β̄) puis, une fois m choisi, ε(m) et c_f.

    Attributes:
        lambda0: expansion verticale minimale
        eta: fuite horizontale maximale d'un vecteur vertical
        beta: ouverture du cône horizontal
        delta: distorsion horizontale
        gamma: facteur de contraction le long des fibres
        rho: facteur de Lipschitz de la multiplication dans les fibres
        beta_bar: ouverture du cône tiré en arrière
        m: hauteur maximale des graphes
        epsilon: rayon ε(m) de la bosse
        c_f: borne sur ‖Df‖ et ‖Df⁻¹‖
    """
    lambda0: float
    eta: float
    beta: float
    delta: float
    gamma: float
    rho: float
    beta_bar: float
    m: Optional[float] = None
    epsilon: Optional[float] = None
    c_f: Optional[float] = None

    @property
    def bump_bound(self) -> Optional[float]:
        """Borne de la dérivée de la bosse φ_m: 4/(ε/2)."""
        if self.epsilon is None:
            return None
        return 8.0 / self.epsilon

    def with_scale(self, m: float, epsilon: float, c_f: float) -> 'ConstantsLedger':
        return replace(self, m=m, epsilon=epsilon, c_f=c_f)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['bump_bound'] = self.bump_bound
        return data


@dataclass
class LedgerVerdict:
    """Résultat de validate_ledger: vrai si aucune inégalité n'est violée."""
    passed: bool
    violated: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def cone_bound(lambda0: float, eta: float) -> float:
    """(λ₀ − 2η)/(6η), +∞ si η = 0."""
    if eta == 0.0:
        return float('inf')
    return (lambda0 - 2.0 * eta) / (6.0 * eta)


def validate_ledger(ledger: ConstantsLedger) -> LedgerVerdict:
    """
    Vérifie les inégalités du registre et nomme celles qui sont violées.

    Args:
        ledger: Constantes à contrôler

    Returns:
        LedgerVerdict
    """
    lam, eta, beta, delta = ledger.lambda0, ledger.eta, ledger.beta, ledger.delta
    gamma, rho, beta_bar = ledger.gamma, ledger.rho, ledger.beta_bar
    effective = lam - 4.0 * eta * (1.0 + beta)

    checks = [
        ('β<(λ₀−2η)/(6η)', beta < cone_bound(lam, eta)),
        ('λ₀−4η(1+β)>1', effective > 1.0),
        ('β+δ<1/10', beta + delta < 0.1),
        ('(λ₀−4η(1+β))⁻¹<γ<1', effective > 0.0 and 1.0 / effective < gamma < 1.0),
        ('γρ<1', gamma * rho < 1.0),
        ('β/λ₀<β̄<β', beta / lam < beta_bar < beta),
        ('β,δ∈(0,1/2)', 0.0 < beta < 0.5 and 0.0 < delta < 0.5),
    ]
    violated = [name for name, holds in checks if not holds]
    if violated:
        logger.warning(f"Registre des constantes invalide: {', '.join(violated)}")
    return LedgerVerdict(passed=not violated, violated=violated)


def default_targets(split: SplittingFrame, beta: float = DEFAULT_BETA,
                    delta: float = DEFAULT_DELTA) -> Dict[str, float]:
    """
    Cibles (λ₀, η, β, δ) du voisinage tubulaire déduites des taux de la décomposition.

    λ₀ = 1 + (min(λ_F, λ_F/λ_E) − 1)/4, η = (λ₀ − 1)/10.
    """
    ratio = split.lambda_F / split.lambda_E if split.lambda_E > 0.0 else np.inf
    lambda0 = 1.0 + LAMBDA_FRACTION * (min(split.lambda_F, ratio) - 1.0)
    return {'lambda0': float(lambda0), 'eta': float((lambda0 - 1.0) / 10.0),
            'beta': float(beta), 'delta': float(delta)}


def choose_ledger(targets: Dict[str, float], rho: float = DEFAULT_RHO) -> ConstantsLedger:
    """
    Complète les cibles par γ et β̄ pris au milieu de leurs intervalles admissibles.
    """
    lam, eta, beta = targets['lambda0'], targets['eta'], targets['beta']
    effective = lam - 4.0 * eta * (1.0 + beta)
    gamma = 0.5 * (1.0 / effective + 1.0 / rho) if effective > 0.0 else float('nan')
    return ConstantsLedger(lambda0=lam, eta=eta, beta=beta, delta=targets['delta'], gamma=gamma,
                           rho=rho, beta_bar=0.5 * (beta / lam + beta))
