"""
Exceptions personnalisées pour l'app dynamics.
"""

from core.exceptions import CenterManifoldException


class DynamicsException(CenterManifoldException):
    """Exception de base pour les erreurs liées aux applications."""
    pass


class MissingInverseError(DynamicsException):
    """Exception levée quand une itération négative est demandée sans inverse."""
    pass


class NonFiniteError(DynamicsException):
    """Exception levée quand une itération sort du domaine représentable."""
    pass


class SystemNotFoundError(DynamicsException):
    """Exception levée quand un système est absent du registre."""
    pass


class PolynomialSyntaxError(DynamicsException):
    """Exception levée pour une définition de polynôme illisible."""
    pass
