"""
Exceptions personnalisées pour l'app strong_manifolds.
"""

from core.exceptions import CenterManifoldException


class StrongManifoldsException(CenterManifoldException):
    """Exception de base pour les variétés fortement instables."""
    pass


class SplittingMissingError(StrongManifoldsException):
    """Exception levée quand aucun repère F n'est disponible au point de base."""
    pass


class DimensionUnsupportedError(StrongManifoldsException):
    """Exception levée pour une dimension de F supérieure à 2."""
    pass
