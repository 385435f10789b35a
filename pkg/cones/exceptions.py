"""
Exceptions personnalisées pour l'app cones.
"""

from core.exceptions import CenterManifoldException


class ConesException(CenterManifoldException):
    """Exception de base pour les champs de cônes et les décompositions."""
    pass


class NoDominationError(ConesException):
    """Exception levée quand l'écart de valeurs singulières est insuffisant."""
    pass


class OrbitEscapeError(ConesException):
    """Exception levée quand une orbite sort de la région de travail."""
    pass
