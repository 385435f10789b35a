"""
Exceptions personnalisées pour l'app smoothing.
"""

from core.exceptions import CenterManifoldException


class SmoothingException(CenterManifoldException):
    """Exception de base pour les fonctions de séparation."""
    pass


class LevelOverflowError(SmoothingException):
    """Exception levée quand le niveau dyadique maximal dépasse 40."""
    pass


class SetsIntersectError(SmoothingException):
    """Exception levée quand les deux ensembles à séparer se touchent."""
    pass


class BadRadiiError(SmoothingException):
    """Exception levée quand le rayon intérieur n'est pas inférieur au rayon extérieur."""
    pass


class DerivativeBoundExceededError(SmoothingException):
    """Exception levée quand la borne de dérivée n'est pas vérifiée sur l'échantillon."""
    pass
