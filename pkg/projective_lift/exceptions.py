"""
Exceptions personnalisées pour l'app projective_lift.
"""

from core.exceptions import CenterManifoldException


class ProjectiveLiftException(CenterManifoldException):
    """Exception de base pour le relèvement projectif et les feuilletages."""
    pass


class EquivarianceError(ProjectiveLiftException):
    """Exception levée quand la projection du relevé ne commute pas avec f."""
    pass


class BunchingFailureError(ProjectiveLiftException):
    """Exception levée quand le cône central de f⁻¹ n'est pas pincé."""
    pass
