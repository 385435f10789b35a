"""
Exceptions personnalisées pour l'app whitney_surface.
"""

from core.exceptions import CenterManifoldException


class WhitneySurfaceException(CenterManifoldException):
    """Exception de base pour la construction de la surface initiale."""
    pass


class ChartFailureError(WhitneySurfaceException):
    """Exception levée quand aucune carte adaptée ne vérifie l'injectivité verticale."""
    pass


class ResidualTooLargeError(WhitneySurfaceException):
    """Exception levée quand le quotient de Whitney dépasse la tolérance."""
    pass


class GraphObstructionError(WhitneySurfaceException):
    """Exception levée quand une surface n'est pas un graphe au-dessus d'une carte."""
    pass
