"""
Exceptions personnalisées pour l'app graph_transform.
"""

from core.exceptions import CenterManifoldException


class GraphTransformException(CenterManifoldException):
    """Exception de base pour la transformée de graphe."""
    pass


class PropertiesUnachievableError(GraphTransformException):
    """Exception levée quand le voisinage tubulaire ne vérifie pas les propriétés visées."""
    pass


class ProjectionFailureError(GraphTransformException):
    """Exception levée quand un point sort du voisinage tubulaire."""
    pass


class NoValidEpsilonError(GraphTransformException):
    """Exception levée quand aucun ε de l'échelle dyadique ne convient."""
    pass


class NewtonDivergenceError(GraphTransformException):
    """Exception levée quand la résolution en un nœud ne converge pas."""
    pass


class LipschitzViolationError(GraphTransformException):
    """Exception levée quand l'image d'un graphe sort de Lip_{m,β}."""
    pass


class NoContractionError(GraphTransformException):
    """Exception levée quand l'itération ne contracte plus."""
    pass


class LedgerViolationError(GraphTransformException):
    """Exception levée quand le registre des constantes viole une inégalité."""
    pass
