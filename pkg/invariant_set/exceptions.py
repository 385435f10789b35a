"""
Exceptions personnalisées pour l'app invariant_set.
"""

from core.exceptions import CenterManifoldException


class InvariantSetException(CenterManifoldException):
    """Exception de base pour les ensembles invariants échantillonnés."""
    pass


class EmptyResultError(InvariantSetException):
    """Exception levée quand toutes les boîtes sont éliminées."""
    pass


class TooFewPointsError(InvariantSetException):
    """Exception levée quand une boule contient moins de deux points de K."""
    pass
