"""
Exceptions personnalisées pour l'app verify.
"""

from core.exceptions import CenterManifoldException


class VerifyException(CenterManifoldException):
    """Exception de base pour les vérifications a posteriori."""
    pass


class IntersectionDegenerateError(VerifyException):
    """Exception levée quand S^cs et S^cu sont presque tangentes le long de K."""
    pass


class StrongConnectionError(VerifyException):
    """Exception levée quand une connexion forte interdit la construction d'une surface."""
    pass
