"""
Exceptions de base communes à toutes les apps.
"""


class CenterManifoldException(Exception):
    """Exception de base pour toutes les erreurs du calcul de variétés centrales."""
    pass


class ConfigurationError(CenterManifoldException):
    """Exception levée pour une configuration invalide ou illisible."""
    pass
