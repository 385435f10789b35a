"""
Exceptions spécifiques à l'app pipelines.
"""

from core.exceptions import CenterManifoldException, ConfigurationError


class PipelineException(CenterManifoldException):
    """Exception de base pour les pipelines."""
    pass


class UnknownSubcommandError(ConfigurationError):
    """Exception levée pour une sous-commande inconnue."""
    pass


class ConnectionBlockedError(PipelineException):
    """Exception levée quand une connexion forte interdit la transformée de graphe."""
    pass


class ChecksFailedError(PipelineException):
    """Exception levée quand au moins un contrôle d'un pipeline échoue."""

    def __init__(self, message: str, failed=None):
        super().__init__(message)
        self.failed = list(failed or [])
