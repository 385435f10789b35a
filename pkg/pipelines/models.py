"""
Modèles d'enregistrement des exécutions de pipelines.
"""

from django.db import models

from core.mixins import SerializableMixin, TimeStampedMixin


class PipelineRun(SerializableMixin, TimeStampedMixin, models.Model):
    """
    Une exécution de la commande run_pipeline.
    """

    STATUS_CHOICES = [
        ('running', 'En cours'),
        ('passed', 'Contrôles réussis'),
        ('failed', 'Contrôles échoués'),
        ('error', 'Erreur de configuration ou de convergence'),
    ]

    EXIT_CODES = {'passed': 0, 'failed': 1, 'error': 2}

    run_id = models.CharField(
        max_length=100,
        unique=True,
        verbose_name="ID d'exécution"
    )

    subcommand = models.CharField(
        max_length=20,
        verbose_name="Sous-commande"
    )

    system = models.CharField(
        max_length=100,
        verbose_name="Système"
    )

    seed = models.BigIntegerField(
        verbose_name="Graine"
    )

    workers = models.PositiveIntegerField(
        default=1,
        verbose_name="Threads"
    )

    config_hash = models.CharField(
        max_length=64,
        verbose_name="Empreinte SHA-256 de la configuration"
    )

    status = models.CharField(
        max_length=20,
        choices=STATUS_CHOICES,
        default='running',
        verbose_name="Statut"
    )

    message = models.TextField(
        blank=True,
        verbose_name="Diagnostic"
    )

    summary = models.JSONField(
        default=dict,
        blank=True,
        verbose_name="Résumé"
    )

    output_path = models.CharField(
        max_length=500,
        blank=True,
        verbose_name="Répertoire de sortie"
    )

    class Meta:
        verbose_name = "Exécution de pipeline"
        verbose_name_plural = "Exécutions de pipelines"
        ordering = ['-created_at']

    def __str__(self) -> str:
        return f"{self.subcommand} {self.system} ({self.run_id})"

    @property
    def exit_code(self) -> int:
        return self.EXIT_CODES.get(self.status, 2)

    @property
    def failed_checks(self):
        return list(self.checks.filter(passed=False).values_list('name', flat=True))


class CheckRecord(SerializableMixin, TimeStampedMixin, models.Model):
    """
    Verdict d'un contrôle numérique d'une exécution.
    """

    run = models.ForeignKey(
        PipelineRun,
        on_delete=models.CASCADE,
        related_name="checks",
        verbose_name="Exécution"
    )

    name = models.CharField(
        max_length=100,
        verbose_name="Contrôle"
    )

    passed = models.BooleanField(
        verbose_name="Réussi"
    )

    measured = models.FloatField(
        null=True,
        blank=True,
        verbose_name="Valeur mesurée"
    )

    tolerance = models.FloatField(
        null=True,
        blank=True,
        verbose_name="Tolérance"
    )

    class Meta:
        verbose_name = "Contrôle"
        verbose_name_plural = "Contrôles"
        ordering = ['run', 'name']
        unique_together = ['run', 'name']

    def __str__(self) -> str:
        verdict = 'OK' if self.passed else 'ÉCHEC'
        return f"{self.name}: {verdict}"
