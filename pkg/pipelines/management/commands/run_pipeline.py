"""
Commande Django pour lancer un pipeline de calcul de surface localement invariante.

Usage:
    python manage.py run_pipeline invariant --config=runs/curved2.ini --out=output/curved2
    python manage.py run_pipeline connections --system=solenoid --seed=7 --workers=4
    python manage.py run_pipeline foliate --config=runs/cat.ini --tol-override holonomy=1e-6

Codes de sortie: 0 si tous les contrôles passent, 1 si un contrôle échoue,
2 pour une erreur de configuration ou de convergence.
"""

import math
from typing import Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import CenterManifoldException, ConfigurationError
from pipelines.config import SUBCOMMANDS, RunConfig, load_config
from pipelines.manager import BLOCKING_VERDICTS, PipelineManager
from pipelines.models import CheckRecord, PipelineRun


class Command(BaseCommand):
    """
    Commande de gestion Django exécutant une sous-commande de pipeline.
    """

    help = 'Lance un pipeline (analyse, connexions, surface, transformée de graphe, vérification...)'

    def add_arguments(self, parser):
        """Définit les arguments de la commande."""
        parser.add_argument(
            'subcommand',
            choices=SUBCOMMANDS,
            help=f'Pipeline à exécuter. Disponibles: {", ".join(SUBCOMMANDS)}'
        )

        parser.add_argument(
            '--config',
            type=str,
            help='Fichier de configuration INI (défaut: toutes les valeurs par défaut)'
        )

        parser.add_argument(
            '--out',
            type=str,
            help=f'Répertoire de sortie (défaut: {settings.CM_OUTPUT_DIR}/<système>)'
        )

        parser.add_argument(
            '--seed',
            type=int,
            help='Graine 64 bits, prioritaire sur [run] seed'
        )

        parser.add_argument(
            '--workers',
            type=int,
            help=f'Nombre de threads (défaut: {settings.CM_DEFAULT_WORKERS})'
        )

        parser.add_argument(
            '--tol-override',
            action='append',
            default=[],
            metavar='KEY=VALUE',
            help='Surcharge une clé de [tolerances] (répétable)'
        )

        parser.add_argument(
            '--system',
            type=str,
            help='Système du registre, prioritaire sur [run] system'
        )

        parser.add_argument(
            '--force',
            action='store_true',
            help='Lance la transformée de graphe même si une connexion forte est détectée'
        )

        parser.add_argument(
            '--no-save',
            action='store_true',
            help="Ne pas enregistrer l'exécution en base de données"
        )

    def handle(self, *args, **options):
        """Exécute la commande."""
        try:
            config = load_config(
                options['config'],
                seed=options['seed'],
                workers=options['workers'],
                overrides=options['tol_override'],
                system=options['system'],
            )
        except ConfigurationError as e:
            self.stdout.write(self.style.ERROR(f"Configuration invalide: {e}"))
            raise CommandError(f"Configuration invalide: {e}", returncode=2)

        self._display_config(options['subcommand'], config)

        manager = PipelineManager(config, output_dir=options['out'], force=options['force'])
        pipeline_run = None
        if not options['no_save']:
            pipeline_run = self._create_pipeline_run(options['subcommand'], config, manager)

        try:
            manager.run(options['subcommand'])

        except BLOCKING_VERDICTS as e:
            self._finalize_pipeline_run(pipeline_run, manager)
            self._display_results(manager)
            self.stdout.write(self.style.WARNING(f"Échec: {e}"))
            raise CommandError(f"{options['subcommand']}: {e}", returncode=1)

        except CenterManifoldException as e:
            self._finalize_pipeline_run(pipeline_run, manager)
            self.stdout.write(self.style.ERROR(f"Erreur ({type(e).__module__}.{type(e).__name__}): {e}"))
            raise CommandError(f"{options['subcommand']}: {e}", returncode=2)

        except Exception as e:
            manager.status, manager.message = 'error', f"{type(e).__name__}: {e}"
            self._finalize_pipeline_run(pipeline_run, manager)
            self.stdout.write(self.style.ERROR(f"Erreur inattendue: {e}"))
            raise CommandError(f"Échec du pipeline: {e}", returncode=2)

        self._finalize_pipeline_run(pipeline_run, manager)
        self._display_results(manager)
        self.stdout.write(
            self.style.SUCCESS(f"Pipeline {options['subcommand']} terminé: tous les contrôles sont passés")
        )

    def _display_config(self, subcommand: str, config: RunConfig):
        """Affiche la configuration de l'exécution."""
        self.stdout.write(self.style.HTTP_INFO("=== Configuration du pipeline ==="))
        self.stdout.write(f"Sous-commande: {subcommand}")
        self.stdout.write(f"Système: {config.system} (dimension {config.entry.map.dim})")
        self.stdout.write(f"Graine: {config.seed}")
        self.stdout.write(f"Threads: {config.workers}")
        self.stdout.write(f"Empreinte: {config.content_hash}")
        self.stdout.write("")

    def _create_pipeline_run(self, subcommand: str, config: RunConfig, manager: PipelineManager) -> PipelineRun:
        """Crée l'enregistrement PipelineRun."""
        pipeline_run = PipelineRun.objects.create(
            run_id=manager.id,
            subcommand=subcommand,
            system=config.system,
            seed=config.seed,
            workers=config.workers,
            config_hash=config.content_hash,
            status='running',
            output_path=str(manager.output_dir),
        )
        self.stdout.write(f"Exécution enregistrée: {pipeline_run.run_id}")
        return pipeline_run

    def _finalize_pipeline_run(self, pipeline_run: Optional[PipelineRun], manager: PipelineManager):
        """Finalise l'enregistrement: statut, résumé et verdicts des contrôles."""
        if pipeline_run is None:
            return
        try:
            pipeline_run.status = manager.status if manager.status != 'running' else 'error'
            pipeline_run.message = manager.message
            pipeline_run.summary = manager.summary.to_dict()
            pipeline_run.save()

            reports = {report.name: report for report in manager.summary.reports}
            for name, report in sorted(reports.items()):
                CheckRecord.objects.update_or_create(
                    run=pipeline_run,
                    name=name,
                    defaults={
                        'passed': report.passed,
                        'measured': report.measured if math.isfinite(report.measured) else None,
                        'tolerance': report.tolerance if math.isfinite(report.tolerance) else None,
                    },
                )
        except Exception as e:
            self.stdout.write(self.style.WARNING(f"Erreur lors de la finalisation: {e}"))

    def _display_results(self, manager: PipelineManager):
        """Affiche les verdicts des contrôles."""
        self.stdout.write(self.style.HTTP_INFO("\n=== Contrôles ==="))
        for report in manager.summary.reports:
            verdict = self.style.SUCCESS('OK') if report.passed else self.style.ERROR('ÉCHEC')
            self.stdout.write(f"{report.name}: {verdict} (mesuré {report.measured:.3e}, "
                              f"tolérance {report.tolerance:.3e})")
        self.stdout.write(f"Artefacts: {manager.output_dir}")
