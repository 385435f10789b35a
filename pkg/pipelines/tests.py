"""
Tests pour l'app pipelines.
"""

import shutil
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from core.exceptions import ConfigurationError
from core.utils import load_csv, load_json
from dynamics.registry import HENON_A, HENON_B, henon_fixed_point, henon_period_two, series_graph
from graph_transform.exceptions import NoContractionError
from strong_manifolds.connections import ConnectionReport

from .config import load_config, parse_overrides
from .exceptions import ChecksFailedError, ConnectionBlockedError, UnknownSubcommandError
from .manager import PipelineManager, spread_indices
from .models import CheckRecord, PipelineRun
from .plots import plot_profile

CONNECTED = ConnectionReport(resolution=0.01, delta=0.03, exclusion=0.06, radius=0.2,
                             per_point=[{'offenders': [{'pair_criterion': True}]}])

CURVED2_INI = """
[run]
system = curved2

[surface]
radius = 0.2

[transform]
spacing = 1e-3
lambda0 = 1.25
eta = 0.025
beta = 0.08
delta = 0.01
"""

COUPLED_INI = """
[run]
system = henon_x_expand_coupled
points = {points}

[surface]
radius = 0.05

[transform]
spacing = 5e-3

[tolerances]
series = 1e-5
"""

POLYNOMIAL_INI = """
[system]
name = scaled
dim = 2
box = -1, 1, -1, 1
f0 = 0.5:1:0
f1 = 2:0:1

[system.inverse]
f0 = 2:1:0
f1 = 0.5:0:1
"""


class TemporaryDirectoryMixin:
    """Répertoire de travail temporaire supprimé après chaque test."""

    def make_workdir(self) -> Path:
        path = Path(tempfile.mkdtemp(prefix='cm_test_'))
        self.addCleanup(shutil.rmtree, path, ignore_errors=True)
        return path

    def write_config(self, text: str, name: str = 'run.ini') -> Path:
        path = self.make_workdir() / name
        path.write_text(text, encoding='utf-8')
        return path


class ConfigTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Tests du chargement de la configuration."""

    def test_defaults(self):
        """Test: sans fichier, toutes les valeurs par défaut."""
        config = load_config()
        assert config.system == 'linear3'
        assert config.seed == settings.CM_DEFAULT_SEED
        assert config.workers == settings.CM_DEFAULT_WORKERS
        assert config.tolerances['tangency'] == 1e-3
        assert config.section('analyze')['n0'] == 10
        assert config.section('verify')['ladder'] == [1e-2, 1e-3, 1e-4]
        assert config.targets() is None

    def test_sections_are_read(self):
        """Test: valeurs typées lues section par section."""
        config = load_config(self.write_config(CURVED2_INI))
        assert config.system == 'curved2'
        assert config.section('transform')['spacing'] == 1e-3
        assert config.targets() == {'lambda0': 1.25, 'eta': 0.025, 'beta': 0.08, 'delta': 0.01}
        assert config.entry.map.name == 'curved2'

    def test_seed_and_workers_from_command_line(self):
        """Test: la graine et les threads de la ligne de commande priment sur le fichier."""
        path = self.write_config("[run]\nseed = 5\nworkers = 3\n")
        assert load_config(path).seed == 5
        config = load_config(path, seed=11, workers=2)
        assert (config.seed, config.workers) == (11, 2)

    def test_hash_ignores_file_location(self):
        """Test: même contenu à deux emplacements, même empreinte; une tolérance la change."""
        first = load_config(self.write_config(CURVED2_INI))
        second = load_config(self.write_config(CURVED2_INI))
        assert first.content_hash == second.content_hash
        assert len(first.content_hash) == 64
        changed = load_config(self.write_config(CURVED2_INI), overrides=['h2=1e-5'])
        assert changed.content_hash != first.content_hash

    def test_tolerance_override(self):
        """Test: --tol-override patche [tolerances]."""
        config = load_config(overrides=['holonomy=1e-6', 'invariance=1e-10'])
        assert config.tolerances['holonomy'] == 1e-6
        assert config.tolerances['invariance'] == 1e-10
        assert parse_overrides([]) == {}

    def test_bad_overrides(self):
        """Test: clé inconnue, forme invalide ou valeur non numérique."""
        for override in (['unknown=1'], ['holonomy'], ['holonomy=abc']):
            with pytest.raises(ConfigurationError):
                parse_overrides(override)

    def test_malformed_files(self):
        """Test: fichier sans section, valeur non convertible, section ou système inconnus."""
        for text in ("system = linear3\n", "[analyze]\nn0 = ten\n", "[plots]\ndpi = 3\n",
                     "[run]\nsystem = lorenz\n", "[verify]\nrobustness = maybe\n", "[run]\nset = cloud\n"):
            with pytest.raises(ConfigurationError):
                load_config(self.write_config(text))

    def test_missing_file(self):
        """Test: fichier absent."""
        with pytest.raises(ConfigurationError):
            load_config(self.make_workdir() / 'absent.ini')

    def test_incomplete_targets(self):
        """Test: cibles du tube partiellement renseignées."""
        config = load_config(self.write_config("[transform]\nlambda0 = 1.5\n"))
        with pytest.raises(ConfigurationError):
            config.targets()

    def test_polynomial_system(self):
        """Test: application polynomiale définie dans le fichier, avec son inverse."""
        config = load_config(self.write_config(POLYNOMIAL_INI))
        smooth_map = config.entry.map
        assert config.system == 'scaled'
        assert np.allclose(smooth_map.forward(np.array([[1.0, 1.0]])), [[0.5, 2.0]])
        assert np.allclose(smooth_map.inverse(np.array([[0.5, 2.0]])), [[1.0, 1.0]])
        assert np.allclose(smooth_map.jacobian(np.zeros((1, 2))), [[[0.5, 0.0], [0.0, 2.0]]])

    def test_polynomial_syntax_error(self):
        """Test: terme mal formé dans [system]."""
        with pytest.raises(ConfigurationError):
            load_config(self.write_config(POLYNOMIAL_INI.replace('f1 = 2:0:1', 'f1 = 2:0')))

    def test_system_flag(self):
        """Test: --system remplace [run] system."""
        assert load_config(system='cat_linear').entry.map.name == 'cat_linear'


class ManagerTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Tests du gestionnaire de pipelines."""

    def manager(self, subdir='out', **kwargs):
        config = load_config(**kwargs)
        return PipelineManager(config, output_dir=self.make_workdir() / subdir)

    def test_spread_indices(self):
        """Test: indices régulièrement espacés, tous si peu nombreux."""
        assert spread_indices(10, 4) == [0, 3, 6, 9]
        assert spread_indices(3, 5) == [0, 1, 2]

    def test_analyze_linear3(self):
        """Test: cône fort de linear3 contracté avec λ ≈ 3, cône dual aussi."""
        manager = self.manager()
        manifest = manager.run('analyze')
        assert manifest['status'] == 'passed'
        assert manifest['exit_code'] == 0
        assert manager.results['analyze']['lambda'] >= 2.9
        assert manager.results['analyze']['dual_lambda'] > 1.0
        assert manifest['artifacts'] == ['analyze.json', 'manifest.json']
        report = load_json(manager.output_dir / 'analyze.json')
        assert report['contraction']['passed']

    def test_connections_linear3(self):
        """Test: aucune connexion sur K = {0}."""
        manager = self.manager()
        manager.run('connections')
        assert manager.results['connections'] == {'unstable': False}
        assert manager.summary.passed

    def test_reports_are_deterministic(self):
        """Test: même configuration et même graine, JSON identiques à l'octet près."""
        first = self.manager(seed=3)
        second = self.manager(seed=3)
        first.run('analyze')
        second.run('analyze')
        for name in ('analyze.json', 'manifest.json'):
            assert (first.output_dir / name).read_bytes() == (second.output_dir / name).read_bytes()

    def test_smoothing_demo(self):
        """Test: séparateur entre {−2} et {2}, niveaux exacts et gradient borné."""
        path = self.write_config("[smoothing]\nsamples = 20000\nplot_points = 101\n")
        manager = PipelineManager(load_config(path), output_dir=self.make_workdir())
        manager.run('smooth-fn')
        report = manager.results['smoothing']
        assert report['separation'] == pytest.approx(4.0)
        assert report['level_error'] <= 1e-12
        assert report['measured_gradient'] * report['separation'] <= report['constant']
        assert set(report['cover']) == {'K', 'L'}
        assert report['cover']['K'] and set(report['cover']['K'][0]) == {'level', 'center'}
        header, rows = load_csv(manager.output_dir / 'separator.csv')
        assert header == ['x', 'phi', 'dphi']
        assert rows.shape == (101, 3)
        assert (manager.output_dir / 'separator.svg').is_file()

    def test_unknown_subcommand(self):
        """Test: sous-commande inconnue."""
        with pytest.raises(UnknownSubcommandError):
            self.manager().run('simulate')

    def test_verify_without_saved_graph(self):
        """Test: verify sans graphe enregistré, erreur de configuration et manifeste 'error'."""
        manager = self.manager()
        with pytest.raises(ConfigurationError):
            manager.run('verify')
        manifest = load_json(manager.output_dir / 'manifest.json')
        assert manifest['status'] == 'error'
        assert manifest['exit_code'] == 2

    def test_connection_blocks_transform(self):
        """Test: connexion détectée, la transformée de graphe n'est jamais lancée."""
        manager = self.manager()
        with patch('pipelines.manager.detect_connection', return_value=CONNECTED), \
                patch('pipelines.manager.build_center_graph') as transform:
            with pytest.raises(ConnectionBlockedError):
                manager.run('invariant')
        transform.assert_not_called()
        assert manager.manifest['status'] == 'failed'
        assert manager.manifest['ledger'] is None
        assert 'graph.csv' not in manager.manifest['artifacts']

    def test_forced_transform_reports_failure(self):
        """Test: --force lance la transformée, dont l'échec remonte tel quel."""
        manager = PipelineManager(load_config(), output_dir=self.make_workdir(), force=True)
        with patch('pipelines.manager.detect_connection', return_value=CONNECTED), \
                patch('pipelines.manager.build_center_graph', side_effect=NoContractionError('γ > 1')) as transform:
            with pytest.raises(NoContractionError):
                manager.run('invariant')
        transform.assert_called_once()
        assert manager.manifest['status'] == 'error'


class PipelineRunModelTest(TestCase):
    """Tests des modèles d'enregistrement."""

    def setUp(self):
        """Initialisation des données de test."""
        self.run = PipelineRun.objects.create(
            run_id='pipeline_test', subcommand='analyze', system='linear3', seed=1,
            config_hash='0' * 64, status='failed',
        )
        CheckRecord.objects.create(run=self.run, name='cone_contraction', passed=True, measured=3.0, tolerance=1.0)
        CheckRecord.objects.create(run=self.run, name='dual_cone_contraction', passed=False, measured=0.5,
                                   tolerance=1.0)

    def test_exit_code(self):
        """Test: statut -> code de sortie."""
        assert self.run.exit_code == 1
        self.run.status = 'error'
        assert self.run.exit_code == 2
        self.run.status = 'passed'
        assert self.run.exit_code == 0

    def test_failed_checks(self):
        """Test: liste des contrôles en échec."""
        assert self.run.failed_checks == ['dual_cone_contraction']
        assert str(self.run.checks.get(name='cone_contraction')) == 'cone_contraction: OK'

    def test_to_dict_without_timestamps(self):
        """Test: sérialisation sans horodatage, clés triées."""
        data = self.run.to_dict(exclude=PipelineRun.TIMESTAMP_FIELDS)
        assert 'created_at' not in data and 'updated_at' not in data
        assert list(data) == sorted(data)
        assert data['system'] == 'linear3'


class RunPipelineCommandTest(TemporaryDirectoryMixin, TestCase):
    """Tests de la commande run_pipeline."""

    def call(self, *args, **options):
        options.setdefault('stdout', StringIO())
        return call_command('run_pipeline', *args, **options)

    def test_malformed_config_exits_2(self):
        """Test: configuration mal formée, code 2 et aucune exécution enregistrée."""
        path = self.write_config("[analyze]\nn0 = ten\n")
        with pytest.raises(CommandError) as error:
            self.call('analyze', config=str(path), out=str(self.make_workdir()))
        assert error.value.returncode == 2
        assert PipelineRun.objects.count() == 0

    def test_bad_override_exits_2(self):
        """Test: surcharge de tolérance inconnue."""
        with pytest.raises(CommandError) as error:
            self.call('analyze', tol_override=['speed=1'], out=str(self.make_workdir()))
        assert error.value.returncode == 2

    def test_analyze_records_run(self):
        """Test: exécution réussie enregistrée avec ses contrôles."""
        out = self.make_workdir()
        stdout = StringIO()
        self.call('analyze', out=str(out), seed=7, stdout=stdout)
        run = PipelineRun.objects.get()
        assert run.status == 'passed'
        assert run.seed == 7
        assert run.output_path == str(out)
        assert run.checks.get(name='cone_contraction').passed
        assert 'tous les contrôles sont passés' in stdout.getvalue()
        assert (out / 'manifest.json').is_file()

    def test_connection_exits_1(self):
        """Test: connexion forte détectée, code 1 et contrôle en échec enregistré."""
        with patch('pipelines.manager.detect_connection', return_value=CONNECTED):
            with pytest.raises(CommandError) as error:
                self.call('invariant', out=str(self.make_workdir()))
        assert error.value.returncode == 1
        run = PipelineRun.objects.get()
        assert run.status == 'failed'
        assert not run.checks.get(name='no_unstable_connection').passed
        assert 'transformée de graphe' in run.message

    def test_no_save(self):
        """Test: --no-save n'écrit rien en base."""
        self.call('connections', out=str(self.make_workdir()), no_save=True)
        assert PipelineRun.objects.count() == 0


@pytest.mark.integration
class InvariantPipelineTest(TemporaryDirectoryMixin, TestCase):
    """Tests du pipeline complet sur linear3."""

    def test_invariant_then_verify(self):
        """Test: plan invariant exact, puis relecture du graphe et mêmes contrôles."""
        out = self.make_workdir()
        path = self.write_config("[surface]\nradius = 0.25\n")
        call_command('run_pipeline', 'invariant', config=str(path), out=str(out), stdout=StringIO())

        manifest = load_json(out / 'manifest.json')
        assert manifest['status'] == 'passed'
        assert manifest['ledger']['epsilon'] > 0.0
        assert {'graph.csv', 'center_graph.json', 'verify.json'} <= set(manifest['artifacts'])
        assert manifest['checks']['checks']['local_invariance']['measured'] <= 1e-12
        assert manifest['checks']['checks']['tangency']['measured'] <= 1e-12
        assert 'series_oracle' not in manifest['checks']['checks']

        _, rows = load_csv(out / 'graph.csv')
        assert np.max(np.abs(rows[:, 2])) <= 1e-12

        call_command('run_pipeline', 'verify', config=str(path), out=str(out), stdout=StringIO())
        verified = load_json(out / 'manifest.json')
        assert verified['subcommand'] == 'verify'
        assert verified['status'] == 'passed'
        assert PipelineRun.objects.filter(status='passed').count() == 2


@pytest.mark.integration
@pytest.mark.slow
class ReferenceSystemsTest(TemporaryDirectoryMixin, TestCase):
    """Tests des pipelines sur les systèmes de référence."""

    def test_curved2_second_derivative(self):
        """Test: h''(0) ≈ −2 à 1e-3 près au pas 1e-3."""
        out = self.make_workdir()
        call_command('run_pipeline', 'invariant', config=str(self.write_config(CURVED2_INI)), out=str(out),
                     stdout=StringIO())
        manifest = load_json(out / 'manifest.json')
        assert manifest['results']['second_derivative']['value'] == pytest.approx(-2.0, abs=1e-3)
        assert manifest['checks']['checks']['second_derivative']['passed']

    def test_coupled_henon_series_oracle(self):
        """Test: graphe fixe de henon_x_expand_coupled contre ψ aux orbites de période <= 2."""
        base = np.vstack([henon_fixed_point(HENON_A, HENON_B)[None, :], henon_period_two(HENON_A, HENON_B)])
        values, _ = series_graph(base)
        points = '; '.join(','.join(repr(float(c)) for c in row) for row in np.column_stack([base, values]))
        manager = PipelineManager(load_config(self.write_config(COUPLED_INI.format(points=points))),
                                  output_dir=self.make_workdir())
        try:
            manager.run('invariant')
        except ChecksFailedError:
            pass

        record = manager.summary.to_dict()['checks']['series_oracle']
        assert record['passed']
        assert record['measured'] <= 1e-5
        assert record['details']['points'] == 3
        assert record['details']['terms'] == 25
        assert record['details']['graph_range'] >= 1e-4
        assert manager.manifest['checks']['checks']['series_oracle'] == record

    def test_solenoid_stops_before_transform(self):
        """Test: solénoïde, code 1, connexions signalées, pas de graphe."""
        out = self.make_workdir()
        with pytest.raises(CommandError) as error:
            call_command('run_pipeline', 'invariant', system='solenoid', out=str(out), stdout=StringIO())
        assert error.value.returncode == 1
        manifest = load_json(out / 'manifest.json')
        assert manifest['results']['connections']['unstable']
        assert manifest['ledger'] is None
        assert 'graph.csv' not in manifest['artifacts']

    def test_saddle3(self):
        """Test: courbe centrale de saddle3 tangente à l'axe y et localement invariante."""
        out = self.make_workdir()
        call_command('run_pipeline', 'saddle', system='saddle3', out=str(out), stdout=StringIO())
        manifest = load_json(out / 'manifest.json')
        assert manifest['results']['saddle']['tangent_angle'] <= 1e-3
        header, _ = load_csv(out / 'intersection.csv')
        assert header == ['k', 't0', 'x0', 'x1', 'x2']

    def test_cat_foliation(self):
        """Test: feuilletage stable du chat d'Arnold, feuilles et champ exportés."""
        out = self.make_workdir()
        call_command('run_pipeline', 'foliate', system='cat_linear', out=str(out), stdout=StringIO())
        manifest = load_json(out / 'manifest.json')
        assert manifest['checks']['checks']['leaf_holonomy']['measured'] <= 1e-8
        header, rows = load_csv(out / 'leaves.csv')
        assert header == ['leaf', 'index', 'x', 'y']
        assert len(rows) > 0


class PlotTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Tests des figures."""

    def test_svg_written(self):
        """Test: une figure SVG est écrite sans date."""
        path = plot_profile(np.linspace(0.0, 1.0, 5), np.linspace(0.0, 1.0, 5), self.make_workdir() / 'p.svg',
                            'profil', marks={'K': [0.0], 'L': [1.0]})
        text = path.read_text(encoding='utf-8')
        assert text.lstrip().startswith('<?xml')
        assert '<dc:date>' not in text
