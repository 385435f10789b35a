"""
Gestionnaire des pipelines: ensemble invariant, décomposition, surfaces, contrôles et rapports.
"""

from dataclasses import fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union
import logging

import numpy as np
from django.conf import settings

from cones.certificates import (
    check_contraction,
    check_dual_contraction,
    minimal_norm_ratio,
    thinness_profile,
)
from cones.exceptions import OrbitEscapeError
from cones.splitting import SplittingFrame, estimate_splitting, pseudo_orbit
from core.exceptions import CenterManifoldException, ConfigurationError
from core.utils import generate_run_id, load_csv, load_json, make_rng, save_csv, save_json, RunTimer
from dynamics.registry import series_graph
from graph_transform.exceptions import GraphTransformException
from graph_transform.graphs import graph_from_rows
from graph_transform.ledger import ConstantsLedger, default_targets
from graph_transform.surfaces import CenterGraph, build_center_graph
from graph_transform.tubular import build_tubular
from invariant_set.boxes import maximal_invariant
from invariant_set.exceptions import EmptyResultError
from invariant_set.periodic import periodic_samples, seed_grid
from invariant_set.sets import SampledInvariantSet
from projective_lift.exceptions import BunchingFailureError
from projective_lift.foliation import foliate
from smoothing.separators import build_separator
from strong_manifolds.connections import detect_connection
from verify.checks import c1_evidence, check_containment, check_local_invariance, check_oracle, check_tangency
from verify.exceptions import IntersectionDegenerateError, StrongConnectionError
from verify.perturbation import robustness_probe
from verify.reports import CheckReport, VerificationSummary
from verify.saddle import saddle_intersection
from whitney_surface.gluing import build_surface

from .config import RunConfig
from .exceptions import ChecksFailedError, ConnectionBlockedError, UnknownSubcommandError
from .plots import plot_foliation, plot_profile, plot_sampled_surface

logger = logging.getLogger('pipelines')

# Verdicts négatifs (code de sortie 1), par opposition aux erreurs de configuration ou de convergence
BLOCKING_VERDICTS = (ConnectionBlockedError, StrongConnectionError, IntersectionDegenerateError,
                     BunchingFailureError, ChecksFailedError)


def spread_indices(count: int, wanted: int) -> List[int]:
    """Au plus `wanted` indices régulièrement espacés dans range(count)."""
    if wanted >= count:
        return list(range(count))
    return sorted(set(np.linspace(0, count - 1, wanted).round().astype(int).tolist()))


def graph_second_difference(center: CenterGraph, split: SplittingFrame) -> Dict[str, float]:
    """
    Différence seconde centrée de la courbe invariante au nœud le plus proche du premier point de K,
    lue sur la coordonnée ambiante la plus alignée avec la direction forte.
    """
    tube = center.tube
    nodes = tube.grid.nodes[:, 0]
    center_index = int(np.argmin(np.abs(nodes - tube.K_params[0, 0])))
    if center_index == 0 or center_index == len(nodes) - 1:
        raise ConfigurationError("Grille trop petite pour une différence seconde en K")
    neighbors = np.array([center_index - 1, center_index, center_index + 1])
    points = tube.embed(tube.grid.nodes[neighbors], center.graph.offsets[neighbors])
    axis = int(np.argmax(np.abs(split.F_frames[0, :, 0])))
    spacing = float(nodes[center_index + 1] - nodes[center_index])
    second = (points[2, axis] - 2.0 * points[1, axis] + points[0, axis]) / spacing ** 2
    return {'value': float(second), 'axis': axis, 'spacing': spacing, 'node': float(nodes[center_index])}


class PipelineManager:
    """
    Exécute une sous-commande sur le système de la configuration et écrit ses rapports.
    """

    def __init__(self, config: RunConfig, output_dir: Optional[Union[str, Path]] = None, force: bool = False):
        """
        Initialise le gestionnaire.

        Args:
            config: Configuration chargée
            output_dir: Répertoire des sorties (défaut: CM_OUTPUT_DIR/<système>)
            force: Lancer la transformée de graphe malgré une connexion forte
        """
        self.config = config
        self.id = generate_run_id('pipeline')
        self.output_dir = Path(output_dir) if output_dir else Path(settings.CM_OUTPUT_DIR) / config.system
        self.force = force
        self.entry = config.entry
        self.map = self.entry.map
        self.seed = config.seed
        self.workers = config.workers

        self.subcommand: Optional[str] = None
        self.summary = VerificationSummary()
        self.results: Dict[str, Any] = {}
        self.artifacts: List[str] = []
        self.ledger: Optional[Dict[str, Any]] = None
        self.status = 'running'
        self.message = ''
        self.manifest: Dict[str, Any] = {}

        self._K: Optional[SampledInvariantSet] = None
        self._split: Optional[SplittingFrame] = None

        logger.info(f"Gestionnaire de pipeline initialisé - ID: {self.id}, système {config.system}")

    # Données partagées

    @property
    def strong_dim(self) -> int:
        value = self.config.section('analyze')['strong_dim']
        return int(value if value is not None else self.entry.known_answers.get('strong_dim', 1))

    @property
    def stable_dim(self) -> int:
        value = self.config.section('connections')['stable_dim']
        return int(value if value is not None else self.entry.known_answers.get('stable_dim', 0))

    def _working_box(self) -> np.ndarray:
        U = self.config.section('run')['U']
        if U:
            if len(U) != 2 * self.map.dim:
                raise ConfigurationError(f"[run] U doit contenir {2 * self.map.dim} bornes")
            return np.asarray(U, dtype=float).reshape(self.map.dim, 2)
        if self.map.box is None:
            raise ConfigurationError(f"Aucune boîte de travail pour {self.map.name}: renseigner [run] U")
        return self.map.box

    def invariant_set(self) -> SampledInvariantSet:
        """
        Ensemble invariant K selon [run] set: connu, points donnés, orbites périodiques ou boîtes.

        Raises:
            ConfigurationError: source incompatible avec le système
            EmptyResultError: aucune orbite périodique hyperbolique trouvée
        """
        if self._K is not None:
            return self._K

        run = self.config.section('run')
        kind = run['set']
        if kind == 'auto':
            if run['points']:
                kind = 'points'
            elif self.entry.known_set is not None:
                kind = 'known'
            else:
                kind = 'periodic'

        if kind == 'known':
            if self.entry.known_set is None:
                raise ConfigurationError(f"Le système {self.map.name} n'a pas d'ensemble invariant connu")
            self._K = SampledInvariantSet.from_points(self.map, self.entry.known_set)
        elif kind == 'points':
            points = np.asarray(run['points'], dtype=float)
            if points.ndim != 2 or points.shape[1] != self.map.dim:
                raise ConfigurationError(f"[run] points: {self.map.dim} coordonnées attendues par point")
            self._K = SampledInvariantSet.from_points(self.map, points)
        elif kind == 'periodic':
            seeds = seed_grid(self._working_box(), run['seed_grid'])
            points = periodic_samples(self.map, run['max_period'], seeds, workers=self.workers)
            if len(points) == 0:
                raise EmptyResultError(f"Aucune orbite périodique hyperbolique de période <= {run['max_period']}")
            self._K = SampledInvariantSet.from_points(self.map, points)
        else:
            self._K = maximal_invariant(self.map, self._working_box(), run['resolution'], workers=self.workers)

        logger.info(f"Ensemble invariant ({kind}): {len(self._K.points)} point(s), "
                    f"résidu d'invariance {self._K.invariance_residual:.2e}")
        self.results['invariant_set'] = {'source': kind, **self._K.to_dict()}
        return self._K

    def splitting(self) -> SplittingFrame:
        if self._split is None:
            self._split = estimate_splitting(self.map, self.invariant_set().points, self.strong_dim)
            self.results['splitting'] = self._split.to_dict()
        return self._split

    # Écriture des artefacts

    def _artifact(self, name: str) -> Path:
        if name not in self.artifacts:
            self.artifacts.append(name)
        return self.output_dir / name

    def _write_json(self, name: str, data: Dict[str, Any]) -> Path:
        path = self._artifact(name)
        if not save_json(data, path):
            raise ConfigurationError(f"Écriture impossible: {path}")
        return path

    def _write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        return save_csv(self._artifact(name), header, rows)

    def _check(self, report: CheckReport) -> CheckReport:
        logger.info(f"Contrôle {report.name}: {'succès' if report.passed else 'échec'} "
                    f"(mesuré {report.measured:.3e}, tolérance {report.tolerance:.3e})")
        return self.summary.add(report)

    # Sous-commandes

    def analyze(self) -> Dict[str, Any]:
        """Décomposition dominée et certificats de contraction des cônes."""
        options = self.config.section('analyze')
        split = self.splitting()
        points = self.invariant_set().points
        n0 = options['n0']
        cone = split.cone_field(options['opening'], self.map.periods)

        chosen = spread_indices(len(points), options['segments'])
        orbit = pseudo_orbit(self.map, points[chosen], 2 * n0)
        segments = [np.array([step[i] for step in orbit]) for i in range(len(chosen))]

        contraction = check_contraction(self.map, cone, segments, options['r'], n0, self.workers)
        dual = check_dual_contraction(self.map, cone, segments, options['r'], n0, self.workers)
        ratio = minimal_norm_ratio(self.map, cone, segments[0], n0, options['r'])
        try:
            thinness = thinness_profile(self.map, cone, points[0], range(0, n0 + 1, max(1, n0 // 5)))
        except OrbitEscapeError as e:
            logger.warning(f"Profil de finesse interrompu: {e}")
            thinness = []

        self._check(CheckReport(name='cone_contraction', passed=contraction.passed,
                                measured=contraction.measured_lambda, tolerance=1.0))
        self._check(CheckReport(name='dual_cone_contraction', passed=dual.passed,
                                measured=dual.measured_lambda, tolerance=1.0))

        report = {
            'splitting': split.to_dict(),
            'contraction': contraction.to_dict(),
            'dual_contraction': dual.to_dict(),
            'minimal_norm_ratio': ratio,
            'thinness': [{'n': n, 'thinness': value} for n, value in thinness],
            'opening': options['opening'],
        }
        self.results['analyze'] = {'lambda': contraction.measured_lambda, 'dual_lambda': dual.measured_lambda}
        self._write_json('analyze.json', report)
        return report

    def connections(self) -> Dict[str, Any]:
        """Détection des connexions fortes pour f (E^uu) et, si E^ss est demandé, pour f⁻¹."""
        options = self.config.section('connections')
        K = self.invariant_set()
        bases = spread_indices(len(K.points), options['bases'])

        directions = [('unstable', self.map, self.splitting())]
        if self.stable_dim > 0:
            inverse = self.map.inverse_map()
            directions.append(('stable', inverse, estimate_splitting(inverse, K.points, self.stable_dim)))

        report = {}
        for label, mapping, split in directions:
            found = detect_connection(mapping, K, split, options['radius'], tol=options['delta'],
                                      base_indices=bases, workers=self.workers)
            report[label] = found.to_dict()
            self._check(CheckReport(name=f"no_{label}_connection", passed=not found.has_connection,
                                    measured=float(len(found.pairs)), tolerance=0.0,
                                    details={'resolution': found.resolution}))
        self.results['connections'] = {label: report[label]['has_connection'] for label in report}
        self._write_json('connections.json', report)
        return report

    def _surface(self):
        options = self.config.section('surface')
        return build_surface(self.invariant_set().points, self.splitting(), options['radius'],
                             options['whitney_tolerance'], self.map.periods, self.workers)

    def surface(self) -> Dict[str, Any]:
        """Surface initiale de Whitney seule."""
        surface = self._surface()
        rows = surface.mesh_rows(self.config.section('surface')['mesh_nodes'])
        header = [f"t{i}" for i in range(surface.dim)] + [f"x{i}" for i in range(surface.ambient_dim)]
        self._write_csv('surface.csv', header, rows)
        self._write_json('surface.json', surface.to_dict())
        mesh = np.array(rows)[:, surface.dim:]
        if surface.ambient_dim >= 2:
            plot_sampled_surface(mesh, self.invariant_set().points, self._artifact('surface.svg'),
                                 f"Surface initiale - {self.map.name}")
        self.results['surface'] = {'fit_residual': surface.fit_residual, 'tangent_defect': surface.tangent_defect}
        return surface.to_dict()

    def _transform_options(self) -> Dict[str, Any]:
        options = self.config.section('transform')
        return {
            'spacing': options['spacing'],
            'threshold': options['threshold'],
            'tol': options['tol'],
            'max_iters': options['max_iters'],
            'samples': options['samples'],
        }

    def invariant(self) -> Dict[str, Any]:
        """
        Pipeline complet: analyse, connexions, surface, point fixe de la transformée, vérification.

        Raises:
            ConnectionBlockedError: connexion forte détectée (sans --force)
        """
        self.analyze()
        connections = self.connections()
        if connections['unstable']['has_connection']:
            pairs = sum(len(entry['offenders']) for entry in connections['unstable']['per_point'])
            message = (
                f"Connexion forte détectée sur {self.map.name} ({pairs} paire(s)): deux points de K "
                f"sont sur une même feuille forte, aucune surface localement invariante tangente à E "
                f"ne peut contenir K; la transformée de graphe n'est pas lancée"
            )
            if not self.force:
                raise ConnectionBlockedError(message)
            logger.warning(f"{message} (--force: lancement malgré tout)")

        surface_options = self.config.section('surface')
        center = build_center_graph(self.map, self.invariant_set(), self.splitting(), surface_options['radius'],
                                    targets=self.config.targets(),
                                    whitney_tolerance=surface_options['whitney_tolerance'],
                                    seed=self.seed, workers=self.workers, **self._transform_options())
        self.ledger = center.ledger.to_dict()
        self._write_center(center)
        return self._verify_center(center)

    def _write_center(self, center: CenterGraph) -> None:
        tube = center.tube
        header = ([f"s{i}" for i in range(tube.dim)] + [f"w{i}" for i in range(tube.fiber_dim)]
                  + [f"x{i}" for i in range(tube.ambient_dim)])
        self._write_csv('graph.csv', header, center.graph.rows(tube))
        self._write_json('center_graph.json', center.to_dict())
        if tube.ambient_dim >= 2:
            plot_sampled_surface(tube.embed(tube.grid.nodes, center.graph.offsets), self.invariant_set().points,
                                 self._artifact('graph.svg'), f"Surface localement invariante - {self.map.name}")
        self.results['transform'] = {
            'iterations': center.trace.iterations if center.trace else 0,
            'contraction_factor': center.trace.contraction_factor if center.trace else None,
            'residual': center.residual,
        }

    def _verify_center(self, center: CenterGraph) -> Dict[str, Any]:
        """Contrôles de la surface: invariance, tangence, régularité, inclusion, robustesse."""
        tolerances = self.config.tolerances
        options = self.config.section('verify')
        transform = self.config.section('transform')
        split = self.splitting()

        terms = self.entry.known_answers.get('series_terms')
        if terms is not None:
            self._check(self._series_check(center, int(terms), options['samples']))

        self._check(check_local_invariance(center, tolerance=tolerances['invariance'],
                                           samples=options['samples'], seed=self.seed))
        self._check(check_tangency(center, split, tolerances['tangency']))
        self._check(c1_evidence(center, seed=self.seed))

        if center.tube.dim == 1:
            second = graph_second_difference(center, split)
            self.results['second_derivative'] = second
            expected = self.entry.known_answers.get('h2')
            if expected is not None:
                gap = abs(second['value'] - float(expected))
                self._check(CheckReport(name='second_derivative', passed=gap <= tolerances['h2'],
                                        measured=gap, tolerance=tolerances['h2'],
                                        details={'estimate': second['value'], 'expected': expected}))

        if options['containment']:
            run = self.config.section('run')
            invariant = maximal_invariant(self.map, self._working_box(), run['resolution'], workers=self.workers)
            self._check(check_containment(center, invariant, seed=self.seed))

        if options['robustness']:
            self._check(robustness_probe(center, sizes=options['ladder'], seed=self.seed, tol=transform['tol'],
                                         max_iters=transform['max_iters'], workers=self.workers))

        report = self.summary.to_dict()
        self._write_json('verify.json', report)
        return report

    def _series_check(self, center: CenterGraph, terms: int, samples: int) -> CheckReport:
        """Graphe fixe contre la série ψ du produit Hénon couplé, aux points de K."""
        points = self.invariant_set().points
        points = points[spread_indices(len(points), samples)]
        known = self.entry.known_answers
        a, b = known['henon']
        values, tails = series_graph(points, terms=terms, rate=known['strong_rate'],
                                     coupling=known['coupling'], a=a, b=b)
        expected = points.copy()
        expected[:, -1] = values
        return check_oracle(center, expected, self.config.tolerances['series'], name='series_oracle',
                            details={'terms': terms, 'tail_bound': float(tails.max()),
                                     'graph_range': float(np.ptp(values))})

    def saddle(self) -> Dict[str, Any]:
        """Intersection des surfaces centre-stable et centre-instable."""
        options = self.config.section('saddle')
        tolerances = self.config.tolerances
        surface = saddle_intersection(
            self.map, self.invariant_set(), self.strong_dim, max(self.stable_dim, 1), options['radius'],
            spacing=options['spacing'], connection_radius=self.config.section('connections')['radius'],
            check_connections=options['check_connections'], mesh_points=options['mesh_points'],
            seed=self.seed, workers=self.workers,
        )
        self._check(CheckReport(name='saddle_tangency', passed=surface.tangent_angle <= tolerances['saddle_tangent'],
                                measured=surface.tangent_angle, tolerance=tolerances['saddle_tangent']))
        self._check(CheckReport(name='saddle_invariance',
                                passed=surface.invariance_residual <= tolerances['saddle_invariance'],
                                measured=surface.invariance_residual, tolerance=tolerances['saddle_invariance']))
        header = ['k'] + [f"t{i}" for i in range(surface.dim)] + [f"x{i}" for i in range(self.map.dim)]
        self._write_csv('intersection.csv', header, surface.rows())
        self._write_json('intersection.json', surface.to_dict())
        plot_sampled_surface(surface.points.reshape(-1, self.map.dim), self.invariant_set().points,
                             self._artifact('intersection.svg'), f"S^cs ∩ S^cu - {self.map.name}", axes=(0, 1))
        self.results['saddle'] = {'tangent_angle': surface.tangent_angle,
                                  'invariance_residual': surface.invariance_residual}
        return surface.to_dict()

    def foliate(self) -> Dict[str, Any]:
        """Feuilletage stable par le relevé projectif."""
        options = self.config.section('foliate')
        tolerances = self.config.tolerances
        transform = self.config.section('transform')
        K = self.invariant_set()
        chart = foliate(self.map, K, split=self.splitting(), surface_radius=options['radius'],
                        steps=options['steps'], spacing=options['spacing'], targets=self.config.targets(),
                        n0=options['n0'], tol=transform['tol'], max_iters=transform['max_iters'],
                        seed=self.seed, workers=self.workers)
        self.ledger = chart.center.ledger.to_dict()
        diagnostics = chart.diagnostics

        invariance = diagnostics['line_field_invariance']
        limit = tolerances['line_field_invariance']
        if limit is None:
            limit = invariance['tolerance']
        self._check(CheckReport(name='line_field_invariance', passed=invariance['measured'] <= limit,
                                measured=invariance['measured'], tolerance=limit))
        self._check(CheckReport(name='leaf_holonomy', passed=diagnostics['holonomy_residual'] <= tolerances['holonomy'],
                                measured=diagnostics['holonomy_residual'], tolerance=tolerances['holonomy']))

        self._write_csv('line_field.csv', ['x', 'y', 'angle'], chart.field_rows())
        self._write_csv('leaves.csv', ['leaf', 'index', 'x', 'y'], chart.leaf_rows())
        self._write_json('foliation.json', chart.to_dict())
        plot_foliation(chart.field_points, chart.field_angles, chart.leaves, K.points,
                       self._artifact('foliation.svg'), f"Feuilletage stable - {self.map.name}")
        self.results['foliation'] = {
            'leaves': len(chart.leaves),
            'holonomy_residual': diagnostics['holonomy_residual'],
            'fiber_rate': diagnostics['fiber_rate'],
            'base_rate': diagnostics['base_rate'],
        }
        return chart.to_dict()

    def smooth_fn(self) -> Dict[str, Any]:
        """Démonstration de lissage: séparateur entre les deux ensembles de [smoothing]."""
        options = self.config.section('smoothing')
        box = np.asarray(options['box'], dtype=float)
        zero_set = np.asarray(options['zero_set'], dtype=float)
        one_set = np.asarray(options['one_set'], dtype=float)
        if len(box) % 2 or zero_set.ndim != 2 or one_set.ndim != 2:
            raise ConfigurationError("[smoothing] box, zero_set et one_set sont requis")
        box = box.reshape(-1, 2)
        dim = box.shape[0]
        if zero_set.shape[1] != dim or one_set.shape[1] != dim:
            raise ConfigurationError(f"[smoothing] points de dimension {dim} attendus")

        separator = build_separator(zero_set, one_set, box, options['max_level'], options['samples'],
                                    seed=self.seed)
        separation = separator.constant / separator.derivative_bound
        levels = float(max(np.max(np.abs(separator(zero_set))), np.max(np.abs(separator(one_set) - 1.0))))

        rng = make_rng(self.seed, 1)
        sample = box[:, 0] + rng.uniform(0.0, 1.0, size=(options['samples'], dim)) * (box[:, 1] - box[:, 0])
        gradient = float(np.max(np.linalg.norm(separator.grad(sample), axis=1)))

        tolerance = self.config.tolerances['separator_levels']
        self._check(CheckReport(name='separator_levels', passed=levels <= tolerance,
                                measured=levels, tolerance=tolerance))
        self._check(CheckReport(name='separator_gradient', passed=gradient * separation <= separator.constant,
                                measured=gradient * separation, tolerance=separator.constant))

        if dim == 1:
            x = np.linspace(box[0, 0], box[0, 1], options['plot_points'])[:, None]
            values = separator(x)
            slopes = separator.grad(x)[:, 0]
            self._write_csv('separator.csv', ['x', 'phi', 'dphi'], np.column_stack([x[:, 0], values, slopes]))
            plot_profile(x[:, 0], values, self._artifact('separator.svg'), "Séparateur lisse",
                         marks={'K': zero_set[:, 0], 'L': one_set[:, 0]})
        else:
            head = sample[:options['plot_points']]
            self._write_csv('separator.csv', [f"x{i}" for i in range(dim)] + ['phi'],
                            np.column_stack([head, separator(head)]))

        report = {
            'separation': separation,
            'constant': separator.constant,
            'derivative_bound': separator.derivative_bound,
            'measured_gradient': gradient,
            'level_error': levels,
            'cover': {name: cover.to_list() for name, cover in zip(('K', 'L'), separator.covers)},
        }
        self.results['smoothing'] = report
        self._write_json('separator.json', report)
        return report

    def verify_saved(self) -> Dict[str, Any]:
        """
        Relit un graphe enregistré (graph.csv et center_graph.json) et relance les contrôles.

        Raises:
            ConfigurationError: fichiers absents ou graphe incompatible avec la configuration
        """
        options = self.config.section('verify')
        graph_path = Path(options['graph']) if options['graph'] else self.output_dir / 'graph.csv'
        meta = load_json(graph_path.with_name('center_graph.json'))
        if meta is None or not graph_path.is_file():
            raise ConfigurationError(f"Graphe enregistré introuvable: {graph_path}")

        ledger_values = meta['ledger']
        ledger = ConstantsLedger(**{f.name: ledger_values[f.name] for f in fields(ConstantsLedger)})
        _, rows = load_csv(graph_path)

        split = self.splitting()
        transform = self._transform_options()
        targets = self.config.targets() or default_targets(split)
        tube = build_tubular(self._surface(), self.invariant_set().points, split, self.map, targets,
                             spacing=transform['spacing'], samples=transform['samples'], seed=self.seed)
        try:
            graph = graph_from_rows(tube.grid, rows, tube.fiber_dim, ledger.beta)
        except GraphTransformException as e:
            raise ConfigurationError(f"Graphe incompatible avec la configuration: {e}") from e

        self.ledger = ledger.to_dict()
        center = CenterGraph(tube=tube, map=self.map, graph=graph, ledger=ledger)
        return self._verify_center(center)

    # Exécution

    def _handlers(self) -> Dict[str, Callable[[], Dict[str, Any]]]:
        return {
            'analyze': self.analyze,
            'connections': self.connections,
            'surface': self.surface,
            'invariant': self.invariant,
            'saddle': self.saddle,
            'foliate': self.foliate,
            'smooth-fn': self.smooth_fn,
            'verify': self.verify_saved,
        }

    def run(self, subcommand: str) -> Dict[str, Any]:
        """
        Exécute une sous-commande et écrit le manifeste, y compris en cas d'échec.

        Returns:
            Manifeste de l'exécution

        Raises:
            UnknownSubcommandError: sous-commande inconnue
            ChecksFailedError: au moins un contrôle a échoué (manifeste écrit)
            CenterManifoldException: verdict bloquant ou erreur de configuration/convergence
        """
        handler = self._handlers().get(subcommand)
        if handler is None:
            raise UnknownSubcommandError(f"Sous-commande inconnue: {subcommand}")
        self.subcommand = subcommand
        self.output_dir.mkdir(parents=True, exist_ok=True)

        try:
            with RunTimer(f"pipeline {subcommand} sur {self.map.name}"):
                handler()
        except BLOCKING_VERDICTS as e:
            self._finish('failed', str(e))
            raise
        except CenterManifoldException as e:
            self._finish('error', f"{type(e).__name__}: {e}")
            raise

        if not self.summary.passed:
            message = f"Contrôle(s) en échec: {', '.join(self.summary.failed)}"
            self._finish('failed', message)
            raise ChecksFailedError(message, self.summary.failed)
        self._finish('passed', '')
        return self.manifest

    def _finish(self, status: str, message: str) -> None:
        self.status = status
        self.message = message
        if status == 'error':
            logger.error(f"Pipeline {self.subcommand} interrompu: {message}")
        elif status == 'failed':
            logger.warning(f"Pipeline {self.subcommand}: {message}")
        else:
            logger.info(f"Pipeline {self.subcommand}: tous les contrôles sont passés")
        self.manifest = self._build_manifest()
        self._write_json('manifest.json', self.manifest)

    def _build_manifest(self) -> Dict[str, Any]:
        """Manifeste déterministe: entrées, registre, tolérances, artefacts (aucune date)."""
        return {
            'subcommand': self.subcommand,
            'system': self.config.system,
            'seed': self.seed,
            'workers': self.workers,
            'config_hash': self.config.content_hash,
            'config': self.config.canonical(),
            'tolerances': self.config.tolerances,
            'ledger': self.ledger,
            'results': self.results,
            'checks': self.summary.to_dict(),
            'status': self.status,
            'exit_code': {'passed': 0, 'failed': 1}.get(self.status, 2),
            'message': self.message,
            'artifacts': sorted(set(self.artifacts) | {'manifest.json'}),
        }
