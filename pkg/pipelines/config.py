"""
Configuration d'une exécution: un fichier INI (`key = value`, `[sections]`) lu avec
python-decouple, une RepositoryIni par section, chaque clé ayant une valeur par défaut.
"""

from configparser import Error as ConfigParserError
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

from decouple import Config, Csv, RepositoryEmpty, RepositoryIni, UndefinedValueError
from django.conf import settings

from core.exceptions import ConfigurationError
from core.utils import content_hash, dumps_json
from dynamics.exceptions import PolynomialSyntaxError, SystemNotFoundError
from dynamics.polynomial import polynomial_map
from dynamics.registry import SystemRegistryEntry, lookup

logger = logging.getLogger('pipelines')

SUBCOMMANDS = ('analyze', 'connections', 'surface', 'invariant', 'saddle', 'foliate', 'smooth-fn', 'verify')


def optional(cast: Callable) -> Callable:
    """Cast qui laisse une valeur vide à None."""
    def apply(value):
        if value is None or (isinstance(value, str) and not value.strip()):
            return None
        return cast(value)
    return apply


def point_list(value: str) -> List[List[float]]:
    """Points `x1,y1; x2,y2`."""
    if not value or not value.strip():
        return []
    return [[float(c) for c in chunk.split(',')] for chunk in value.split(';') if chunk.strip()]


FloatList = Csv(cast=float)
OptionalFloat = optional(float)
OptionalInt = optional(int)

# Section -> clé -> (défaut textuel, cast)
SCHEMA: Dict[str, Dict[str, Tuple[str, Callable]]] = {
    'run': {
        'system': ('linear3', str),
        'seed': ('', OptionalInt),
        'workers': ('', OptionalInt),
        'set': ('auto', str),
        'points': ('', point_list),
        'max_period': ('2', int),
        'seed_grid': ('12', int),
        'U': ('', FloatList),
        'resolution': ('0.05', float),
    },
    'tolerances': {
        'invariance': ('', OptionalFloat),
        'tangency': ('1e-3', float),
        'h2': ('1e-3', float),
        'saddle_tangent': ('1e-3', float),
        'saddle_invariance': ('1e-6', float),
        'line_field_invariance': ('', OptionalFloat),
        'holonomy': ('1e-4', float),
        'separator_levels': ('1e-12', float),
        'series': ('1e-6', float),
    },
    'analyze': {
        'strong_dim': ('', OptionalInt),
        'opening': ('1.0', float),
        'n0': ('10', int),
        'r': ('1.0', float),
        'segments': ('8', int),
    },
    'connections': {
        'radius': ('0.2', float),
        'delta': ('', OptionalFloat),
        'bases': ('20', int),
        'stable_dim': ('', OptionalInt),
    },
    'surface': {
        'radius': ('0.2', float),
        'whitney_tolerance': ('1e-6', float),
        'mesh_nodes': ('21', int),
    },
    'transform': {
        'spacing': ('', OptionalFloat),
        'lambda0': ('', OptionalFloat),
        'eta': ('', OptionalFloat),
        'beta': ('', OptionalFloat),
        'delta': ('', OptionalFloat),
        'threshold': ('0.05', float),
        'tol': ('1e-11', float),
        'max_iters': ('200', int),
        'samples': ('300', int),
    },
    'verify': {
        'graph': ('', str),
        'containment': ('false', bool),
        'robustness': ('false', bool),
        'ladder': ('1e-2,1e-3,1e-4', FloatList),
        'samples': ('200', int),
    },
    'saddle': {
        'radius': ('0.2', float),
        'spacing': ('', OptionalFloat),
        'mesh_points': ('9', int),
        'check_connections': ('true', bool),
    },
    'foliate': {
        'radius': ('0.1', float),
        'steps': ('60', int),
        'spacing': ('', OptionalFloat),
        'n0': ('5', int),
    },
    'smoothing': {
        'zero_set': ('-2', point_list),
        'one_set': ('2', point_list),
        'box': ('-3,3', FloatList),
        'max_level': ('', OptionalInt),
        'samples': ('100000', int),
        'plot_points': ('601', int),
    },
}

TARGET_KEYS = ('lambda0', 'eta', 'beta', 'delta')


def _section_repository(source: Path, section: str):
    """RepositoryIni lisant une section donnée du fichier."""
    repository_class = type(f"Repository_{section}", (RepositoryIni,), {'SECTION': section})
    return repository_class(str(source))


def _read_section(source: Optional[Path], section: str, sections: Sequence[str]) -> Dict[str, Any]:
    repository = _section_repository(source, section) if section in sections else RepositoryEmpty()
    reader = Config(repository)
    values = {}
    for key, (default, cast) in SCHEMA[section].items():
        try:
            values[key] = reader(key, default=default, cast=cast)
        except (ValueError, TypeError, UndefinedValueError, ConfigParserError) as e:
            raise ConfigurationError(f"[{section}] {key}: valeur invalide ({e})") from e
    return values


def _raw_section(source: Path, section: str) -> Dict[str, str]:
    """Toutes les clés d'une section libre ([system], [system.inverse])."""
    repository = _section_repository(source, section)
    try:
        return {key: repository.parser.get(section, key) for key in repository.parser.options(section)}
    except ConfigParserError as e:
        raise ConfigurationError(f"[{section}] illisible: {e}") from e


def _list_sections(source: Path) -> List[str]:
    # La lecture valide aussi la syntaxe du fichier
    return list(_section_repository(source, 'run').parser.sections())


def parse_overrides(overrides: Sequence[str]) -> Dict[str, float]:
    """
    Lit les `--tol-override key=value`.

    Raises:
        ConfigurationError: forme invalide ou clé inconnue
    """
    parsed = {}
    for item in overrides or ():
        key, sep, value = item.partition('=')
        key = key.strip()
        if not sep or key not in SCHEMA['tolerances']:
            raise ConfigurationError(f"Surcharge de tolérance invalide: '{item}'")
        try:
            parsed[key] = float(value)
        except ValueError as e:
            raise ConfigurationError(f"Tolérance '{key}' non numérique: '{value}'") from e
    return parsed


@dataclass
class RunConfig:
    """
    Configuration complète et typée d'une exécution.

    Attributes:
        system: nom du système
        seed: graine unique de toutes les sources d'aléa
        workers: nombre de threads
        sections: valeurs typées par section
        polynomial: sections [system] et [system.inverse] si le système est défini dans le fichier
        source: fichier lu (None: tout par défaut)
    """
    system: str
    seed: int
    workers: int
    sections: Dict[str, Dict[str, Any]]
    polynomial: Optional[Dict[str, Dict[str, str]]] = None
    source: Optional[Path] = None
    _entry: Optional[SystemRegistryEntry] = field(default=None, repr=False)

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections[name]

    @property
    def tolerances(self) -> Dict[str, Any]:
        return self.sections['tolerances']

    def targets(self) -> Optional[Dict[str, float]]:
        """Cibles (λ₀, η, β, δ) du voisinage tubulaire, si toutes sont fournies."""
        values = {key: self.sections['transform'][key] for key in TARGET_KEYS}
        given = [key for key, value in values.items() if value is not None]
        if not given:
            return None
        if len(given) != len(TARGET_KEYS):
            missing = sorted(set(TARGET_KEYS) - set(given))
            raise ConfigurationError(f"[transform] cibles incomplètes, manquent: {', '.join(missing)}")
        return values

    def canonical(self) -> Dict[str, Any]:
        """Forme canonique (sans chemin de fichier) servant à l'empreinte."""
        return {
            'system': self.system,
            'seed': self.seed,
            'workers': self.workers,
            'sections': self.sections,
            'polynomial': self.polynomial,
        }

    @property
    def content_hash(self) -> str:
        return content_hash(dumps_json(self.canonical()))

    @property
    def entry(self) -> SystemRegistryEntry:
        """Entrée du registre, ou système polynomial du fichier."""
        if self._entry is None:
            self._entry = self._build_entry()
        return self._entry

    def _build_entry(self) -> SystemRegistryEntry:
        if self.polynomial is None:
            try:
                return lookup(self.system)
            except SystemNotFoundError as e:
                raise ConfigurationError(str(e)) from e

        forward = dict(self.polynomial['system'])
        try:
            dim = int(forward.pop('dim'))
            box = [float(v) for v in forward.pop('box').split(',')]
        except (KeyError, ValueError) as e:
            raise ConfigurationError(f"[system] dim et box sont requis ({e})") from e
        forward.pop('name', None)
        try:
            smooth_map = polynomial_map(self.system, forward, dim, box, self.polynomial.get('system.inverse'))
        except PolynomialSyntaxError as e:
            raise ConfigurationError(f"[system] {e}") from e
        return SystemRegistryEntry(name=self.system, map=smooth_map)

    def to_dict(self):
        return self.canonical()


def load_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                workers: Optional[int] = None, overrides: Sequence[str] = (),
                system: Optional[str] = None) -> RunConfig:
    """
    Charge et valide un fichier de configuration.

    Args:
        path: Fichier INI (None: valeurs par défaut)
        seed: Graine imposée par la ligne de commande
        workers: Nombre de threads imposé par la ligne de commande
        overrides: Surcharges `key=value` de la section [tolerances]
        system: Système du registre imposé par la ligne de commande (ignoré si [system] est défini)

    Returns:
        RunConfig

    Raises:
        ConfigurationError: fichier illisible, valeur invalide ou système inconnu
    """
    source = Path(path) if path else None
    sections_in_file: List[str] = []
    if source is not None:
        if not source.is_file():
            raise ConfigurationError(f"Fichier de configuration introuvable: {source}")
        try:
            sections_in_file = _list_sections(source)
        except (ConfigParserError, UnicodeDecodeError) as e:
            raise ConfigurationError(f"Fichier de configuration illisible: {e}") from e
        unknown = [s for s in sections_in_file if s not in SCHEMA and s not in ('system', 'system.inverse')]
        if unknown:
            raise ConfigurationError(f"Section(s) inconnue(s): {', '.join(unknown)}")

    sections = {name: _read_section(source, name, sections_in_file) for name in SCHEMA}
    sections['tolerances'].update(parse_overrides(overrides))

    run = sections['run']
    if system:
        run['system'] = system
    polynomial = None
    if 'system' in sections_in_file:
        polynomial = {'system': _raw_section(source, 'system')}
        if 'system.inverse' in sections_in_file:
            polynomial['system.inverse'] = _raw_section(source, 'system.inverse')
        run['system'] = polynomial['system'].get('name', 'custom')

    config = RunConfig(
        system=run['system'],
        seed=int(seed if seed is not None else run['seed'] if run['seed'] is not None else settings.CM_DEFAULT_SEED),
        workers=int(workers or run['workers'] or settings.CM_DEFAULT_WORKERS),
        sections=sections,
        polynomial=polynomial,
        source=source,
    )
    if config.seed < 0 or config.seed >= 2 ** 64:
        raise ConfigurationError(f"La graine doit tenir sur 64 bits: {config.seed}")
    if config.workers < 1:
        raise ConfigurationError(f"Nombre de threads invalide: {config.workers}")
    if run['set'] not in ('auto', 'known', 'periodic', 'boxes', 'points'):
        raise ConfigurationError(f"[run] set inconnu: {run['set']}")

    # Le système doit exister avant tout calcul
    logger.debug(f"Système résolu: {config.entry.name} (dimension {config.entry.map.dim})")
    logger.info(f"Configuration chargée: système {config.system}, graine {config.seed}, "
                f"{config.workers} thread(s), empreinte {config.content_hash[:12]}")
    return config
