"""
Utilitaires et fonctions helper partagés par les apps.
"""

import csv
import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Union
import logging

import numpy as np
from pathos.pools import ThreadPool

logger = logging.getLogger('core')


class JSONEncoder(json.JSONEncoder):
    """Encodeur JSON pour les types numpy et les objets exposant to_dict."""

    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, Path):
            return str(obj)
        elif isinstance(obj, datetime):
            return obj.isoformat()
        elif hasattr(obj, 'to_dict'):
            return obj.to_dict()
        return super().default(obj)


def dumps_json(data: Any) -> str:
    """Sérialisation canonique: clés triées, UTF-8, indentation fixe."""
    return json.dumps(data, cls=JSONEncoder, indent=2, ensure_ascii=False, sort_keys=True)


def save_json(data: Dict[str, Any], filepath: Union[str, Path]) -> bool:
    """
    Sauvegarde des données en format JSON (clés triées).

    Args:
        data: Données à sauvegarder
        filepath: Chemin du fichier de destination

    Returns:
        True si succès, False sinon
    """
    try:
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)

        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(dumps_json(data))
            f.write('\n')

        logger.info(f"Données sauvegardées dans {filepath}")
        return True

    except (OSError, TypeError, ValueError) as e:
        logger.error(f"Erreur lors de la sauvegarde JSON: {e}")
        return False


def load_json(filepath: Union[str, Path]) -> Optional[Dict[str, Any]]:
    """
    Charge des données depuis un fichier JSON.

    Args:
        filepath: Chemin du fichier à charger

    Returns:
        Dict avec les données ou None si erreur
    """
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)

        logger.info(f"Données chargées depuis {filepath}")
        return data

    except FileNotFoundError:
        logger.warning(f"Fichier non trouvé: {filepath}")
        return None
    except json.JSONDecodeError as e:
        logger.error(f"Erreur de format JSON: {e}")
        return None


def save_csv(filepath: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    """
    Écrit un tableau numérique en CSV (ligne d'en-tête, nombres au format %.17g).

    Args:
        filepath: Chemin du fichier de destination
        header: Noms des colonnes
        rows: Lignes numériques

    Returns:
        Le chemin écrit
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(['%.17g' % float(value) for value in row])
    logger.debug(f"CSV écrit: {filepath}")
    return filepath


def load_csv(filepath: Union[str, Path]) -> tuple:
    """Relit un CSV écrit par save_csv: (en-tête, tableau numpy)."""
    with open(filepath, 'r', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(value) for value in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def content_hash(text: str) -> str:
    """Empreinte SHA-256 d'un contenu texte (configuration canonique)."""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def generate_run_id(prefix: str = 'run') -> str:
    """Génère un ID unique pour une exécution (jamais écrit dans les rapports JSON)."""
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S_%f')
    return f"{prefix}_{timestamp}"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Générateur aléatoire dérivé de la graine unique de la configuration."""
    return np.random.default_rng([int(seed), int(stream)])


def parallel_map(func: Callable, items: Sequence, workers: int = 1) -> List[Any]:
    """
    Map ordonné, séquentiel ou sur un pool de threads.

    Args:
        func: Fonction appliquée à chaque élément
        items: Éléments à traiter
        workers: Nombre de workers (<= 1: exécution séquentielle)

    Returns:
        Résultats dans l'ordre des entrées
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    pool = ThreadPool(nodes=workers)
    try:
        return list(pool.map(func, items))
    finally:
        pool.close()
        pool.join()
        pool.clear()


class RunTimer:
    """Utilitaire pour mesurer la durée d'une étape de pipeline."""

    def __init__(self, name: str):
        self.name = name
        self.start_time = None
        self.end_time = None

    def __enter__(self):
        self.start_time = datetime.now()
        logger.info(f"Début de {self.name}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = datetime.now()
        duration = self.end_time - self.start_time
        logger.info(f"Fin de {self.name} - Durée: {duration}")

    @property
    def duration(self) -> float:
        """Durée en secondes."""
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return 0.0
