"""
Tests pour l'app core.
"""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from django.test import SimpleTestCase

from .utils import (
    RunTimer, content_hash, dumps_json, load_csv, load_json, make_rng, parallel_map, save_csv, save_json,
)


class JSONUtilsTest(SimpleTestCase):
    """Tests de la sérialisation JSON."""

    def setUp(self):
        """Initialisation des données de test."""
        self.workdir = Path(tempfile.mkdtemp(prefix='cm_core_'))
        self.addCleanup(shutil.rmtree, self.workdir, ignore_errors=True)

    def test_canonical_dump(self):
        """Test: clés triées, types numpy convertis, accents conservés."""
        text = dumps_json({'b': np.float64(0.5), 'a': np.arange(3), 'é': np.bool_(True)})
        assert text.index('"a"') < text.index('"b"')
        assert '[\n    0,\n    1,\n    2\n  ]' in text
        assert '"é": true' in text

    def test_save_and_load(self):
        """Test: écriture dans un sous-répertoire créé à la volée, relecture identique."""
        path = self.workdir / 'sub' / 'report.json'
        assert save_json({'value': 1e-17, 'name': 'linear3'}, path)
        assert load_json(path) == {'value': 1e-17, 'name': 'linear3'}

    def test_missing_and_invalid(self):
        """Test: fichier absent ou mal formé, None."""
        assert load_json(self.workdir / 'absent.json') is None
        broken = self.workdir / 'broken.json'
        broken.write_text('{', encoding='utf-8')
        assert load_json(broken) is None

    def test_unserializable(self):
        """Test: objet non sérialisable, False sans exception."""
        assert not save_json({'value': object()}, self.workdir / 'bad.json')


class CSVUtilsTest(SimpleTestCase):
    """Tests des CSV numériques."""

    def setUp(self):
        """Initialisation des données de test."""
        self.workdir = Path(tempfile.mkdtemp(prefix='cm_core_'))
        self.addCleanup(shutil.rmtree, self.workdir, ignore_errors=True)

    def test_full_precision(self):
        """Test: %.17g relit les flottants à l'identique."""
        rows = np.array([[0.1, 1.0 / 3.0], [-2.5e-300, np.pi]])
        path = save_csv(self.workdir / 'graph.csv', ['s0', 'w0'], rows)
        header, loaded = load_csv(path)
        assert header == ['s0', 'w0']
        assert np.array_equal(loaded, rows)

    def test_empty_table(self):
        """Test: en-tête seul, tableau vide de la bonne largeur."""
        path = save_csv(self.workdir / 'empty.csv', ['x', 'y', 'z'], [])
        _, loaded = load_csv(path)
        assert loaded.shape == (0, 3)


class HelpersTest(SimpleTestCase):
    """Tests des autres utilitaires."""

    def test_content_hash(self):
        """Test: SHA-256 hexadécimal stable."""
        assert content_hash('abc') == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'

    def test_rng_streams(self):
        """Test: même graine et même flux, mêmes tirages; flux distincts, tirages distincts."""
        assert np.array_equal(make_rng(7, 1).uniform(size=4), make_rng(7, 1).uniform(size=4))
        assert not np.array_equal(make_rng(7, 1).uniform(size=4), make_rng(7, 2).uniform(size=4))

    def test_parallel_map_keeps_order(self):
        """Test: résultats dans l'ordre, avec ou sans pool."""
        items = list(range(20))
        assert parallel_map(lambda x: x * x, items, workers=1) == [x * x for x in items]
        assert parallel_map(lambda x: x * x, items, workers=4) == [x * x for x in items]

    def test_run_timer(self):
        """Test: durée positive après la sortie du bloc."""
        with RunTimer('étape') as timer:
            sum(range(1000))
        assert timer.duration >= 0.0
        assert RunTimer('jamais lancé').duration == 0.0
        with pytest.raises(ZeroDivisionError):
            with RunTimer('échec'):
                1 / 0
