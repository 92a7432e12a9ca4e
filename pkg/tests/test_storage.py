"""Unit tests for FQM1 containers and artifact storage"""
import os
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from src.core.snapshots import candidate_basis
from src.models.qmfit import fit_fastqm, fit_pod
from src.optim.stiefel import SolverConfig
from src.storage.artifacts import ArtifactStore
from src.storage.fqm1 import MAGIC, is_container, read_container, write_container
from src.storage.schema import ContainerSchema
from src.synth.generators import gen_parabola
from src.utils.csv_export import load_metadata, load_table, save_table
from src.utils.errors import InputError, StorageError


class TestFQM1(unittest.TestCase):
    """Test the binary container format"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, 'blocks.fqm')

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(0)
        blocks = {
            'small': rng.standard_normal((3, 4)),
            'large': rng.standard_normal((1000, 1000)),
            'special': np.array([[np.nan, np.inf], [-0.0, 5e-324]]),
            'empty': np.zeros((5, 0)),
        }
        write_container(self.path, {'kind': 'test', 'note': 'a=b'}, blocks)
        metadata, loaded = read_container(self.path)

        self.assertEqual(metadata, {'kind': 'test', 'note': 'a=b'})
        self.assertEqual(list(loaded), list(blocks))
        for name, array in blocks.items():
            self.assertEqual(loaded[name].shape, array.shape)
            self.assertEqual(loaded[name].tobytes(), array.tobytes())

    def test_layout(self):
        write_container(self.path, {'k': 'v'}, {'A': np.array([[1.0, 2.0], [3.0, 4.0]])})
        raw = Path(self.path).read_bytes()
        self.assertEqual(raw[:4], MAGIC)
        self.assertEqual(int.from_bytes(raw[4:12], 'little'), 3)
        self.assertEqual(raw[12:15], b'k=v')
        values = np.frombuffer(raw[-32:], dtype='<f8')
        assert_array_equal(values, [1.0, 3.0, 2.0, 4.0])

    def test_vectors_and_scalars(self):
        write_container(self.path, {}, {'v': np.arange(3.0), 's': np.array(2.5)})
        _, loaded = read_container(self.path)
        self.assertEqual(loaded['v'].shape, (3, 1))
        self.assertEqual(loaded['s'].shape, (1, 1))

    def test_truncated_file(self):
        write_container(self.path, {}, {'A': np.ones((4, 4))})
        raw = Path(self.path).read_bytes()
        Path(self.path).write_bytes(raw[:-5])
        with self.assertRaises(StorageError):
            read_container(self.path)

    def test_bad_magic(self):
        Path(self.path).write_bytes(b'NOPE' + bytes(8))
        with self.assertRaises(StorageError):
            read_container(self.path)
        self.assertFalse(is_container(self.path))

    def test_missing_file(self):
        with self.assertRaises(StorageError):
            read_container(os.path.join(self.temp_dir, 'missing.fqm'))


class TestArtifactStore(unittest.TestCase):
    """Test saving and loading bases, models and snapshot matrices"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.store = ArtifactStore()
        self.S = gen_parabola(25)
        self.basis = candidate_basis(self.S, 2)

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def path(self, name):
        return os.path.join(self.temp_dir, name)

    def test_basis_round_trip(self):
        self.store.save_basis(self.basis, self.path('basis.fqm'), {'command': 'svd'})
        loaded = self.store.load_basis(self.path('basis.fqm'))
        assert_array_equal(loaded.sigma, self.basis.sigma)
        assert_array_equal(loaded.V_tilde, self.basis.V_tilde)
        assert_array_equal(loaded.S_tilde, self.basis.S_tilde)
        self.assertEqual(loaded.total_energy, self.basis.total_energy)
        self.assertEqual(loaded.centering_mode, self.basis.centering_mode)
        self.assertEqual(read_container(self.path('basis.fqm'))[0]['command'], 'svd')

    def test_model_round_trip(self):
        model, _ = fit_fastqm(self.basis, 1, 1, 1e-3, SolverConfig(grad_tol=1e-4))
        self.store.save_model(model, self.path('model.fqm'))
        loaded = self.store.load_model(self.path('model.fqm'))
        self.assertEqual(loaded.method, model.method)
        self.assertEqual(loaded.gamma, model.gamma)
        assert_array_equal(loaded.Xi, model.Xi)
        assert_array_equal(loaded.V_r, model.V_r)
        assert_array_equal(loaded.factor.Q_q, model.factor.Q_q)

    def test_pod_model_round_trip(self):
        model = fit_pod(self.basis, 1)
        self.store.save_model(model, self.path('pod.fqm'))
        loaded = self.store.load_model(self.path('pod.fqm'))
        self.assertEqual(loaded.q, 0)
        self.assertEqual(loaded.Xi.shape, (0, 1))

    def test_wrong_kind(self):
        self.store.save_basis(self.basis, self.path('basis.fqm'))
        with self.assertRaises(StorageError):
            self.store.load_model(self.path('basis.fqm'))

    def test_missing_block(self):
        write_container(self.path('bad.fqm'), {'kind': 'basis'}, {'sigma': np.ones(2)})
        with self.assertRaises(StorageError):
            self.store.load_basis(self.path('bad.fqm'))

    def test_csv_matrix_round_trip(self):
        matrix = np.random.default_rng(1).standard_normal((4, 7))
        self.store.write_matrix(matrix, self.path('m.csv'), {'command': 'test'})
        assert_array_equal(self.store.read_matrix(self.path('m.csv')), matrix)
        self.assertEqual(load_metadata(self.path('m.csv'))['kind'], 'snapshots')

    def test_fqm1_matrix_round_trip(self):
        matrix = np.random.default_rng(2).standard_normal((6, 3))
        self.store.write_matrix(matrix, self.path('m.fqm'))
        assert_array_equal(self.store.read_matrix(self.path('m.fqm')), matrix)

    def test_csv_limit(self):
        np.savetxt(self.path('big.csv'), np.ones((10, 10)), delimiter=',')
        with self.assertRaises(InputError):
            ArtifactStore(csv_max_entries=50).read_matrix(self.path('big.csv'))

    def test_non_numeric_csv(self):
        Path(self.path('text.csv')).write_text("1,2\n3,abc\n")
        with self.assertRaises(InputError):
            self.store.read_matrix(self.path('text.csv'))

    def test_missing_matrix(self):
        with self.assertRaises(StorageError):
            self.store.read_matrix(self.path('nothing.csv'))

    def test_schema_verify(self):
        self.assertTrue(ContainerSchema.verify('model', {'kind': 'model'},
                                               ['reference', 'V_r', 'V_q', 'Xi', 'gamma']))
        with self.assertRaises(StorageError):
            ContainerSchema.verify('model', {'format_version': '99'},
                                   ['reference', 'V_r', 'V_q', 'Xi', 'gamma'])


class TestCsvExport(unittest.TestCase):
    """Test CSV tables with metadata headers"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_table_round_trip(self):
        import pandas as pd
        table = pd.DataFrame({'r': [1, 2], 'error': [0.5, 0.25]})
        path = os.path.join(self.temp_dir, 'table.csv')
        save_table(table, path, {'command': 'sweep', 'r_values': '1,2'})
        pd.testing.assert_frame_equal(load_table(path), table)
        metadata = load_metadata(path)
        self.assertEqual(metadata['command'], 'sweep')
        self.assertEqual(metadata['r_values'], '1,2')
        self.assertIn('created_utc', metadata)

    def test_table_floats_are_exact(self):
        import pandas as pd
        values = np.random.default_rng(2).standard_normal(50) * 1e-3
        path = os.path.join(self.temp_dir, 'errors.csv')
        save_table(pd.DataFrame({'error': values}), path)
        assert_array_equal(load_table(path)['error'].to_numpy(), values)


if __name__ == '__main__':
    unittest.main()
