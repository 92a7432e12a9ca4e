"""End-to-end tests of the command-line entry point"""
import io
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

import main
from src.models.manifold import ModelMethod
from src.models.qmfit import fit_greedy
from src.storage.artifacts import ArtifactStore
from src.storage.fqm1 import read_container
from src.utils.csv_export import load_metadata, load_table
from src.utils.errors import NumericalError


class CliTestCase(unittest.TestCase):
    """Runs main.main() in a scratch directory with output captured"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.store = ArtifactStore()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def path(self, name):
        return os.path.join(self.temp_dir, name)

    def run_main(self, *argv):
        with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
            return main.main(list(argv))

    def make_parabola_basis(self):
        self.assertEqual(self.run_main('synth', '--output', self.path('parabola.csv')), 0)
        self.assertEqual(self.run_main(
            'svd', '--input', self.path('parabola.csv'), '--output', self.path('basis.fqm'),
            '--centering', 'zero'
        ), 0)
        return self.path('basis.fqm')


class TestWorkflow(CliTestCase):
    """synth -> svd -> fit -> eval"""

    def test_full_flow(self):
        basis_path = self.make_parabola_basis()
        self.assertEqual(self.run_main(
            'fit', '--basis', basis_path, '--method', 'riemannian', '--r', '1', '--q', '1',
            '--output', self.path('model.fqm')
        ), 0)
        self.assertTrue(os.path.exists(self.path('model.report.csv')))
        history = load_table(self.path('model.report.csv'))
        self.assertEqual(list(history.columns), ['iteration', 'cost', 'grad_norm', 'feasibility'])
        self.assertTrue(np.all(np.diff(history['cost']) <= 1e-12))

        self.assertEqual(self.run_main(
            'eval', '--model', self.path('model.fqm'), '--test', self.path('parabola.csv'),
            '--output', self.path('eval.csv')
        ), 0)
        report = load_table(self.path('eval.csv'))
        self.assertEqual(len(report), 26)
        self.assertEqual(report['row'][0], 'summary')
        self.assertLess(report['relative_l2_error'][0], 1e-3)
        self.assertEqual(load_metadata(self.path('eval.csv'))['method'], 'riemannian_qm')

    def test_svd_of_diagonal_matrix(self):
        np.savetxt(self.path('diag.csv'), np.diag([3.0, 2.0, 1.0]), delimiter=',')
        self.assertEqual(self.run_main(
            'svd', '--input', self.path('diag.csv'), '--output', self.path('diag.fqm'),
            '--centering', 'zero', '--m', '2'
        ), 0)
        basis = self.store.load_basis(self.path('diag.fqm'))
        self.assertEqual(basis.m, 2)
        assert_allclose(basis.sigma[:2], [3.0, 2.0], rtol=1e-12)

    def test_split_synth(self):
        self.assertEqual(self.run_main(
            'synth', '--kind', 'poly', '--n', '12', '--samples', '30', '--split',
            '--output', self.path('poly.fqm')
        ), 0)
        train = self.store.read_matrix(self.path('poly_train.fqm'))
        test = self.store.read_matrix(self.path('poly_test.fqm'))
        self.assertEqual(train.shape, (12, 15))
        self.assertEqual(test.shape, (12, 15))

    def test_greedy_sidecar_matches_library(self):
        basis_path = self.make_parabola_basis()
        self.assertEqual(self.run_main(
            'fit', '--basis', basis_path, '--method', 'greedy', '--r', '1', '--q', '1',
            '--output', self.path('greedy.fqm')
        ), 0)
        sidecar = load_table(self.path('greedy.greedy.csv'))
        _, trace = fit_greedy(self.store.load_basis(basis_path), 1, 1, 0.0)
        self.assertEqual(sidecar['mode'].tolist(), trace.mode_numbers)
        assert_allclose(sidecar['objective'], trace.objective_history, rtol=1e-12)

    def test_config_file_and_flag_precedence(self):
        basis_path = self.make_parabola_basis()
        with open(self.path('run.conf'), 'w') as f:
            f.write("method=qm\nr=2\nq=1\n")
        self.assertEqual(self.run_main(
            '--config', self.path('run.conf'), 'fit', '--basis', basis_path, '--r', '1',
            '--output', self.path('qm.fqm')
        ), 0)
        model = self.store.load_model(self.path('qm.fqm'))
        self.assertEqual(model.method, ModelMethod.POD_QM)
        self.assertEqual(model.r, 1)
        self.assertEqual(model.q, 1)

    def test_pod_ignores_q_with_warning(self):
        basis_path = self.make_parabola_basis()
        with self.assertLogs('fastqm', level='WARNING') as logs:
            code = self.run_main(
                'fit', '--basis', basis_path, '--method', 'pod', '--r', '1', '--q', '1',
                '--output', self.path('pod.fqm')
            )
        self.assertEqual(code, 0)
        self.assertTrue(any('ignoring q=1' in line for line in logs.output))
        self.assertEqual(self.store.load_model(self.path('pod.fqm')).q, 0)

    def test_pod_without_q_does_not_warn(self):
        basis_path = self.make_parabola_basis()
        with patch('src.reduction_pipeline.logger.warning') as warning:
            code = self.run_main(
                'fit', '--basis', basis_path, '--method', 'pod', '--r', '1',
                '--output', self.path('pod.fqm')
            )
        self.assertEqual(code, 0)
        warning.assert_not_called()
        self.assertEqual(int(read_container(self.path('pod.fqm'))[0]['q']), 0)

    def test_qm_without_q_uses_one_quadratic_mode(self):
        basis_path = self.make_parabola_basis()
        self.assertEqual(self.run_main(
            'fit', '--basis', basis_path, '--method', 'qm', '--r', '1',
            '--output', self.path('qm.fqm')
        ), 0)
        self.assertEqual(self.store.load_model(self.path('qm.fqm')).q, 1)


class TestMultiFile(CliTestCase):
    """Comma separated inputs and models, optimized mode export"""

    def test_svd_concatenates_inputs(self):
        self.run_main('synth', '--output', self.path('a.csv'))
        self.run_main('synth', '--samples', '10', '--output', self.path('b.csv'))
        self.assertEqual(self.run_main(
            'svd', '--input', f"{self.path('a.csv')},{self.path('b.csv')}",
            '--output', self.path('basis.fqm'), '--centering', 'zero'
        ), 0)
        basis = self.store.load_basis(self.path('basis.fqm'))
        self.assertEqual(basis.n_snapshots, 35)

    def test_fit_writes_optimized_modes(self):
        basis_path = self.make_parabola_basis()
        self.assertEqual(self.run_main(
            'fit', '--basis', basis_path, '--method', 'qm', '--r', '1', '--q', '1',
            '--output', self.path('qm.fqm'), '--modes', self.path('modes.csv')
        ), 0)
        model = self.store.load_model(self.path('qm.fqm'))
        modes = self.store.read_matrix(self.path('modes.csv'))
        self.assertEqual(modes.shape, (2, 2))
        assert_array_equal(modes, np.hstack([model.V_r, model.V_q]))

    def test_eval_compares_models(self):
        basis_path = self.make_parabola_basis()
        for method in ('pod', 'qm'):
            self.assertEqual(self.run_main(
                'fit', '--basis', basis_path, '--method', method, '--r', '1',
                '--output', self.path(f'{method}.fqm')
            ), 0)
        self.assertEqual(self.run_main(
            'eval', '--model', f"{self.path('pod.fqm')},{self.path('qm.fqm')}",
            '--test', self.path('parabola.csv'), '--output', self.path('eval.csv')
        ), 0)
        report = load_table(self.path('eval.csv'))
        self.assertEqual(sorted(set(report['method'])), ['pod_only', 'pod_qm'])
        self.assertEqual(len(report), 52)
        self.assertEqual(load_metadata(self.path('eval.csv'))['method'], 'pod_only,pod_qm')

        series = load_table(self.path('eval_series.csv'))
        self.assertEqual(len(series), 25)
        for column in ('l2_pod_only', 'l2_pod_qm', 'relative_l2_pod_only', 'relative_l2_pod_qm'):
            self.assertIn(column, series.columns)

    def test_eval_rejects_duplicate_methods(self):
        basis_path = self.make_parabola_basis()
        self.run_main('fit', '--basis', basis_path, '--method', 'pod', '--output', self.path('pod.fqm'))
        code = self.run_main(
            'eval', '--model', f"{self.path('pod.fqm')},{self.path('pod.fqm')}",
            '--test', self.path('parabola.csv'), '--output', self.path('eval.csv')
        )
        self.assertEqual(code, 1)


class TestSweeps(CliTestCase):
    """sweep and rotation-sweep commands"""

    def test_sweep_marks_infeasible_points(self):
        basis_path = self.make_parabola_basis()
        self.assertEqual(self.run_main(
            'sweep', '--basis', basis_path, '--r-values', '1,2', '--q', '1',
            '--grad-tol', '1e-4', '--output', self.path('sweep.csv')
        ), 0)
        table = load_table(self.path('sweep.csv'))
        self.assertEqual(len(table), 8)
        counts = table['status'].value_counts().to_dict()
        self.assertEqual(counts, {'ok': 5, 'infeasible': 3})

        figure = load_table(self.path('sweep_figure.csv'))
        self.assertEqual(figure['r'].tolist(), [1, 2])
        self.assertTrue(np.isnan(figure['error_riemannian'][1]))
        self.assertLess(figure['error_riemannian'][0], figure['error_qm'][0])

    def test_rotation_sweep(self):
        self.assertEqual(self.run_main(
            'rotation-sweep', '--theta-step', '0.1', '--output', self.path('rotation.csv')
        ), 0)
        table = load_table(self.path('rotation.csv'))
        self.assertEqual(len(table), 63)
        assert_allclose(table['relative_error'][0], 0.3659, atol=1e-3)
        self.assertLess(table['relative_error'].min(), 0.1)


class TestExitCodes(CliTestCase):
    """Error classes map to process exit codes"""

    def test_m_too_large_is_input_error(self):
        self.run_main('synth', '--output', self.path('parabola.csv'))
        code = self.run_main(
            'svd', '--input', self.path('parabola.csv'), '--output', self.path('basis.fqm'),
            '--m', '3'
        )
        self.assertEqual(code, 1)

    def test_fit_m_above_stored_modes_is_input_error(self):
        basis_path = self.make_parabola_basis()
        code = self.run_main(
            'fit', '--basis', basis_path, '--method', 'qm', '--m', '5',
            '--output', self.path('qm.fqm')
        )
        self.assertEqual(code, 1)
        self.assertFalse(os.path.exists(self.path('qm.fqm')))

    def test_missing_input_is_io_error(self):
        code = self.run_main(
            'svd', '--input', self.path('missing.csv'), '--output', self.path('basis.fqm')
        )
        self.assertEqual(code, 2)

    def test_zero_norm_test_data(self):
        basis_path = self.make_parabola_basis()
        self.run_main('fit', '--basis', basis_path, '--method', 'qm', '--output', self.path('qm.fqm'))
        self.store.write_matrix(np.zeros((2, 4)), self.path('zeros.csv'))
        code = self.run_main(
            'eval', '--model', self.path('qm.fqm'), '--test', self.path('zeros.csv'),
            '--output', self.path('eval.csv')
        )
        self.assertEqual(code, 1)

    def test_missing_required_option(self):
        self.assertEqual(self.run_main('fit', '--method', 'qm'), 1)

    def test_bad_arguments(self):
        for argv in (['fit', '--r', 'two'], ['fit', '--method', 'cubic'], ['explode']):
            with self.subTest(argv=argv):
                with self.assertRaises(SystemExit) as ctx:
                    self.run_main(*argv)
                self.assertEqual(ctx.exception.code, 1)

    def test_numerical_error(self):
        def raiser(pipeline):
            raise NumericalError("solver diverged")

        with patch.dict(main.COMMANDS, {'svd': (raiser, main.print_svd)}):
            code = self.run_main('svd', '--input', 'a.csv', '--output', 'b.fqm')
        self.assertEqual(code, 3)

    def test_interrupt(self):
        def raiser(pipeline):
            raise KeyboardInterrupt

        with patch.dict(main.COMMANDS, {'synth': (raiser, main.print_synth)}):
            code = self.run_main('synth', '--output', self.path('x.csv'))
        self.assertEqual(code, 130)


if __name__ == '__main__':
    unittest.main()
