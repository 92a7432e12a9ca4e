"""Reduction pipeline orchestrator: snapshots -> basis -> model -> errors and sweeps"""
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.core.snapshots import (
    center,
    center_with_reference,
    candidate_basis,
    concatenate,
    pod_projection_error,
    split_interleaved,
)
from src.evaluation.metrics import evaluate, time_series_table, training_error
from src.evaluation.sweep import SweepGrid, figure_table, sweep, varying_axes
from src.models.manifold import optimized_modes
from src.models.qmfit import fit_model
from src.optim.stiefel import SolverConfig
from src.storage.artifacts import ArtifactStore
from src.synth.generators import SynthSpec, gen_parabola, generate, rotation_sweep
from src.utils.config import Config, RunConfig
from src.utils.csv_export import save_table
from src.utils.errors import InputError
from src.utils.logger import setup_logger

logger = setup_logger()


def sidecar_path(path: Path, suffix: str) -> Path:
    """'<dir>/<stem><suffix>' next to an output file"""
    return path.with_name(path.stem + suffix)


def split_paths(value: str) -> List[str]:
    """Comma separated file list of --input and --model"""
    paths = [p.strip() for p in value.split(',') if p.strip()]
    if not paths:
        raise InputError("empty file list")
    return paths


class ReductionPipeline:
    """Runs one command of the reduction workflow from a validated RunConfig"""

    def __init__(self, config: RunConfig):
        """
        Initialize pipeline with run parameters and an artifact store

        Args:
            config: Merged run parameters
        """
        Config.validate()
        self.config = config
        self.store = ArtifactStore()

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            grad_tol=self.config.grad_tol,
            max_iters=self.config.max_iters,
            cg_restart_period=self.config.cg_restart_period,
            seed=self.config.seed,
        )

    def run_svd(self) -> Dict[str, Any]:
        """
        Center the input snapshots and write the candidate basis

        Returns:
            Dictionary with basis statistics
        """
        cfg = self.config
        cfg.validate('svd')
        start_time = time.time()
        logger.info(f"Building candidate basis from {cfg.input}")

        raw = concatenate(self.store.read_matrix(path) for path in split_paths(cfg.input))
        reference = self.store.read_matrix(cfg.reference).ravel() if cfg.reference else None
        snapshots = center(raw, cfg.centering, custom_ref=reference)
        m = cfg.m or min(snapshots.data.shape)
        basis = candidate_basis(snapshots, m, method=cfg.svd_method)

        metadata = {'command': 'svd'}
        metadata.update(cfg.as_metadata('input', 'centering', 'svd_method', 'reference'))
        self.store.save_basis(basis, cfg.output, metadata)

        return {
            'output': cfg.output,
            'n_dofs': basis.n_dofs,
            'n_snapshots': basis.n_snapshots,
            'm': basis.m,
            'leading_sigma': basis.sigma[:min(basis.m, 5)].tolist(),
            'pod_error_m': pod_projection_error(basis, basis.m),
            'duration_seconds': time.time() - start_time,
        }

    def run_fit(self) -> Dict[str, Any]:
        """
        Fit a model on a candidate basis and write it with its history sidecars

        Returns:
            Dictionary with fit statistics, including the training error
        """
        cfg = self.config
        cfg.validate('fit')
        start_time = time.time()

        basis = self.store.load_basis(cfg.basis)
        if cfg.m is not None:
            if cfg.m > basis.m:
                raise InputError(f"--m {cfg.m} exceeds the {basis.m} modes stored in {cfg.basis}")
            if cfg.m < basis.m:
                basis = basis.truncate(cfg.m)
        q = cfg.quadratic_modes()
        if cfg.method == 'pod' and cfg.q:
            logger.warning(f"POD has no quadratic part; ignoring q={cfg.q}")

        model, outcome = fit_model(
            basis, cfg.method, cfg.r, q, cfg.gamma, self._solver_config(), workers=cfg.threads
        )
        train_error = training_error(model, basis)

        output = Path(cfg.output)
        metadata = {'command': 'fit', 'm': str(basis.m), 'q': str(q), 'train_error': repr(train_error)}
        metadata.update(cfg.as_metadata(
            'basis', 'method', 'r', 'gamma', 'grad_tol', 'max_iters', 'cg_restart_period'
        ))
        self.store.save_model(model, output, metadata)
        if cfg.modes:
            self.store.write_matrix(optimized_modes(model), cfg.modes, dict(metadata, part='modes'))

        results: Dict[str, Any] = {
            'output': str(output),
            'method': model.method.value,
            'r': model.r,
            'q': model.q,
            'm': basis.m,
            'train_error': train_error,
            'iterations': 0,
            'termination': None,
            'selected_modes': None,
        }

        report = outcome.report
        if report is not None:
            history = pd.DataFrame({
                'iteration': np.arange(len(report.cost_history)),
                'cost': report.cost_history,
                'grad_norm': report.grad_norm_history,
                'feasibility': report.feasibility_history,
            })
            report_meta = dict(metadata)
            report_meta.update({
                'termination': report.termination.value,
                'initial_cost': repr(report.initial_cost),
                'final_cost': repr(report.final_cost),
                'wall_time': f"{report.wall_time:.6f}",
            })
            save_table(history, sidecar_path(output, '.report.csv'), report_meta)
            results['iterations'] = report.iterations
            results['termination'] = report.termination.value

        trace = outcome.trace
        if trace is not None:
            greedy = pd.DataFrame({
                'iteration': np.arange(1, len(trace.selected_indices) + 1),
                'mode': trace.mode_numbers,
                'objective': trace.objective_history,
            })
            save_table(greedy, sidecar_path(output, '.greedy.csv'), metadata)
            results['selected_modes'] = trace.mode_numbers

        results['duration_seconds'] = time.time() - start_time
        return results

    def run_eval(self) -> Dict[str, Any]:
        """
        Evaluate one or more models on the same test snapshots

        Writes the error report (one block per model) and a '<stem>_series.csv'
        table with the per-snapshot errors of every model side by side.

        Returns:
            Dictionary with the relative error per method
        """
        cfg = self.config
        cfg.validate('eval')
        start_time = time.time()

        models = [self.store.load_model(path) for path in split_paths(cfg.model)]
        methods = [model.method.value for model in models]
        if len(set(methods)) != len(methods):
            raise InputError(f"models to compare must use distinct methods, got {methods}")

        raw = self.store.read_matrix(cfg.test)
        reports = [evaluate(model, center_with_reference(raw, model.reference)) for model in models]

        metadata = {'command': 'eval', 'method': ','.join(methods)}
        if len(reports) == 1:
            metadata.update({k: str(v) for k, v in reports[0].params.items()})
        metadata.update(cfg.as_metadata('model', 'test'))

        frames = []
        for report in reports:
            frame = report.to_frame()
            frame.insert(0, 'method', report.method)
            frames.append(frame)
        output = Path(cfg.output)
        save_table(pd.concat(frames, ignore_index=True), output, metadata)
        series_output = sidecar_path(output, '_series.csv')
        save_table(time_series_table(reports), series_output, metadata)

        return {
            'output': str(output),
            'series_output': str(series_output),
            'n_snapshots': reports[0].n_snapshots,
            'errors': {report.method: report.relative_frobenius for report in reports},
            'duration_seconds': time.time() - start_time,
        }

    def run_sweep(self) -> Dict[str, Any]:
        """
        Run a parameter sweep and write the long table (and a figure table for one-axis sweeps)

        Returns:
            Dictionary with row counts per status
        """
        cfg = self.config
        cfg.validate('sweep')
        start_time = time.time()

        basis = self.store.load_basis(cfg.basis)
        S_test = None
        if cfg.test:
            S_test = center_with_reference(self.store.read_matrix(cfg.test), basis.reference)

        grid = SweepGrid(
            r_values=cfg.r_values or [cfg.r],
            q_values=cfg.q_values or [cfg.quadratic_modes('qm')],
            m_values=cfg.m_values,
            gamma_values=cfg.gamma_values or [cfg.gamma],
            methods=cfg.methods,
        )
        table = sweep(basis, grid, S_test=S_test, cfg=self._solver_config(), workers=cfg.threads)

        metadata = {'command': 'sweep'}
        metadata.update(cfg.as_metadata(
            'basis', 'test', 'methods', 'r_values', 'q_values', 'm_values', 'gamma_values',
            'grad_tol', 'max_iters', 'cg_restart_period'
        ))
        output = Path(cfg.output)
        save_table(table, output, metadata)

        figure_output = None
        axes = varying_axes(table)
        if len(axes) == 1:
            figure_output = sidecar_path(output, '_figure.csv')
            save_table(figure_table(table, axes[0]), figure_output, dict(metadata, axis=axes[0]))

        return {
            'output': str(output),
            'figure_output': str(figure_output) if figure_output else None,
            'rows': len(table),
            'status_counts': table['status'].value_counts().to_dict(),
            'duration_seconds': time.time() - start_time,
        }

    def run_synth(self) -> Dict[str, Any]:
        """
        Generate a synthetic data set and write it (optionally split into train/test)

        Returns:
            Dictionary with the written files
        """
        cfg = self.config
        cfg.validate('synth')
        spec = SynthSpec(
            kind=cfg.kind,
            samples=cfg.samples,
            n=cfg.n,
            r_true=cfg.r_true,
            seed=cfg.seed,
            quadratic_scale=cfg.quadratic_scale,
        )
        snapshots = generate(spec)
        raw = snapshots.raw

        metadata = {'command': 'synth'}
        metadata.update(cfg.as_metadata('kind', 'samples', 'n', 'r_true', 'seed', 'quadratic_scale'))

        output = Path(cfg.output)
        if cfg.split:
            train, test = split_interleaved(raw)
            train_path = sidecar_path(output, '_train' + output.suffix)
            test_path = sidecar_path(output, '_test' + output.suffix)
            self.store.write_matrix(train, train_path, dict(metadata, part='train'))
            self.store.write_matrix(test, test_path, dict(metadata, part='test'))
            files = [str(train_path), str(test_path)]
        else:
            self.store.write_matrix(raw, output, metadata)
            files = [str(output)]

        logger.info(f"Generated {spec.kind.value} data of shape {raw.shape}")
        return {'files': files, 'shape': raw.shape}

    def run_rotation_sweep(self) -> Dict[str, Any]:
        """
        Scan the (r, q) = (1, 1) error over rotations of a two-dimensional data set

        Uses the input file when given, the parabola otherwise.

        Returns:
            Dictionary with the best angle and error
        """
        cfg = self.config
        cfg.validate('rotation-sweep')
        if cfg.input:
            reference = self.store.read_matrix(cfg.reference).ravel() if cfg.reference else None
            snapshots = center(self.store.read_matrix(cfg.input), cfg.centering, custom_ref=reference)
        else:
            snapshots = gen_parabola(cfg.samples)

        count = int(np.floor((cfg.theta_stop - cfg.theta_start) / cfg.theta_step + 1e-9)) + 1
        angles = cfg.theta_start + cfg.theta_step * np.arange(count)
        table = rotation_sweep(snapshots, angles, cfg.gamma)

        metadata = {'command': 'rotation-sweep'}
        metadata.update(cfg.as_metadata(
            'input', 'samples', 'gamma', 'theta_start', 'theta_stop', 'theta_step'
        ))
        save_table(table, cfg.output, metadata)

        best = int(table['relative_error'].idxmin())
        return {
            'output': cfg.output,
            'points': len(table),
            'best_theta': float(table['theta'][best]),
            'best_error': float(table['relative_error'][best]),
            'error_at_start': float(table['relative_error'][0]),
        }
