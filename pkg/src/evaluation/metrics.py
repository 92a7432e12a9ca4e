"""Relative state errors of quadratic manifold reconstructions"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable

import numpy as np
import pandas as pd

from src.core.snapshots import CandidateBasis, SnapshotSet
from src.core.tensorops import khatri_rao_square
from src.models.manifold import QuadraticManifoldModel
from src.utils.errors import InputError
from src.utils.logger import setup_logger

logger = setup_logger()


@dataclass
class ErrorReport:
    """
    Reconstruction error of one model on one snapshot set

    Attributes:
        relative_frobenius: ||S_test - S_approx||_F / ||S_test||_F
        per_snapshot_l2: ||column error||_2 for every snapshot
        per_snapshot_relative: Column error divided by the column norm (NaN for zero columns)
        method: Fitting method of the model
        params: r, q, m and gamma of the model
    """

    relative_frobenius: float
    per_snapshot_l2: np.ndarray
    per_snapshot_relative: np.ndarray
    method: str
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return len(self.per_snapshot_l2)

    def to_frame(self) -> pd.DataFrame:
        """Summary row followed by the per-snapshot series"""
        summary = pd.DataFrame([{
            'row': 'summary',
            'snapshot': np.nan,
            'l2_error': float(np.sqrt(np.sum(self.per_snapshot_l2 ** 2))),
            'relative_l2_error': self.relative_frobenius,
        }])
        series = pd.DataFrame({
            'row': 'snapshot',
            'snapshot': np.arange(1, self.n_snapshots + 1),
            'l2_error': self.per_snapshot_l2,
            'relative_l2_error': self.per_snapshot_relative,
        })
        return pd.concat([summary, series], ignore_index=True)


def _centered_reconstruction(model: QuadraticManifoldModel, data: np.ndarray) -> np.ndarray:
    X = model.V_r.T @ data
    approx = model.V_r @ X
    if not model.is_linear and model.q:
        approx = approx + model.V_q @ (model.Xi @ khatri_rao_square(X))
    return approx


def _check_set(model: QuadraticManifoldModel, S_test: SnapshotSet) -> None:
    if S_test.n_dofs != model.n_dofs:
        raise InputError(
            f"test data has {S_test.n_dofs} degrees of freedom, model has {model.n_dofs}"
        )


def reconstruct_set(model: QuadraticManifoldModel, S_test: SnapshotSet) -> np.ndarray:
    """
    Project every snapshot onto the manifold and lift it back

    Args:
        model: Fitted model
        S_test: Snapshots centered with the model's reference

    Returns:
        N×K matrix of reconstructed (uncentered) states
    """
    _check_set(model, S_test)
    return _centered_reconstruction(model, S_test.data) + model.reference[:, None]


def relative_error(S_test: np.ndarray, S_approx: np.ndarray) -> float:
    """||S_test - S_approx||_F / ||S_test||_F"""
    S_test = np.asarray(S_test, dtype=float)
    S_approx = np.asarray(S_approx, dtype=float)
    if S_test.shape != S_approx.shape:
        raise InputError(f"shape mismatch: {S_test.shape} vs {S_approx.shape}")
    norm = np.linalg.norm(S_test)
    if norm == 0:
        raise InputError("test data has zero norm; the relative error is undefined")
    return float(np.linalg.norm(S_test - S_approx) / norm)


def evaluate(model: QuadraticManifoldModel, S_test: SnapshotSet) -> ErrorReport:
    """
    Reconstruct a snapshot set and measure the error

    Errors are measured on centered states, where ||S_test||_F is the norm of
    the centered test data.

    Args:
        model: Fitted model
        S_test: Snapshots centered with the model's reference

    Returns:
        ErrorReport
    """
    _check_set(model, S_test)
    data = S_test.data
    residual = data - _centered_reconstruction(model, data)

    relative = relative_error(data, data - residual)
    per_snapshot = np.linalg.norm(residual, axis=0)
    column_norms = np.linalg.norm(data, axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        per_snapshot_relative = np.where(column_norms > 0, per_snapshot / column_norms, np.nan)

    logger.debug(f"{model.method.value}: relative error {relative:.6e} on {data.shape[1]} snapshots")
    return ErrorReport(
        relative_frobenius=relative,
        per_snapshot_l2=per_snapshot,
        per_snapshot_relative=per_snapshot_relative,
        method=model.method.value,
        params=model_params(model),
    )


def model_params(model: QuadraticManifoldModel) -> Dict[str, Any]:
    return {
        'r': model.r,
        'q': model.q,
        'm': model.factor.m if model.factor is not None else None,
        'gamma': model.gamma,
    }


def training_error(model: QuadraticManifoldModel, basis: CandidateBasis) -> float:
    """
    Relative training error computed in the feature space of the basis

    Uses ||S - V_r X - V_q Ξ W||² = ||S||² - ||X||² + ||Ξ W||² - 2<Q_qᵀ S̃, Ξ W>
    with X = Q_rᵀ S̃, so the N×K snapshot matrix is never touched.

    Args:
        model: Model whose factor lies in the span of the basis
        basis: Candidate basis the model was fitted on

    Returns:
        Relative Frobenius training error
    """
    if model.factor is None:
        raise InputError("model carries no feature-space factor; evaluate it on snapshot data")
    if model.factor.m != basis.m:
        raise InputError(f"model was fitted with m={model.factor.m}, basis has m={basis.m}")
    if basis.total_energy <= 0:
        raise InputError("snapshot data has zero energy")

    X = model.factor.Q_r.T @ basis.S_tilde
    squared = basis.total_energy - np.sum(X * X)
    if not model.is_linear and model.q:
        Y = model.factor.Q_q.T @ basis.S_tilde
        E = model.Xi @ khatri_rao_square(X)
        squared += np.sum(E * E) - 2.0 * np.sum(Y * E)
    return float(np.sqrt(max(squared, 0.0) / basis.total_energy))


def time_series_table(reports: Iterable[ErrorReport]) -> pd.DataFrame:
    """
    Per-snapshot error series of several methods side by side

    Columns: snapshot, normalized_time in [0, 1], then l2_<method> and
    relative_l2_<method> for every report.
    """
    reports = list(reports)
    if not reports:
        raise InputError("no error reports to tabulate")
    K = reports[0].n_snapshots
    if any(r.n_snapshots != K for r in reports):
        raise InputError("all reports must cover the same snapshots")

    table = pd.DataFrame({
        'snapshot': np.arange(1, K + 1),
        'normalized_time': np.linspace(0.0, 1.0, K) if K > 1 else np.zeros(1),
    })
    for report in reports:
        table[f"l2_{report.method}"] = report.per_snapshot_l2
        table[f"relative_l2_{report.method}"] = report.per_snapshot_relative
    return table
