"""Parameter sweeps over (r, q, m, gamma) for several fitting methods"""
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.snapshots import CandidateBasis, SnapshotSet
from src.evaluation.metrics import evaluate, training_error
from src.models.manifold import METHOD_ALIASES, ModelMethod, resolve_method
from src.models.qmfit import fit_model
from src.optim.stiefel import SolverConfig
from src.utils.errors import FastQMError, InputError
from src.utils.logger import setup_logger

logger = setup_logger()

SWEEP_COLUMNS = [
    'r', 'q', 'm', 'gamma', 'method', 'status', 'train_error', 'test_error',
    'iterations', 'wall_time', 'message',
]
FIGURE_AXES = ('r', 'q', 'm', 'gamma')

# Command-line name of every method, used in tables
METHOD_NAMES = {method: alias for alias, method in METHOD_ALIASES.items()}


@dataclass
class SweepGrid:
    """
    Grid of fit parameters; empty m_values means "the m of the basis"

    Points are enumerated m-major, then r, q, gamma and method, which is
    also the row order of the sweep table.
    """

    r_values: Sequence[int]
    q_values: Sequence[int] = (1,)
    m_values: Sequence[int] = ()
    gamma_values: Sequence[float] = (0.0,)
    methods: Sequence[str] = field(default_factory=lambda: list(METHOD_ALIASES))

    def points(self, default_m: int) -> List[Dict[str, Any]]:
        if not self.r_values:
            raise InputError("sweep grid needs at least one r value")
        m_values = list(self.m_values) or [default_m]
        q_values = list(self.q_values) or [0]
        gamma_values = list(self.gamma_values) or [0.0]
        methods = [METHOD_NAMES[resolve_method(name)] for name in self.methods]
        if not methods:
            raise InputError("sweep grid needs at least one method")

        return [
            {'m': m, 'r': r, 'q': q, 'gamma': float(gamma), 'method': method}
            for m, r, q, gamma, method in itertools.product(
                m_values, self.r_values, q_values, gamma_values, methods
            )
        ]


def _infeasibility(point: Dict[str, Any], basis_m: int) -> Optional[str]:
    r, q, m = point['r'], point['q'], point['m']
    if m < 1 or m > basis_m:
        return f"m={m} outside 1..{basis_m}"
    if r < 1:
        return f"r={r} < 1"
    if resolve_method(point['method']) == ModelMethod.POD_ONLY:
        return None if r <= m else f"r={r} > m={m}"
    if q < 1:
        return f"q={q} < 1"
    if r + q > m:
        return f"r + q = {r + q} > m = {m}"
    return None


def _run_point(
    point: Dict[str, Any],
    bases: Dict[int, CandidateBasis],
    S_test: Optional[SnapshotSet],
    cfg: SolverConfig
) -> Dict[str, Any]:
    row = dict(point)
    row.update({
        'status': 'ok', 'train_error': np.nan, 'test_error': np.nan,
        'iterations': 0, 'wall_time': 0.0, 'message': '',
    })

    reason = _infeasibility(point, max(bases))
    if reason:
        row['status'] = 'infeasible'
        row['message'] = reason
        return row

    basis = bases[point['m']]
    q = 0 if resolve_method(point['method']) == ModelMethod.POD_ONLY else point['q']
    started = time.perf_counter()
    try:
        model, outcome = fit_model(basis, point['method'], point['r'], q, point['gamma'], cfg)
        row['train_error'] = training_error(model, basis)
        if S_test is not None:
            row['test_error'] = evaluate(model, S_test).relative_frobenius
        if outcome.report is not None:
            row['iterations'] = outcome.report.iterations
            row['message'] = outcome.report.termination.value
    except FastQMError as e:
        logger.warning(f"Sweep point {point} failed: {e}")
        row['status'] = 'failed'
        row['message'] = str(e)
    row['wall_time'] = time.perf_counter() - started
    return row


def sweep(
    basis: CandidateBasis,
    grid: SweepGrid,
    S_test: Optional[SnapshotSet] = None,
    cfg: Optional[SolverConfig] = None,
    workers: int = 1
) -> pd.DataFrame:
    """
    Fit and evaluate every grid point

    Infeasible points (r + q > m, m larger than the basis) and points whose fit
    raises are kept in the table with status 'infeasible' or 'failed'.

    Args:
        basis: Candidate basis of the training data; smaller m are truncations
        grid: Parameter grid
        S_test: Optional test snapshots centered with the training reference
        cfg: Solver settings for the Riemannian method
        workers: Number of grid points fitted concurrently

    Returns:
        One row per grid point, in grid order
    """
    cfg = cfg or SolverConfig()
    points = grid.points(basis.m)
    bases = {basis.m: basis}
    for m in {p['m'] for p in points}:
        if 1 <= m < basis.m:
            bases[m] = basis.truncate(m)

    logger.info(f"Sweeping {len(points)} grid points with {workers} worker(s)")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _run_point(p, bases, S_test, cfg), points))
    else:
        rows = []
        for index, point in enumerate(points, start=1):
            rows.append(_run_point(point, bases, S_test, cfg))
            logger.info(f"Sweep point {index}/{len(points)}: {point} -> {rows[-1]['status']}")

    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    counts = table['status'].value_counts().to_dict()
    logger.info(f"Sweep finished: {counts}")
    return table


def varying_axes(table: pd.DataFrame) -> List[str]:
    """Grid axes that take more than one value in a sweep table"""
    return [axis for axis in FIGURE_AXES if table[axis].nunique() > 1]


def figure_table(rows: pd.DataFrame, axis: str, value: Optional[str] = None) -> pd.DataFrame:
    """
    Reshape a sweep table into one error column per method

    Args:
        rows: Sweep table in which only `axis` varies
        axis: One of r, q, m, gamma
        value: 'test_error' or 'train_error'; defaults to test errors when present

    Returns:
        Columns (axis, error_pod, error_qm, error_greedy, error_riemannian);
        infeasible or failed cells are NaN
    """
    if axis not in FIGURE_AXES:
        raise InputError(f"axis must be one of {FIGURE_AXES}, got {axis!r}")
    others = [a for a in varying_axes(rows) if a != axis]
    if others:
        raise InputError(f"figure table needs a one-axis sweep; {others} also vary")
    if value is None:
        value = 'test_error' if rows['test_error'].notna().any() else 'train_error'

    data = rows.copy()
    data.loc[data['status'] != 'ok', value] = np.nan
    wide = data.pivot(index=axis, columns='method', values=value)
    wide = wide.reindex(columns=list(METHOD_ALIASES))
    wide.columns = [f"error_{method}" for method in wide.columns]
    return wide.reset_index()
