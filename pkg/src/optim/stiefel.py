"""
Geometry of the Stiefel manifold St(m, p) and a Riemannian conjugate-gradient minimizer.

Embedded (Euclidean) metric, tangent projection Z = G - Q sym(QᵀG), sign-fixed
QR retraction and projection-based vector transport.
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.utils.errors import FastQMError, InputError, NumericalError
from src.utils.logger import setup_logger

logger = setup_logger()

CostAndGrad = Callable[['StiefelPoint'], Tuple[float, np.ndarray]]


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _inner(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.sum(A * B))


def feasibility(Q: np.ndarray) -> float:
    """||QᵀQ - I||_F"""
    return float(np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1])))


@dataclass(frozen=True)
class StiefelPoint:
    """
    Orthonormal m×p frame [Q_r Q_q]

    Attributes:
        Q: m×p matrix with orthonormal columns
        split: (r, q) with r + q = p; the first r columns are Q_r, the last q are Q_q
    """

    Q: np.ndarray
    split: Tuple[int, int]

    # Frames produced by retraction drift by round-off only
    TOLERANCE = 1e-8

    def __post_init__(self):
        if self.Q.ndim != 2:
            raise InputError(f"frame must be a matrix, got shape {self.Q.shape}")
        m, p = self.Q.shape
        r, q = self.split
        if r < 0 or q < 0 or r + q != p:
            raise InputError(f"split {self.split} does not match {p} columns")
        if p > m:
            raise InputError(f"St({m}, {p}) is empty: need r + q <= m")
        error = feasibility(self.Q)
        if error > self.TOLERANCE * np.sqrt(max(p, 1)):
            raise InputError(f"frame is not orthonormal: ||QᵀQ - I||_F = {error:.3e}")
        self.Q.setflags(write=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Q.shape

    @property
    def Q_r(self) -> np.ndarray:
        return self.Q[:, :self.split[0]]

    @property
    def Q_q(self) -> np.ndarray:
        return self.Q[:, self.split[0]:]

    @classmethod
    def leading(cls, m: int, r: int, q: int) -> 'StiefelPoint':
        """Frame [I_{r+q}; 0] selecting the first r + q coordinate axes"""
        if r < 1 or q < 0:
            raise InputError(f"need r >= 1 and q >= 0, got r={r}, q={q}")
        if r + q > m:
            raise InputError(f"r + q = {r + q} exceeds m = {m}")
        return cls(np.eye(m, r + q), (r, q))


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector Z at a StiefelPoint (sym(QᵀZ) = 0)"""

    Z: np.ndarray
    base: StiefelPoint

    def norm(self) -> float:
        return float(np.linalg.norm(self.Z))

    def scaled(self, alpha: float) -> 'TangentVector':
        return TangentVector(alpha * self.Z, self.base)


@dataclass
class SolverConfig:
    """
    Stopping rule and line-search settings of the conjugate-gradient solver

    Attributes:
        grad_tol: Stop when the Riemannian gradient norm is at most this value
        max_iters: Maximum number of iterations
        initial_step: Step length guess, divided by (1 + ||grad||)
        armijo: Sufficient-decrease constant of the Armijo condition
        backtrack: Step contraction factor
        max_backtracks: Contractions before the line search gives up
        cg_restart_period: Reset to steepest descent every this many iterations
        seed: Reserved for randomized restarts; the default start is deterministic
    """

    grad_tol: float = 2e-4
    max_iters: int = 500
    initial_step: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    cg_restart_period: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise InputError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iters < 1:
            raise InputError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.backtrack < 1:
            raise InputError(f"backtracking factor must lie in (0, 1), got {self.backtrack}")
        if not 0 < self.armijo < 1:
            raise InputError(f"Armijo constant must lie in (0, 1), got {self.armijo}")
        if self.initial_step <= 0 or self.max_backtracks < 1 or self.cg_restart_period < 1:
            raise InputError("initial_step, max_backtracks and cg_restart_period must be positive")


class Termination(str, Enum):
    GRAD_TOL = 'grad_tol'
    MAX_ITERS = 'max_iters'
    LINE_SEARCH_FAILURE = 'line_search_failure'


@dataclass
class FitReport:
    """
    Optimization history

    cost_history is normalized by |initial cost| (by 1 when the initial cost is 0);
    each entry belongs to an accepted iterate, iterate 0 included.
    """

    iterations: int = 0
    cost_history: List[float] = field(default_factory=list)
    grad_norm_history: List[float] = field(default_factory=list)
    feasibility_history: List[float] = field(default_factory=list)
    wall_time: float = 0.0
    termination: Optional[Termination] = None
    initial_cost: float = float('nan')
    final_cost: float = float('nan')
    metadata: Dict[str, Any] = field(default_factory=dict)

    def record(self, cost: float, grad_norm: float, feas: float) -> None:
        scale = abs(self.initial_cost) or 1.0
        self.cost_history.append(cost / scale)
        self.grad_norm_history.append(grad_norm)
        self.feasibility_history.append(feas)
        self.final_cost = cost


def project_tangent(X: StiefelPoint, G: np.ndarray) -> TangentVector:
    """
    Orthogonal projection of an ambient matrix onto the tangent space at X

    Args:
        X: Base point
        G: m×p matrix

    Returns:
        TangentVector Z = G - Q sym(QᵀG)
    """
    G = np.asarray(G, dtype=float)
    if G.shape != X.Q.shape:
        raise InputError(f"shape {G.shape} does not match frame {X.Q.shape}")
    return TangentVector(G - X.Q @ _sym(X.Q.T @ G), X)


def retract(X: StiefelPoint, Z: TangentVector, step: float) -> StiefelPoint:
    """
    QR retraction: Q-factor of X.Q + step Z with a positive diagonal in R

    Raises:
        NumericalError: If X.Q + step Z is rank deficient
    """
    if Z.Z.shape != X.Q.shape:
        raise InputError(f"tangent shape {Z.Z.shape} does not match frame {X.Q.shape}")
    if step == 0.0:
        return X
    Y = X.Q + step * Z.Z
    Qf, R = np.linalg.qr(Y)
    diag = np.diag(R)
    if np.min(np.abs(diag)) <= 1e3 * np.finfo(float).eps * max(np.linalg.norm(Y), 1.0):
        raise NumericalError(f"retraction is rank deficient at step {step:.3e}")
    return StiefelPoint(Qf * np.sign(diag), X.split)


def transport(X_new: StiefelPoint, Z_old: TangentVector) -> TangentVector:
    """Vector transport by projection onto the tangent space at X_new"""
    return project_tangent(X_new, Z_old.Z)


def _evaluate(cost_and_grad: CostAndGrad, X: StiefelPoint) -> Tuple[float, np.ndarray]:
    cost, G = cost_and_grad(X)
    return float(cost), np.asarray(G, dtype=float)


def minimize(
    cost_and_grad: CostAndGrad,
    X0: StiefelPoint,
    cfg: Optional[SolverConfig] = None,
    callback: Optional[Callable[[int, StiefelPoint, float, float], None]] = None
) -> Tuple[StiefelPoint, FitReport]:
    """
    Riemannian conjugate gradients (Polak-Ribière+) with Armijo backtracking

    Args:
        cost_and_grad: Returns the cost and the Euclidean m×p gradient at a point
        X0: Feasible starting point
        cfg: Solver settings
        callback: Called after every accepted iterate with
                  (iteration, point, cost, riemannian gradient norm)

    Returns:
        (final point, FitReport); the final cost never exceeds the cost at X0

    Raises:
        NumericalError: Non-finite cost or gradient at an accepted iterate
    """
    cfg = cfg or SolverConfig()
    started = time.perf_counter()
    report = FitReport(metadata={'shape': X0.shape, 'split': X0.split})

    X = X0
    cost, G = _evaluate(cost_and_grad, X)
    if not np.isfinite(cost) or not np.all(np.isfinite(G)):
        report.wall_time = time.perf_counter() - started
        raise NumericalError("non-finite cost or gradient at the starting point", report)

    report.initial_cost = cost
    grad = project_tangent(X, G)
    grad_norm = grad.norm()
    report.record(cost, grad_norm, feasibility(X.Q))
    if callback:
        callback(0, X, cost, grad_norm)

    direction = grad.scaled(-1.0)
    previous_cost: Optional[float] = None
    restart = True

    iteration = 0
    while True:
        if grad_norm <= cfg.grad_tol:
            report.termination = Termination.GRAD_TOL
            break
        if iteration >= cfg.max_iters:
            report.termination = Termination.MAX_ITERS
            break

        slope = _inner(grad.Z, direction.Z)
        if slope >= 0:
            # Not a descent direction
            direction = grad.scaled(-1.0)
            slope = -grad_norm ** 2
            restart = True

        if restart or previous_cost is None:
            step = cfg.initial_step / (1.0 + grad_norm)
        else:
            step = 4.0 * (cost - previous_cost) / slope
            if not np.isfinite(step) or step <= 0:
                step = cfg.initial_step / (1.0 + grad_norm)

        accepted = None
        for _ in range(cfg.max_backtracks + 1):
            try:
                trial = retract(X, direction, step)
                trial_cost, trial_G = _evaluate(cost_and_grad, trial)
            except FastQMError as e:
                logger.debug(f"Trial step {step:.3e} rejected: {e}")
                step *= cfg.backtrack
                continue
            if np.isfinite(trial_cost) and trial_cost <= cost + cfg.armijo * step * slope:
                accepted = (trial, trial_cost, trial_G)
                break
            step *= cfg.backtrack

        if accepted is None:
            if not restart:
                # Retry once along steepest descent before giving up
                direction = grad.scaled(-1.0)
                restart = True
                continue
            logger.warning(
                f"Line search failed at iteration {iteration} "
                f"(cost {cost:.6e}, grad norm {grad_norm:.3e})"
            )
            report.termination = Termination.LINE_SEARCH_FAILURE
            break

        X_new, cost_new, G_new = accepted
        if not np.all(np.isfinite(G_new)):
            report.iterations = iteration
            report.wall_time = time.perf_counter() - started
            raise NumericalError(f"non-finite gradient at iteration {iteration + 1}", report)

        grad_new = project_tangent(X_new, G_new)
        grad_new_norm = grad_new.norm()
        iteration += 1

        # Polak-Ribière+ with projection transport
        grad_old = transport(X_new, grad)
        beta = _inner(grad_new.Z, grad_new.Z - grad_old.Z) / max(grad_norm ** 2, 1e-300)
        beta = max(beta, 0.0)
        restart = iteration % cfg.cg_restart_period == 0 or beta == 0.0
        if restart:
            direction = grad_new.scaled(-1.0)
        else:
            carried = transport(X_new, direction)
            direction = TangentVector(-grad_new.Z + beta * carried.Z, X_new)

        previous_cost = cost
        X, cost, grad, grad_norm = X_new, cost_new, grad_new, grad_new_norm
        report.record(cost, grad_norm, feasibility(X.Q))
        logger.debug(
            f"iter {iteration:4d} cost {cost:.10e} |grad| {grad_norm:.3e} "
            f"step {step:.3e} beta {beta:.3f}"
        )
        if callback:
            callback(iteration, X, cost, grad_norm)

    report.iterations = iteration
    report.wall_time = time.perf_counter() - started
    logger.info(
        f"Stiefel CG finished after {iteration} iterations ({report.termination.value}), "
        f"|grad| {grad_norm:.3e}, {report.wall_time:.2f}s"
    )
    return X, report
