"""
Quadratic manifold fitting: POD, POD-based QM, greedy QM and Riemannian QM (FastQM).

All fits work in the feature space of a CandidateBasis: with S̃ = Ṽᵀ S and an
orthonormal frame [Q_r Q_q], the regularized reconstruction objective equals
||S||_F² plus the reduced cost

    -||Q_rᵀ S̃||² + ||Ξ W||² + γ||Ξ||² - 2 Tr(S̃ᵀ Q_q Ξ W),   W = W(Q_rᵀ S̃),

so nothing in the optimization scales with the state dimension N.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.core.snapshots import CandidateBasis
from src.core.tensorops import khatri_rao_square, khatri_rao_square_pullback, quad_dim
from src.models.manifold import (
    ModelFactor,
    ModelMethod,
    QuadraticManifoldModel,
    resolve_method,
)
from src.optim.stiefel import FitReport, SolverConfig, StiefelPoint, minimize
from src.utils.errors import InputError, NumericalError
from src.utils.logger import setup_logger

logger = setup_logger()

# Relative residual accepted from the normal-equation solve
XI_RESIDUAL_TOL = 1e-8


@dataclass
class GreedyTrace:
    """
    Selection history of the greedy method

    Attributes:
        selected_indices: Chosen candidate modes in selection order (0-based)
        objective_history: Minimized representation error after each selection
    """

    selected_indices: List[int] = field(default_factory=list)
    objective_history: List[float] = field(default_factory=list)

    @property
    def mode_numbers(self) -> List[int]:
        """1-based mode numbers, as singular vectors are usually counted"""
        return [j + 1 for j in self.selected_indices]


@dataclass
class FitOutcome:
    """Side products of a fit besides the model"""

    report: Optional[FitReport] = None
    trace: Optional[GreedyTrace] = None


def solve_xi(S_hat_q: np.ndarray, W: np.ndarray, gamma: float) -> np.ndarray:
    """
    Regularized least-squares coefficients: Ξ (W Wᵀ + γI) = S_hat_q Wᵀ

    Args:
        S_hat_q: q×K projection of the data onto the quadratic basis
        W: p×K quadratic features, p = r(r+1)/2
        gamma: Regularization, >= 0

    Returns:
        Ξ of shape q×p

    Raises:
        NumericalError: If the normal matrix is singular (only possible for γ = 0)
    """
    S_hat_q = np.asarray(S_hat_q, dtype=float)
    W = np.asarray(W, dtype=float)
    if gamma < 0:
        raise InputError(f"gamma must be >= 0, got {gamma}")
    if S_hat_q.ndim != 2 or W.ndim != 2 or S_hat_q.shape[1] != W.shape[1]:
        raise InputError(f"incompatible shapes {S_hat_q.shape} and {W.shape}")

    return _solve_normal(W @ W.T, S_hat_q @ W.T, gamma)


def _solve_normal(normal: np.ndarray, rhs: np.ndarray, gamma: float) -> np.ndarray:
    """Ξ from the Gram form Ξ (G + γI) = B; `normal` is modified in place"""
    normal[np.diag_indices(normal.shape[0])] += gamma
    try:
        factor = linalg.cho_factor(normal, lower=False, check_finite=True)
        Xi = linalg.cho_solve(factor, rhs.T).T
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(
            f"normal matrix W Wᵀ + γI is not positive definite (γ = {gamma}): {e}; "
            f"use a regularization γ > 0"
        )

    rhs_norm = np.linalg.norm(rhs)
    residual = np.linalg.norm(Xi @ normal - rhs)
    if not np.isfinite(residual) or residual > XI_RESIDUAL_TOL * max(rhs_norm, np.finfo(float).tiny):
        if rhs_norm > 0 or not np.isfinite(residual):
            raise NumericalError(
                f"normal equations solved inaccurately (relative residual "
                f"{residual / max(rhs_norm, np.finfo(float).tiny):.2e}, γ = {gamma}); "
                f"use a larger regularization γ"
            )
    return Xi


def _check_dims(basis: CandidateBasis, r: int, q: int) -> None:
    if r < 1:
        raise InputError(f"r must be >= 1, got {r}")
    if q < 0:
        raise InputError(f"q must be >= 0, got {q}")
    if r + q > basis.m:
        raise InputError(f"r + q = {r + q} exceeds the number of candidate modes m = {basis.m}")


def _objective_terms(
    Q_r: np.ndarray,
    Q_q: np.ndarray,
    S_tilde: np.ndarray,
    gamma: float,
    with_grad: bool
) -> Tuple[float, Optional[np.ndarray], np.ndarray]:
    X = Q_r.T @ S_tilde
    Y = Q_q.T @ S_tilde
    W = khatri_rao_square(X)
    Xi = solve_xi(Y, W, gamma)
    E = Xi @ W

    cost = -np.sum(X * X) + np.sum(E * E) + gamma * np.sum(Xi * Xi) - 2.0 * np.sum(Y * E)
    if not with_grad:
        return float(cost), None, Xi

    # Ξ is held at its minimizer (envelope theorem)
    G_W = 2.0 * Xi.T @ (E - Y)
    G_X = khatri_rao_square_pullback(X, G_W)
    grad_r = -2.0 * S_tilde @ X.T + S_tilde @ G_X.T
    grad_q = -2.0 * S_tilde @ E.T
    return float(cost), np.hstack([grad_r, grad_q]), Xi


def feature_objective(
    point: StiefelPoint,
    S_tilde: np.ndarray,
    gamma: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Reduced cost, its Euclidean gradient and the inner minimizer Ξ at a frame

    Args:
        point: Feasible frame [Q_r Q_q] in St(m, r+q)
        S_tilde: m×K projected data
        gamma: Regularization

    Returns:
        (cost, m×(r+q) Euclidean gradient, Ξ)
    """
    if S_tilde.shape[0] != point.shape[0]:
        raise InputError(f"S_tilde has {S_tilde.shape[0]} rows, frame has {point.shape[0]}")
    return _objective_terms(point.Q_r, point.Q_q, S_tilde, gamma, with_grad=True)


def reduced_cost(Q: np.ndarray, r: int, S_tilde: np.ndarray, gamma: float) -> float:
    """Reduced cost at an arbitrary m×(r+q) matrix, with Ξ re-solved (no feasibility check)"""
    Q = np.asarray(Q, dtype=float)
    cost, _, _ = _objective_terms(Q[:, :r], Q[:, r:], S_tilde, gamma, with_grad=False)
    return cost


def full_space_objective(
    S: np.ndarray,
    V_r: np.ndarray,
    V_q: np.ndarray,
    Xi: np.ndarray,
    gamma: float
) -> float:
    """||(I - V_r V_rᵀ) S - V_q Ξ W(V_rᵀ S)||_F² + γ||Ξ||_F² evaluated in the state space"""
    X = V_r.T @ S
    residual = S - V_r @ X - V_q @ (Xi @ khatri_rao_square(X))
    return float(np.sum(residual * residual) + gamma * np.sum(Xi * Xi))


def solve_xi_full(S: np.ndarray, V_r: np.ndarray, V_q: np.ndarray, gamma: float) -> np.ndarray:
    """Ξ from state-space data: solve_xi(V_qᵀ S, W(V_rᵀ S), γ)"""
    return solve_xi(V_q.T @ S, khatri_rao_square(V_r.T @ S), gamma)


def model_from_frame(
    basis: CandidateBasis,
    Q_r: np.ndarray,
    Q_q: np.ndarray,
    gamma: float,
    method: ModelMethod
) -> QuadraticManifoldModel:
    """
    Assemble a model from feature-space coordinates, refitting Ξ at that frame

    Args:
        basis: Candidate basis
        Q_r: m×r coordinates of the linear basis
        Q_q: m×q coordinates of the quadratic basis
        gamma: Regularization
        method: Method recorded in the model

    Returns:
        QuadraticManifoldModel with V_r = Ṽ Q_r and V_q = Ṽ Q_q
    """
    r, q = Q_r.shape[1], Q_q.shape[1]
    X = Q_r.T @ basis.S_tilde
    if q > 0:
        Xi = solve_xi(Q_q.T @ basis.S_tilde, khatri_rao_square(X), gamma)
    else:
        Xi = np.zeros((0, quad_dim(r)))
    return QuadraticManifoldModel(
        reference=np.array(basis.reference),
        V_r=basis.V_tilde @ Q_r,
        V_q=basis.V_tilde @ Q_q,
        Xi=Xi,
        gamma=float(gamma),
        method=method,
        factor=ModelFactor(Q_r=np.array(Q_r), Q_q=np.array(Q_q)),
    )


def _selection(m: int, indices: Sequence[int]) -> np.ndarray:
    return np.eye(m)[:, list(indices)]


def fit_pod(basis: CandidateBasis, r: int) -> QuadraticManifoldModel:
    """Linear POD model from the r leading candidate modes"""
    _check_dims(basis, r, 0)
    return model_from_frame(
        basis, _selection(basis.m, range(r)), np.zeros((basis.m, 0)), 0.0, ModelMethod.POD_ONLY
    )


def fit_pod_qm(basis: CandidateBasis, r: int, q: int, gamma: float) -> QuadraticManifoldModel:
    """
    POD-based quadratic manifold: modes 1..r linear, modes r+1..r+q quadratic

    Args:
        basis: Candidate basis
        r: Reduced dimension
        q: Number of quadratic modes
        gamma: Regularization

    Returns:
        Fitted model
    """
    _check_dims(basis, r, q)
    if q < 1:
        raise InputError("POD-based QM requires q >= 1")
    logger.info(f"Fitting POD-QM (r={r}, q={q}, γ={gamma})")
    return model_from_frame(
        basis,
        _selection(basis.m, range(r)),
        _selection(basis.m, range(r, r + q)),
        gamma,
        ModelMethod.POD_QM,
    )


def fit_fastqm(
    basis: CandidateBasis,
    r: int,
    q: int,
    gamma: float,
    cfg: Optional[SolverConfig] = None
) -> Tuple[QuadraticManifoldModel, FitReport]:
    """
    Riemannian quadratic manifold: optimize [Q_r Q_q] on St(m, r+q)

    The search starts at [I_{r+q}; 0], the POD-based QM, and every accepted step
    decreases the cost, so the result is never worse than POD-QM on training data.

    Args:
        basis: Candidate basis
        r: Reduced dimension
        q: Number of quadratic modes
        gamma: Regularization
        cfg: Solver settings

    Returns:
        (model, FitReport)
    """
    _check_dims(basis, r, q)
    if q < 1:
        raise InputError("Riemannian QM requires q >= 1")
    cfg = cfg or SolverConfig()
    S_tilde = basis.S_tilde

    def cost_and_grad(point: StiefelPoint) -> Tuple[float, np.ndarray]:
        cost, grad, _ = feature_objective(point, S_tilde, gamma)
        return cost, grad

    logger.info(f"Fitting Riemannian QM (m={basis.m}, r={r}, q={q}, γ={gamma})")
    X0 = StiefelPoint.leading(basis.m, r, q)
    point, report = minimize(cost_and_grad, X0, cfg)

    model = model_from_frame(basis, point.Q_r, point.Q_q, gamma, ModelMethod.RIEMANNIAN_QM)
    report.metadata.update({'m': basis.m, 'r': r, 'q': q, 'gamma': gamma})
    return model, report


class GreedyGram:
    """
    Gram blocks shared by the candidates of one greedy iteration

    With the selected modes s fixed, the features of s + [j] split into the
    products among s (shared), the products of s with j, and j². The blocks
    W_s W_sᵀ and S̃ W_sᵀ are computed once per iteration in `start`; each
    candidate only adds its own rows. At the optimal Ξ the quadratic terms
    collapse to -<Ξ, B> with B the right-hand side of the normal equations.
    """

    def __init__(self, basis: CandidateBasis, gamma: float):
        self.S_tilde = basis.S_tilde
        self.total_energy = basis.total_energy
        self.gamma = gamma
        self.row_energy = np.sum(self.S_tilde * self.S_tilde, axis=1)
        self.start([])

    def start(self, selected: Sequence[int]) -> None:
        self.selected = list(selected)
        self.X = self.S_tilde[self.selected, :]
        if self.selected:
            self.W_s = khatri_rao_square(self.X)
        else:
            self.W_s = np.zeros((0, self.S_tilde.shape[1]))
        self.G_ss = self.W_s @ self.W_s.T
        self.P_s = self.S_tilde @ self.W_s.T
        self.energy = self.total_energy - float(np.sum(self.row_energy[self.selected]))

    def objective(self, j: int, pool: Sequence[int]) -> float:
        """Objective of the linear modes selected + [j] with quadratic pool `pool`"""
        pool = list(pool)
        value = self.energy - float(self.row_energy[j])
        if not pool:
            return value

        x = self.S_tilde[j]
        W_c = np.vstack([self.X * x, (x * x)[None, :]])
        G_sc = self.W_s @ W_c.T
        normal = np.block([[self.G_ss, G_sc], [G_sc.T, W_c @ W_c.T]])
        rhs = np.hstack([self.P_s[pool], self.S_tilde[pool] @ W_c.T])
        Xi = _solve_normal(normal, rhs, self.gamma)
        return value - float(np.sum(Xi * rhs))


def greedy_objective(
    basis: CandidateBasis,
    linear: Sequence[int],
    quadratic: Sequence[int],
    gamma: float
) -> float:
    """
    Regularized representation error of a selection of candidate modes

    ||(I - V_L V_Lᵀ) S - V_P Ξ W(V_Lᵀ S)||² + γ||Ξ||² minimized over Ξ, for the
    linear modes L and the quadratic pool P, computed in the feature space.

    Args:
        basis: Candidate basis
        linear: Candidate indices of the linear basis (0-based, non-empty)
        quadratic: Candidate indices of the quadratic pool (0-based)
        gamma: Regularization

    Returns:
        The minimized objective (includes energy outside the candidate span)
    """
    linear = list(linear)
    if not linear:
        raise InputError("greedy objective needs at least one linear mode")
    gram = GreedyGram(basis, gamma)
    gram.start(linear[:-1])
    return gram.objective(linear[-1], quadratic)


def fit_greedy(
    basis: CandidateBasis,
    r: int,
    q: int,
    gamma: float,
    workers: int = 1
) -> Tuple[QuadraticManifoldModel, GreedyTrace]:
    """
    Greedy quadratic manifold: select r linear modes one at a time

    At every iteration each unselected candidate is tried as the next linear
    mode, with all other unselected candidates as the quadratic pool; the
    candidate with the smallest objective wins (ties go to the smaller index).
    The quadratic basis is then truncated to the q unselected modes with the
    largest singular values and Ξ is refit.

    Args:
        basis: Candidate basis
        r: Reduced dimension
        q: Number of quadratic modes kept after selection
        gamma: Regularization
        workers: Threads used for the candidate evaluations of one iteration

    Returns:
        (model, GreedyTrace)
    """
    _check_dims(basis, r, q)
    if q < 1:
        raise InputError("greedy QM requires q >= 1")
    m = basis.m
    gram = GreedyGram(basis, gamma)
    trace = GreedyTrace()
    selected: List[int] = []

    logger.info(f"Fitting greedy QM (m={m}, r={r}, q={q}, γ={gamma})")
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        for iteration in range(r):
            candidates = [j for j in range(m) if j not in selected]
            gram.start(selected)

            def evaluate(j: int) -> float:
                return gram.objective(j, [k for k in candidates if k != j])

            if workers > 1:
                values = list(pool.map(evaluate, candidates))
            else:
                values = [evaluate(j) for j in candidates]

            best = int(np.argmin(values))
            selected.append(candidates[best])
            trace.selected_indices.append(candidates[best])
            trace.objective_history.append(float(values[best]))
            logger.debug(
                f"greedy iteration {iteration + 1}: mode {candidates[best] + 1}, "
                f"objective {values[best]:.6e}"
            )

    remaining = [j for j in range(m) if j not in selected]
    quadratic = remaining[:q]
    model = model_from_frame(
        basis, _selection(m, selected), _selection(m, quadratic), gamma, ModelMethod.GREEDY_QM
    )
    logger.info(f"Greedy selection: modes {trace.mode_numbers}")
    return model, trace


def fit_model(
    basis: CandidateBasis,
    method,
    r: int,
    q: int,
    gamma: float,
    cfg: Optional[SolverConfig] = None,
    workers: int = 1
) -> Tuple[QuadraticManifoldModel, FitOutcome]:
    """
    Fit a model with any of the four methods

    Args:
        basis: Candidate basis
        method: 'pod', 'qm', 'greedy', 'riemannian' or a ModelMethod
        r: Reduced dimension
        q: Number of quadratic modes (ignored by POD)
        gamma: Regularization (ignored by POD)
        cfg: Solver settings for the Riemannian method
        workers: Threads for greedy candidate evaluation

    Returns:
        (model, FitOutcome)
    """
    method = resolve_method(method)
    if method == ModelMethod.POD_ONLY:
        if q:
            logger.warning(f"POD has no quadratic part; ignoring q={q}")
        return fit_pod(basis, r), FitOutcome()
    if method == ModelMethod.POD_QM:
        return fit_pod_qm(basis, r, q, gamma), FitOutcome()
    if method == ModelMethod.GREEDY_QM:
        model, trace = fit_greedy(basis, r, q, gamma, workers=workers)
        return model, FitOutcome(trace=trace)
    model, report = fit_fastqm(basis, r, q, gamma, cfg)
    return model, FitOutcome(report=report)
