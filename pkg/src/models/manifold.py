"""Quadratic manifold model: s ≈ s̄ + V_r ŝ + V_q Ξ (ŝ ⊗ ŝ)"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.core.tensorops import compressed_square, khatri_rao_square, quad_dim
from src.utils.errors import InputError


class ModelMethod(str, Enum):
    POD_ONLY = 'pod_only'
    POD_QM = 'pod_qm'
    GREEDY_QM = 'greedy_qm'
    RIEMANNIAN_QM = 'riemannian_qm'


# Command-line names of the fitting methods
METHOD_ALIASES = {
    'pod': ModelMethod.POD_ONLY,
    'qm': ModelMethod.POD_QM,
    'greedy': ModelMethod.GREEDY_QM,
    'riemannian': ModelMethod.RIEMANNIAN_QM,
}


def resolve_method(name) -> ModelMethod:
    """Accept either a command-line alias or a ModelMethod value"""
    if isinstance(name, ModelMethod):
        return name
    if name in METHOD_ALIASES:
        return METHOD_ALIASES[name]
    try:
        return ModelMethod(name)
    except ValueError:
        raise InputError(f"unknown method {name!r}; expected one of {sorted(METHOD_ALIASES)}")


@dataclass(frozen=True)
class ModelFactor:
    """
    Coordinates of the bases in the candidate span: V_r = Ṽ Q_r, V_q = Ṽ Q_q

    For POD-QM and greedy models Q_r and Q_q are column selections of the identity.
    """

    Q_r: np.ndarray
    Q_q: np.ndarray

    @property
    def m(self) -> int:
        return self.Q_r.shape[0]


@dataclass(frozen=True)
class QuadraticManifoldModel:
    """
    Decoder of a quadratic manifold approximation

    Attributes:
        reference: Reference state s̄ (length N)
        V_r: N×r orthonormal linear basis
        V_q: N×q orthonormal quadratic basis, orthogonal to V_r
        Xi: q × r(r+1)/2 coefficient matrix (compressed feature order)
        gamma: Regularization used to fit Xi
        method: Fitting method
        factor: Feature-space coordinates of V_r and V_q, when known
    """

    reference: np.ndarray
    V_r: np.ndarray
    V_q: np.ndarray
    Xi: np.ndarray
    gamma: float
    method: ModelMethod
    factor: Optional[ModelFactor] = None

    TOLERANCE = 1e-8

    def __post_init__(self):
        N, r = self.V_r.shape
        if self.reference.shape != (N,):
            raise InputError(f"reference has shape {self.reference.shape}, expected ({N},)")
        if self.V_q.ndim != 2 or self.V_q.shape[0] != N:
            raise InputError(f"V_q has shape {self.V_q.shape}, expected ({N}, q)")
        q = self.V_q.shape[1]
        if self.Xi.shape != (q, quad_dim(r)):
            raise InputError(f"Xi has shape {self.Xi.shape}, expected ({q}, {quad_dim(r)})")
        if self.gamma < 0:
            raise InputError(f"gamma must be >= 0, got {self.gamma}")
        if self.method == ModelMethod.POD_ONLY and q != 0:
            raise InputError("a POD model has no quadratic basis")

        checks = (
            ('V_r', self.V_r.T @ self.V_r - np.eye(r), r),
            ('V_q', self.V_q.T @ self.V_q - np.eye(q), q),
            ('V_rᵀV_q', self.V_r.T @ self.V_q, r * q),
        )
        for name, deviation, size in checks:
            if size and np.linalg.norm(deviation) > self.TOLERANCE * np.sqrt(size):
                raise InputError(f"{name} violates orthonormality: {np.linalg.norm(deviation):.3e}")

        for array in (self.reference, self.V_r, self.V_q, self.Xi):
            array.setflags(write=False)

    @property
    def n_dofs(self) -> int:
        return self.V_r.shape[0]

    @property
    def r(self) -> int:
        return self.V_r.shape[1]

    @property
    def q(self) -> int:
        return self.V_q.shape[1]

    @property
    def is_linear(self) -> bool:
        return self.method == ModelMethod.POD_ONLY


def encode(model: QuadraticManifoldModel, s: np.ndarray) -> np.ndarray:
    """
    Reduced coordinates by linear projection: ŝ = V_rᵀ (s - s̄)

    Args:
        model: Fitted model
        s: State vector of length N, or N×K matrix of states

    Returns:
        Vector of length r (or r×K matrix)
    """
    s = np.asarray(s, dtype=float)
    if s.shape[0] != model.n_dofs or s.ndim > 2:
        raise InputError(f"state shape {s.shape} does not match N = {model.n_dofs}")
    centered = s - model.reference if s.ndim == 1 else s - model.reference[:, None]
    return model.V_r.T @ centered


def decode(model: QuadraticManifoldModel, s_hat: np.ndarray) -> np.ndarray:
    """
    Lift reduced coordinates: s̄ + V_r ŝ + V_q Ξ compressed_square(ŝ)

    Args:
        model: Fitted model
        s_hat: Vector of length r, or r×K matrix

    Returns:
        State vector of length N (or N×K matrix)
    """
    s_hat = np.asarray(s_hat, dtype=float)
    if s_hat.shape[0] != model.r or s_hat.ndim > 2:
        raise InputError(f"reduced shape {s_hat.shape} does not match r = {model.r}")

    if s_hat.ndim == 1:
        state = model.reference + model.V_r @ s_hat
        if not model.is_linear:
            state = state + model.V_q @ (model.Xi @ compressed_square(s_hat))
        return state

    states = model.reference[:, None] + model.V_r @ s_hat
    if not model.is_linear:
        states = states + model.V_q @ (model.Xi @ khatri_rao_square(s_hat))
    return states


def optimized_modes(model: QuadraticManifoldModel) -> np.ndarray:
    """The N×(r+q) frame [V_r V_q], e.g. for plotting learned modes"""
    return np.hstack([model.V_r, model.V_q])
