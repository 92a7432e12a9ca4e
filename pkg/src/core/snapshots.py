"""Snapshot ingestion, centering, thin SVD and candidate-basis extraction"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy import linalg

from src.utils.errors import InputError, NumericalError
from src.utils.logger import setup_logger

logger = setup_logger()

# N >= GRAM_RATIO * K switches the automatic SVD to the method of snapshots
GRAM_RATIO = 4


class CenteringMode(str, Enum):
    ZERO = 'zero'
    MEAN = 'mean'
    INITIAL = 'initial'
    CUSTOM = 'custom'


@dataclass(frozen=True)
class SnapshotSet:
    """
    Centered snapshot matrix

    Attributes:
        data: N×K matrix, column k is snapshot k minus the reference
        reference: Reference state of length N
        centering_mode: How the reference was chosen
    """

    data: np.ndarray
    reference: np.ndarray
    centering_mode: CenteringMode = CenteringMode.ZERO

    def __post_init__(self):
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise InputError(f"snapshot matrix must be N×K with N, K >= 1, got {self.data.shape}")
        if self.reference.shape != (self.data.shape[0],):
            raise InputError(
                f"reference has shape {self.reference.shape}, expected ({self.data.shape[0]},)"
            )
        self.data.setflags(write=False)
        self.reference.setflags(write=False)

    @property
    def n_dofs(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]

    @property
    def raw(self) -> np.ndarray:
        """Uncentered snapshots"""
        return self.data + self.reference[:, None]


@dataclass(frozen=True)
class CandidateBasis:
    """
    Leading left singular vectors of a centered snapshot matrix

    Attributes:
        V_tilde: N×m orthonormal candidate modes
        sigma: All singular values of the data, non-increasing
        S_tilde: m×K projected data V_tildeᵀ S
        total_energy: ||S||_F², the sum of all squared singular values
        reference: Reference state of the data the basis was built from
        centering_mode: Centering applied to that data
    """

    V_tilde: np.ndarray
    sigma: np.ndarray
    S_tilde: np.ndarray
    total_energy: float
    reference: np.ndarray
    centering_mode: CenteringMode = CenteringMode.ZERO

    def __post_init__(self):
        N, m = self.V_tilde.shape
        if self.S_tilde.shape[0] != m:
            raise InputError(f"S_tilde has {self.S_tilde.shape[0]} rows, expected {m}")
        if self.sigma.shape[0] < m:
            raise InputError(f"need at least m={m} singular values, got {self.sigma.shape[0]}")
        if self.reference.shape != (N,):
            raise InputError(f"reference has shape {self.reference.shape}, expected ({N},)")
        for array in (self.V_tilde, self.sigma, self.S_tilde, self.reference):
            array.setflags(write=False)

    @property
    def m(self) -> int:
        return self.V_tilde.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.V_tilde.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.S_tilde.shape[1]

    def truncate(self, m: int) -> 'CandidateBasis':
        """Keep only the m leading candidate modes"""
        if not 1 <= m <= self.m:
            raise InputError(f"cannot truncate a basis of {self.m} modes to m={m}")
        return replace(
            self,
            V_tilde=self.V_tilde[:, :m].copy(),
            S_tilde=self.S_tilde[:m, :].copy(),
            sigma=self.sigma.copy(),
            reference=self.reference.copy(),
        )


def center(
    raw: np.ndarray,
    mode: str = CenteringMode.MEAN,
    custom_ref: Optional[np.ndarray] = None
) -> SnapshotSet:
    """
    Subtract a reference state from every snapshot

    Args:
        raw: N×K matrix of snapshots
        mode: zero, mean (row-wise mean), initial (first snapshot) or custom
        custom_ref: Reference vector of length N, required for mode=custom

    Returns:
        SnapshotSet with data = raw - reference
    """
    raw = np.array(raw, dtype=float, ndmin=2)
    if raw.ndim != 2:
        raise InputError(f"snapshot matrix must be 2-D, got shape {raw.shape}")
    try:
        mode = CenteringMode(mode)
    except ValueError:
        raise InputError(f"unknown centering mode {mode!r}")
    N = raw.shape[0]

    if mode == CenteringMode.ZERO:
        reference = np.zeros(N)
    elif mode == CenteringMode.MEAN:
        reference = raw.mean(axis=1)
    elif mode == CenteringMode.INITIAL:
        reference = raw[:, 0].copy()
    else:
        if custom_ref is None:
            raise InputError("centering mode 'custom' requires a reference vector")
        reference = np.asarray(custom_ref, dtype=float).ravel()
        if reference.shape != (N,):
            raise InputError(f"custom reference has length {reference.shape[0]}, expected {N}")

    return SnapshotSet(data=raw - reference[:, None], reference=reference, centering_mode=mode)


def center_with_reference(raw: np.ndarray, reference: np.ndarray) -> SnapshotSet:
    """Center a data set (typically test data) by an existing reference state"""
    return center(raw, CenteringMode.CUSTOM, custom_ref=reference)


def split_interleaved(raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split snapshots into alternating training and test sets

    Args:
        raw: N×K snapshot matrix ordered in time

    Returns:
        (train, test) where train holds snapshots 1, 3, 5, ... and test holds 2, 4, 6, ...
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] < 2:
        raise InputError("interleaved split needs at least two snapshots")
    return raw[:, 0::2].copy(), raw[:, 1::2].copy()


def concatenate(raws: Iterable[np.ndarray]) -> np.ndarray:
    """Stack several trajectories column-wise into one snapshot matrix"""
    blocks = [np.asarray(r, dtype=float) for r in raws]
    if not blocks:
        raise InputError("nothing to concatenate")
    if len({b.shape[0] for b in blocks}) != 1:
        raise InputError("all trajectories must have the same state dimension")
    return np.hstack(blocks)


def _thin_svd_direct(S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        U, sigma, _ = linalg.svd(S, full_matrices=False, lapack_driver='gesdd')
    except linalg.LinAlgError:
        logger.warning("gesdd did not converge, retrying with gesvd")
        U, sigma, _ = linalg.svd(S, full_matrices=False, lapack_driver='gesvd')
    return U, sigma


def _thin_svd_gram(S: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    # Method of snapshots: eigen-decomposition of the K×K Gram matrix
    gram = S.T @ S
    evals, evecs = linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    sigma = np.sqrt(evals)

    # Gram eigenvalues carry O(eps·σ₀²) error, so σ below ~sqrt(eps)·σ₀ is noise
    if sigma[m - 1] <= 10.0 * np.sqrt(np.finfo(float).eps * S.shape[1]) * sigma[0]:
        raise NumericalError(
            f"Gram route cannot resolve mode {m}: singular value {sigma[m - 1]:.3e} "
            f"is below round-off; use the direct SVD"
        )

    U = S @ (evecs[:, :m] / sigma[:m])
    # Re-orthonormalize and keep each column's direction
    Qf, R = np.linalg.qr(U)
    Qf *= np.sign(np.diag(R))
    return Qf, sigma[:min(S.shape)]


def candidate_basis(S: SnapshotSet, m: int, method: str = 'auto') -> CandidateBasis:
    """
    Extract the m leading left singular vectors and project the data onto them

    Args:
        S: Centered snapshots
        m: Number of candidate modes, 1 <= m <= min(N, K)
        method: 'direct' thin SVD, 'gram' method of snapshots, or 'auto'

    Returns:
        CandidateBasis with S_tilde = V_tildeᵀ S
    """
    N, K = S.data.shape
    if not 1 <= m <= min(N, K):
        raise InputError(f"m must satisfy 1 <= m <= min(N, K) = {min(N, K)}, got {m}")
    if method not in ('auto', 'direct', 'gram'):
        raise InputError(f"unknown SVD method {method!r}")
    requested = method
    if method == 'auto':
        method = 'gram' if N >= GRAM_RATIO * K else 'direct'

    logger.info(f"Computing thin SVD ({method}) of {N}×{K} snapshots, m={m}")
    try:
        if method == 'gram':
            try:
                U, sigma = _thin_svd_gram(S.data, m)
            except NumericalError as e:
                if requested == 'gram':
                    raise
                logger.warning(f"{e}; falling back to the direct SVD")
                U, sigma = _thin_svd_direct(S.data)
        else:
            U, sigma = _thin_svd_direct(S.data)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(
            f"SVD of {N}×{K} snapshot matrix failed: {e} "
            f"(finite entries: {bool(np.isfinite(S.data).all())}, "
            f"norm: {np.linalg.norm(S.data):.3e})"
        )

    V_tilde = np.ascontiguousarray(U[:, :m])
    S_tilde = V_tilde.T @ S.data
    total_energy = float(np.sum(sigma ** 2))
    logger.debug(f"Leading singular values: {sigma[:min(m, 5)]}")

    return CandidateBasis(
        V_tilde=V_tilde,
        sigma=sigma,
        S_tilde=S_tilde,
        total_energy=total_energy,
        reference=np.array(S.reference),
        centering_mode=S.centering_mode,
    )


def pod_projection_error(basis: CandidateBasis, r: int) -> float:
    """
    Relative Frobenius error of projecting the data onto the first r modes

    Args:
        basis: Candidate basis
        r: Number of retained modes, 0 <= r <= m

    Returns:
        sqrt(sum_{i>r} sigma_i² / sum_i sigma_i²)
    """
    if not 0 <= r <= basis.m:
        raise InputError(f"r must satisfy 0 <= r <= m = {basis.m}, got {r}")
    if basis.total_energy <= 0:
        raise InputError("snapshot data has zero energy")
    tail = float(np.sum(basis.sigma[r:] ** 2))
    return float(np.sqrt(max(tail, 0.0) / basis.total_energy))
