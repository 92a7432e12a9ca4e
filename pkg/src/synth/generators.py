"""
Synthetic snapshot generators: the two-dimensional parabola and random
polynomial manifolds with a known exact quadratic structure.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Tuple

import numpy as np
import pandas as pd

from src.core.snapshots import CandidateBasis, CenteringMode, SnapshotSet, candidate_basis
from src.core.tensorops import khatri_rao_square, quad_dim
from src.models.qmfit import reduced_cost
from src.utils.errors import InputError, NumericalError
from src.utils.logger import setup_logger

logger = setup_logger()

PARABOLA_T_RANGE = (-0.75, 1.25)

# Relative energy outside the r_true leading modes required of a generated data set
MIN_TAIL_ENERGY = 1e-4


class SynthKind(str, Enum):
    PARABOLA = 'parabola'
    POLY_MANIFOLD = 'poly'


@dataclass
class SynthSpec:
    """
    Parameters of a synthetic data set

    Attributes:
        kind: parabola or poly
        samples: Number of snapshots, >= 2
        t_range: Parameter interval of the parabola
        n: State dimension of the polynomial manifold
        r_true: Intrinsic dimension of the polynomial manifold
        seed: Random seed of the polynomial manifold
        quadratic_scale: Magnitude of the quadratic coefficients
    """

    kind: SynthKind = SynthKind.PARABOLA
    samples: int = 25
    t_range: Tuple[float, float] = PARABOLA_T_RANGE
    n: int = 40
    r_true: int = 2
    seed: int = 0
    quadratic_scale: float = 0.25

    def __post_init__(self):
        try:
            self.kind = SynthKind(self.kind)
        except ValueError:
            raise InputError(f"unknown synthetic kind {self.kind!r}")
        if self.samples < 2:
            raise InputError(f"samples must be >= 2, got {self.samples}")
        if not self.t_range[0] < self.t_range[1]:
            raise InputError(f"degenerate parameter interval {self.t_range}")


def gen_parabola(samples: int = 25, t_range: Tuple[float, float] = PARABOLA_T_RANGE) -> SnapshotSet:
    """
    Snapshots s(t) = [t, t²] at uniformly spaced t

    Args:
        samples: Number of snapshots, >= 2
        t_range: Interval of t, endpoints included

    Returns:
        2×samples SnapshotSet with zero reference
    """
    if samples < 2:
        raise InputError(f"samples must be >= 2, got {samples}")
    if not t_range[0] < t_range[1]:
        raise InputError(f"degenerate parameter interval {t_range}")
    t = np.linspace(t_range[0], t_range[1], samples)
    data = np.vstack([t, t ** 2])
    return SnapshotSet(data=data, reference=np.zeros(2), centering_mode=CenteringMode.ZERO)


def gen_poly_manifold(
    n: int,
    r_true: int,
    samples: int,
    seed: int = 0,
    quadratic_scale: float = 0.25
) -> SnapshotSet:
    """
    Snapshots s_k = U a_k + V H w(a_k) on a random quadratic manifold

    U (n×r_true) and V (n×r_true(r_true+1)/2) are orthonormal and mutually
    orthogonal, H is a fixed random matrix scaled by quadratic_scale and the
    latent a_k are uniform on [-1, 1]^r_true.

    Args:
        n: State dimension, >= r_true(r_true+3)/2
        r_true: Intrinsic dimension, >= 1
        samples: Number of snapshots, >= 2
        seed: Random seed; equal seeds give bit-identical data
        quadratic_scale: Scale of H; 0 gives a linear subspace

    Returns:
        n×samples SnapshotSet with zero reference

    Raises:
        NumericalError: If the quadratic part carries negligible energy
    """
    if r_true < 1:
        raise InputError(f"r_true must be >= 1, got {r_true}")
    if samples < 2:
        raise InputError(f"samples must be >= 2, got {samples}")
    p = quad_dim(r_true)
    if n < r_true + p:
        raise InputError(f"n must be >= r_true(r_true+3)/2 = {r_true + p}, got {n}")

    rng = np.random.default_rng(seed)
    frame, _ = np.linalg.qr(rng.standard_normal((n, r_true + p)))
    U, V = frame[:, :r_true], frame[:, r_true:]
    H = quadratic_scale * rng.standard_normal((p, p))
    latent = rng.uniform(-1.0, 1.0, size=(r_true, samples))

    data = U @ latent + V @ (H @ khatri_rao_square(latent))

    if quadratic_scale != 0:
        sigma = np.linalg.svd(data, compute_uv=False)
        tail = float(np.sum(sigma[r_true:] ** 2) / np.sum(sigma ** 2))
        if tail < MIN_TAIL_ENERGY:
            raise NumericalError(
                f"quadratic component carries only {tail:.2e} of the energy; "
                f"increase quadratic_scale or samples"
            )
    logger.debug(f"Generated polynomial manifold n={n}, r_true={r_true}, K={samples}, seed={seed}")
    return SnapshotSet(data=data, reference=np.zeros(n), centering_mode=CenteringMode.ZERO)


def generate(spec: SynthSpec) -> SnapshotSet:
    """Generate the data set described by a SynthSpec"""
    if spec.kind == SynthKind.PARABOLA:
        return gen_parabola(spec.samples, spec.t_range)
    return gen_poly_manifold(spec.n, spec.r_true, spec.samples, spec.seed, spec.quadratic_scale)


def canonical_signs(basis: CandidateBasis) -> CandidateBasis:
    """Flip candidate modes so that the first component of each is non-negative"""
    signs = np.where(basis.V_tilde[0, :] < 0, -1.0, 1.0)
    return CandidateBasis(
        V_tilde=basis.V_tilde * signs,
        sigma=np.array(basis.sigma),
        S_tilde=basis.S_tilde * signs[:, None],
        total_energy=basis.total_energy,
        reference=np.array(basis.reference),
        centering_mode=basis.centering_mode,
    )


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_sweep(S: SnapshotSet, angles: Iterable[float], gamma: float = 0.0) -> pd.DataFrame:
    """
    Training error of the (r, q) = (1, 1) manifold over rotated candidate frames

    For each angle the frame [Q_r Q_q] is the rotation by θ of the two
    candidate modes (signs fixed by canonical_signs), Ξ is re-solved and the
    relative training error recorded. θ = 0 is the POD-based manifold and the
    landscape has period π.

    Args:
        S: Two-dimensional snapshots
        angles: Rotation angles in radians
        gamma: Regularization

    Returns:
        Table with columns theta and relative_error
    """
    if S.n_dofs != 2:
        raise InputError(f"rotation sweep needs two-dimensional states, got N={S.n_dofs}")
    if S.n_snapshots < 2:
        raise InputError("rotation sweep needs at least two snapshots")
    basis = canonical_signs(candidate_basis(S, 2, method='direct'))
    if basis.total_energy <= 0:
        raise InputError("snapshot data has zero energy")

    angles = np.asarray(list(angles), dtype=float)
    errors = np.empty(len(angles))
    for i, theta in enumerate(angles):
        cost = reduced_cost(rotation_matrix(theta), 1, basis.S_tilde, gamma)
        errors[i] = np.sqrt(max(basis.total_energy + cost, 0.0) / basis.total_energy)

    if len(angles):
        best = int(np.argmin(errors))
        logger.info(f"Rotation sweep: minimum error {errors[best]:.6f} at θ = {angles[best]:.4f}")
    return pd.DataFrame({'theta': angles, 'relative_error': errors})
