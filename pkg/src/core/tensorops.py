"""
Compressed quadratic feature maps.

The unique entries of x ⊗ x are stored in lexicographic upper-triangular order
(1,1), (1,2), ..., (1,r), (2,2), ..., (r,r). Cross terms are plain products
x_i x_j without any sqrt(2) or 2 factor; the coefficient matrix Xi absorbs the
scaling, so stored Xi values depend on this convention.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from src.utils.errors import InputError


def quad_dim(r: int) -> int:
    """Number of unique quadratic products of r variables"""
    return r * (r + 1) // 2


@lru_cache(maxsize=64)
def _triu(r: int) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(r)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True)
class QuadIndexMap:
    """Ordered index pairs (i, j), i <= j, of the compressed Kronecker square (0-based)"""

    r: int

    def __post_init__(self):
        if self.r < 0:
            raise InputError(f"reduced dimension must be >= 0, got {self.r}")

    @property
    def rows(self) -> np.ndarray:
        return _triu(self.r)[0]

    @property
    def cols(self) -> np.ndarray:
        return _triu(self.r)[1]

    @property
    def pairs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(zip(self.rows.tolist(), self.cols.tolist()))

    def __len__(self) -> int:
        return quad_dim(self.r)


def compressed_square(x: np.ndarray) -> np.ndarray:
    """
    Unique entries of x ⊗ x

    Args:
        x: Vector of length r

    Returns:
        Vector of length r(r+1)/2 with entry (i, j) equal to x_i * x_j
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a vector, got shape {x.shape}")
    rows, cols = _triu(x.shape[0])
    return x[rows] * x[cols]


def khatri_rao_square(X: np.ndarray) -> np.ndarray:
    """
    Columnwise compressed Kronecker square (the feature matrix W)

    Args:
        X: Matrix r×K of reduced coordinates

    Returns:
        Matrix r(r+1)/2 × K whose column k is compressed_square(X[:, k])
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"expected a matrix, got shape {X.shape}")
    rows, cols = _triu(X.shape[0])
    return X[rows, :] * X[cols, :]


def khatri_rao_square_pullback(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """
    Pull a gradient with respect to W = khatri_rao_square(X) back to X

    Args:
        X: Matrix r×K
        G: Matrix r(r+1)/2 × K, derivative of a scalar with respect to W

    Returns:
        Matrix r×K, derivative of the same scalar with respect to X
    """
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    rows, cols = _triu(X.shape[0])
    if G.shape != (rows.shape[0], X.shape[1]):
        raise InputError(f"gradient shape {G.shape} does not match features of {X.shape}")
    out = np.zeros_like(X)
    # W[k] = X[i] * X[j]; diagonal pairs contribute twice through the two sums
    np.add.at(out, rows, G * X[cols, :])
    np.add.at(out, cols, G * X[rows, :])
    return out


def expand_to_full(w: np.ndarray) -> np.ndarray:
    """
    Scatter compressed entries back to the full r² Kronecker layout

    Args:
        w: Vector of length r(r+1)/2, or matrix with that many rows

    Returns:
        Vector of length r² (or matrix r²×K) where positions (i, j) and (j, i)
        both receive w(i, j)
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    r = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if quad_dim(r) != n:
        raise InputError(f"length {n} is not a triangular number r(r+1)/2")
    rows, cols = _triu(r)
    full = np.zeros((r * r,) + w.shape[1:])
    full[rows * r + cols] = w
    full[cols * r + rows] = w
    return full
