"""Sine eigenbasis of the Dirichlet Laplacian on [0,1] and the transforms built on it.

The basis is e_k(x) = sqrt(2) sin(k pi x) with eigenvalues alpha_k = (k pi)^2,
k = 1..M.  A state is a complex coefficient vector a_k against this basis,
stored as a numpy complex128 array of shape (..., M); every routine here
broadcasts over leading axes so single fields and whole ensembles share one
code path.

Two transform routes are provided: a fast one through scipy's DST-I
(to_physical / to_spectral) and a dense O(M^2) direct summation
(to_physical_direct / to_spectral_direct) kept as the correctness oracle.
The physical grid is uniform with M interior nodes x_j = j/(M+1); the
Dirichlet endpoints carry implied zeros, which is what makes DST-I the
natural transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.fft import dst


class DimensionMismatchError(ValueError):
    """Field length does not match the grid / configured mode count."""


class Eigenpair(NamedTuple):
    k: int
    alpha_k: float


@dataclass(frozen=True)
class PhysicalGrid:
    """Uniform collocation grid of M interior points of (0,1)."""

    M: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"grid needs M >= 1, got {self.M}")
        object.__setattr__(
            self, "nodes", np.arange(1, self.M + 1) / (self.M + 1)
        )


def eigenvalues(M: int) -> np.ndarray:
    """alpha_k = (k pi)^2 for k = 1..M."""
    k = np.arange(1, M + 1, dtype=float)
    return (k * np.pi) ** 2


def eigenpairs(M: int) -> list[Eigenpair]:
    return [Eigenpair(k, (k * np.pi) ** 2) for k in range(1, M + 1)]


def validate_field(a: np.ndarray, M: int | None = None) -> np.ndarray:
    """Check the SpectralField invariants: right length, all entries finite."""
    a = np.asarray(a)
    if a.ndim < 1 or a.shape[-1] < 1:
        raise DimensionMismatchError("field must have at least one mode")
    if M is not None and a.shape[-1] != M:
        raise DimensionMismatchError(
            f"field has {a.shape[-1]} modes, expected {M}"
        )
    if not np.all(np.isfinite(a.view(float) if np.iscomplexobj(a) else a)):
        raise ValueError("field contains non-finite entries")
    return a


def basis_mode(M: int, k: int, amplitude: complex = 1.0) -> np.ndarray:
    """Coefficient vector of amplitude * e_k in an M-mode truncation."""
    if not 1 <= k <= M:
        raise DimensionMismatchError(f"mode {k} outside 1..{M}")
    a = np.zeros(M, dtype=np.complex128)
    a[k - 1] = amplitude
    return a


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def to_physical(a: np.ndarray, grid: PhysicalGrid | None = None) -> np.ndarray:
    """Evaluate u(x_j) = sum_k a_k sqrt(2) sin(k pi x_j) on the interior grid.

    With K grid points and M coefficients, K >= M is allowed (zero padding);
    K < M raises.  DST-I is an involution up to 2(K+1), which fixes the
    normalization below.
    """
    a = np.asarray(a, dtype=np.complex128)
    M = a.shape[-1]
    K = M if grid is None else grid.M
    if K < M:
        raise DimensionMismatchError(f"grid with {K} nodes cannot hold {M} modes")
    if K > M:
        a = pad_modes(a, K)
    return dst(a, type=1, axis=-1, workers=-1) / np.sqrt(2.0)


def to_spectral(values: np.ndarray, M: int | None = None) -> np.ndarray:
    """Sine analysis of interior samples; exact inverse of to_physical.

    a_k = (2/(K+1)) sum_j u(x_j) sin(k pi x_j) / sqrt(2).  Returns all K
    coefficients unless M is given, in which case the result is truncated
    to the first M modes.
    """
    values = np.asarray(values, dtype=np.complex128)
    K = values.shape[-1]
    a = dst(values, type=1, axis=-1, workers=-1) / (np.sqrt(2.0) * (K + 1))
    if M is not None:
        if M > K:
            raise DimensionMismatchError(f"{K} samples cannot resolve {M} modes")
        a = a[..., :M]
    return a


def to_physical_direct(a: np.ndarray, grid: PhysicalGrid | None = None) -> np.ndarray:
    """O(M^2) summation oracle for to_physical."""
    a = np.asarray(a, dtype=np.complex128)
    M = a.shape[-1]
    g = grid or PhysicalGrid(M)
    if g.M < M:
        raise DimensionMismatchError(f"grid with {g.M} nodes cannot hold {M} modes")
    k = np.arange(1, M + 1)
    S = np.sqrt(2.0) * np.sin(np.pi * np.outer(g.nodes, k))
    return a @ S.T


def to_spectral_direct(values: np.ndarray, M: int | None = None) -> np.ndarray:
    """O(M^2) summation oracle for to_spectral."""
    values = np.asarray(values, dtype=np.complex128)
    K = values.shape[-1]
    nodes = np.arange(1, K + 1) / (K + 1)
    k = np.arange(1, K + 1)
    S = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, nodes))
    a = (values @ S.T) / (K + 1)
    return a[..., :M] if M is not None else a


# ---------------------------------------------------------------------------
# projections and padding
# ---------------------------------------------------------------------------

def _check_cutoff(M: int, N: int):
    if not 1 <= N <= M:
        raise DimensionMismatchError(f"projection cutoff N={N} outside 1..{M}")


def project_low(a: np.ndarray, N: int) -> np.ndarray:
    """P_N: keep modes k <= N, zero the rest."""
    a = np.asarray(a)
    _check_cutoff(a.shape[-1], N)
    out = a.copy()
    out[..., N:] = 0.0
    return out


def project_high(a: np.ndarray, N: int) -> np.ndarray:
    """Q_N = I - P_N: keep modes k > N."""
    a = np.asarray(a)
    _check_cutoff(a.shape[-1], N)
    out = a.copy()
    out[..., :N] = 0.0
    return out


def pad_modes(a: np.ndarray, K: int) -> np.ndarray:
    """Extend the coefficient vector with zeros up to K modes."""
    a = np.asarray(a)
    M = a.shape[-1]
    if K < M:
        raise DimensionMismatchError(f"cannot pad {M} modes down to {K}")
    if K == M:
        return a
    out = np.zeros(a.shape[:-1] + (K,), dtype=a.dtype)
    out[..., :M] = a
    return out
