"""Dense symmetric eigenproblems by cyclic Jacobi rotation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 512


@dataclass(frozen=True)
class SymMatrix:
    """A real symmetric matrix; symmetry is checked exactly as stored."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("SymMatrix needs a non-empty square array")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite matrix")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def diagonal(cls, values) -> SymMatrix:
        return cls(np.diag(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        if self.basis is None:
            raise ValueError("spectrum was computed without a basis")
        q = self.basis
        return (q * self.eigenvalues) @ q.T


def jacobi_spectrum(S, tol: float = 1e-14, with_basis: bool = True) -> Spectrum:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi sweeps.

    Sweeps stop once the off-diagonal Frobenius mass is at most
    ``tol * ||S||_F``.  Eigenvalues come back ascending, with the rotation
    basis permuted to match.
    """
    from loclab import kernels

    if not isinstance(S, SymMatrix):
        a = np.asarray(S, dtype=float)
        if a.ndim == 2 and not np.all(np.isfinite(a)):
            raise ValueError("non-finite matrix")
        S = SymMatrix(a)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if S.dim > MAX_DIM:
        raise ValueError(f"dimension {S.dim} exceeds {MAX_DIM}")
    a = np.array(S.entries, dtype=float, order="C")
    v = np.eye(S.dim)
    kernels.jacobi_sweeps(a, v, float(tol))
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    return Spectrum(lam[order], v[:, order] if with_basis else None)
