"""Weighted linear least squares through a truncated-SVD pseudoinverse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LsqSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    row_weights: np.ndarray | None = None

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.rhs.shape[0] != n:
            raise ValueError("rhs length does not match the matrix rows")
        if self.row_weights is not None:
            w = np.asarray(self.row_weights)
            if w.shape != (n,):
                raise ValueError("row_weights length does not match the matrix rows")
            if np.any(w <= 0):
                raise ValueError("row weights must be positive")


@dataclass(frozen=True)
class TruncatedPinv:
    """Thin SVD ``W A = U S V^T`` restricted to ``s_i >= tau_s * s_max``.

    ``apply`` returns the minimum-norm minimizer of ``||W (A w - f)||``.
    """

    u: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    vt: np.ndarray = field(repr=False)
    tau_s: float
    n_rows: int
    row_weights: np.ndarray | None = field(default=None, repr=False)
    singular_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def effective_rank(self) -> int:
        return int(self.s.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.vt.shape[1]

    def apply(self, rhs) -> np.ndarray:
        return apply(self, rhs)


def factorize(matrix, tau_s: float = 1e-16, row_weights=None) -> TruncatedPinv:
    """Factorize ``diag(row_weights) @ matrix``; ``tau_s`` is relative to the largest singular value."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix must be a non-empty 2-D array")
    if not 0.0 <= tau_s < 1.0:
        raise ValueError("tau_s must lie in [0, 1)")
    if not np.all(np.isfinite(a)):
        raise np.linalg.LinAlgError("matrix has non-finite entries")
    w = None
    if row_weights is not None:
        w = np.asarray(row_weights, dtype=float)
        if w.shape != (a.shape[0],) or np.any(w <= 0):
            raise ValueError("row_weights must be positive, one per row")
        a = w[:, None] * a
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    s_max = s[0] if s.size else 0.0
    keep = (s > 0) & (s >= tau_s * s_max)
    return TruncatedPinv(
        u=u[:, keep], s=s[keep], vt=vt[keep], tau_s=float(tau_s), n_rows=a.shape[0], row_weights=w, singular_values=s
    )


def apply(pinv: TruncatedPinv, rhs) -> np.ndarray:
    """Minimum-norm truncated least-squares solution; ``rhs`` may hold several columns."""
    f = np.asarray(rhs, dtype=float)
    if f.shape[0] != pinv.n_rows:
        raise ValueError(f"rhs has {f.shape[0]} rows, expected {pinv.n_rows}")
    if pinv.row_weights is not None:
        f = pinv.row_weights.reshape((-1,) + (1,) * (f.ndim - 1)) * f
    coef = pinv.u.T @ f
    coef = coef / (pinv.s[:, None] if coef.ndim > 1 else pinv.s)
    return pinv.vt.T @ coef


def solve(system: LsqSystem, tau_s: float = 1e-16) -> np.ndarray:
    return apply(factorize(system.matrix, tau_s, system.row_weights), system.rhs)
