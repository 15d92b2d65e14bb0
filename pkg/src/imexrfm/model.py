"""RFM trial functions: coefficient vectors over a feature bank."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureBank, as_deriv, basis_matrix
from .lsq import factorize


@dataclass(frozen=True)
class TrialFunction:
    """``u_N(x) = sum_i psi(x~^(i)) sum_j w_ij phi_j^(i)(x)``.

    ``coeffs`` has shape (M * J_n,) for a scalar solution or
    (M * J_n, d_u) for ``d_u`` components sharing one bank.
    """

    bank: FeatureBank
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape[0] != self.bank.n_features:
            raise ValueError(f"expected {self.bank.n_features} coefficients, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def components(self) -> int:
        return 1 if self.coeffs.ndim == 1 else self.coeffs.shape[1]

    def __call__(self, points, deriv=None):
        return evaluate(self, points, (0,) * self.bank.dim if deriv is None else deriv)

    def __add__(self, other: TrialFunction) -> TrialFunction:
        return TrialFunction(self.bank, self.coeffs + other.coeffs)

    def __mul__(self, alpha: float) -> TrialFunction:
        return TrialFunction(self.bank, alpha * self.coeffs)

    __rmul__ = __mul__


def evaluate(f: TrialFunction, points, deriv=None, subdomain: int | None = None) -> np.ndarray:
    deriv = as_deriv((0,) * f.bank.dim if deriv is None else deriv, f.bank.dim)
    return basis_matrix(f.bank, points, deriv, subdomain=subdomain) @ f.coeffs


def fit_function(bank: FeatureBank, target, fit_points, tau_s: float = 1e-16):
    """Least-squares projection of ``target`` onto the trial space at ``fit_points``.

    ``target`` is either a callable on an (n, d) point array or the sampled
    values. Returns ``(trial_function, relative_residual)``.
    """
    pts = np.asarray(fit_points, dtype=float).reshape(-1, bank.dim)
    values = target(pts) if callable(target) else np.asarray(target, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("target has non-finite values")
    a = basis_matrix(bank, pts, (0,) * bank.dim)
    coeffs = factorize(a, tau_s).apply(values)
    resid = a @ coeffs - values
    norm = np.linalg.norm(values)
    rel = float(np.linalg.norm(resid) / norm) if norm > 0 else float(np.linalg.norm(resid))
    return TrialFunction(bank, coeffs), rel


def save_coefficients(path, f: TrialFunction) -> None:
    """Write coefficients as CSV: one row per global column (subdomain, feature, values...)."""
    c = f.coeffs.reshape(f.bank.n_features, -1)
    sub = np.repeat(np.arange(f.bank.M), f.bank.j_n)
    feat = np.tile(np.arange(f.bank.j_n), f.bank.M)
    header = "subdomain,feature," + ",".join(f"coeff_{k}" for k in range(c.shape[1]))
    data = np.column_stack([sub, feat, c])
    fmt = ["%d", "%d"] + ["%.17g"] * c.shape[1]
    np.savetxt(Path(path), data, delimiter=",", header=header, comments="", fmt=fmt)


def load_coefficients(path, bank: FeatureBank) -> TrialFunction:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    coeffs = data[:, 2:]
    if coeffs.shape[1] == 1:
        coeffs = coeffs[:, 0]
    return TrialFunction(bank, coeffs)
