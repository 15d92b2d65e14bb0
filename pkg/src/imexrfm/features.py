"""Random features, partition-of-unity functions and basis-derivative matrices.

Global columns are ordered subdomain-major, feature-minor: column
``i * J_n + j`` is feature ``j`` of subdomain ``i``.

Feature parameters come from ``numpy.random.Generator(PCG64(seed))``: one
``uniform(-R_m, R_m, size=(M, J_n, d))`` draw for the directions followed by
one ``uniform(-R_m, R_m, size=(M, J_n))`` draw for the biases.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .geometry import Decomposition, Subdomain, _as_points, normalize

ACTIVATIONS = ("tanh", "sin", "cos")
POUS = ("psi_a", "psi_b")
MAX_ORDER = 4
# psi_b is only C^1; its piecewise second derivative is the last one we expose
PSI_B_MAX_ORDER = 2
SUPPORT_TOL = 1e-12


def as_deriv(deriv, dim: int) -> tuple[int, ...]:
    """Normalize a derivative spec (int for 1-D, or multi-index) to a tuple."""
    if np.isscalar(deriv):
        if dim != 1:
            raise ValueError("scalar derivative order is only meaningful in 1-D")
        deriv = (int(deriv),)
    deriv = tuple(int(a) for a in deriv)
    if len(deriv) != dim:
        raise ValueError(f"derivative multi-index {deriv} does not match dimension {dim}")
    if any(a < 0 for a in deriv):
        raise ValueError("negative derivative order")
    if sum(deriv) > MAX_ORDER:
        raise ValueError(f"total derivative order {sum(deriv)} exceeds {MAX_ORDER}")
    return deriv


def activation_derivatives(kind: str, z) -> np.ndarray:
    """Return ``sigma^(n)(z)`` for n = 0..4 stacked along the first axis."""
    z = np.asarray(z, dtype=float)
    if kind == "tanh":
        t = np.tanh(z)
        s = 1.0 - t * t
        return np.stack([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), 8.0 * t * s * (2.0 - 3.0 * t * t)])
    if kind == "sin":
        sn, cs = np.sin(z), np.cos(z)
        return np.stack([sn, cs, -sn, -cs, sn])
    if kind == "cos":
        sn, cs = np.sin(z), np.cos(z)
        return np.stack([cs, -sn, -cs, sn, cs])
    raise ValueError(f"unknown activation {kind!r}")


def pou_eval(kind: str, t, order: int = 0) -> np.ndarray:
    """One-dimensional PoU function on the reference interval and its derivatives.

    ``psi_a`` is the indicator of [-1, 1]; its derivatives vanish identically.
    ``psi_b`` equals 1 on [-3/4, 3/4] and blends to 0 over [3/4, 5/4] (and
    symmetrically) with ``(1 -+ sin(2 pi t)) / 2``, which makes it C^1 and a
    partition of unity across neighbouring cells. Breakpoints take the
    right-limit value for the second derivative.
    """
    if order < 0 or order > PSI_B_MAX_ORDER:
        raise ValueError(f"PoU derivative order {order} not supported")
    t = np.asarray(t, dtype=float)
    if kind == "psi_a":
        if order > 0:
            return np.zeros_like(t)
        # tolerance absorbs rounding of (x - c) / r at the cell faces
        return (np.abs(t) <= 1.0 + SUPPORT_TOL).astype(float)
    if kind != "psi_b":
        raise ValueError(f"unknown PoU {kind!r}")
    w = 2.0 * np.pi
    left = (t >= -1.25) & (t < -0.75)
    mid = (t >= -0.75) & (t < 0.75)
    right = (t >= 0.75) & (t < 1.25)
    # the closing breakpoint of the support still belongs to the blend
    right |= t == 1.25
    out = np.zeros_like(t)
    if order == 0:
        out[mid] = 1.0
        out[left] = 0.5 * (1.0 + np.sin(w * t[left]))
        out[right] = 0.5 * (1.0 - np.sin(w * t[right]))
    elif order == 1:
        out[left] = 0.5 * w * np.cos(w * t[left])
        out[right] = -0.5 * w * np.cos(w * t[right])
    else:
        out[left] = -0.5 * w * w * np.sin(w * t[left])
        out[right] = 0.5 * w * w * np.sin(w * t[right])
    return out


@dataclass(frozen=True)
class FeatureBank:
    decomposition: Decomposition
    directions: np.ndarray = field(repr=False)  # (M, J_n, d)
    biases: np.ndarray = field(repr=False)  # (M, J_n)
    activation: str
    pou: str
    r_m: float
    seed: int

    @property
    def j_n(self) -> int:
        return self.directions.shape[1]

    @property
    def M(self) -> int:
        return self.decomposition.M

    @property
    def n_features(self) -> int:
        return self.M * self.j_n

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    def columns(self, sub_index: int) -> slice:
        return slice(sub_index * self.j_n, (sub_index + 1) * self.j_n)

    def max_order(self) -> int:
        return PSI_B_MAX_ORDER if self.pou == "psi_b" else MAX_ORDER


def sample_feature_bank(
    dec: Decomposition,
    j_n: int,
    r_m: float,
    activation: str = "tanh",
    pou: str = "psi_a",
    seed: int = 0,
) -> FeatureBank:
    if j_n < 1:
        raise ValueError("j_n must be positive")
    if not r_m > 0:
        raise ValueError("r_m must be positive")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if pou not in POUS:
        raise ValueError(f"unknown PoU {pou!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    directions = rng.uniform(-r_m, r_m, size=(dec.M, j_n, dec.dim))
    biases = rng.uniform(-r_m, r_m, size=(dec.M, j_n))
    directions.setflags(write=False)
    biases.setflags(write=False)
    return FeatureBank(dec, directions, biases, activation, pou, float(r_m), int(seed))


def _pou_factor(bank: FeatureBank, sub: Subdomain, ref: np.ndarray, beta) -> np.ndarray:
    """Tensor-product PoU derivative d^beta psi(x~) in physical coordinates."""
    dec = bank.decomposition
    out = np.ones(ref.shape[0])
    for k, b in enumerate(beta):
        t = ref[:, k]
        if bank.pou == "psi_b":
            # no neighbour to blend with at the domain boundary
            if sub.position[k] == 0:
                t = np.maximum(t, -0.75)
            if sub.position[k] == dec.per_dim_counts[k] - 1:
                t = np.minimum(t, 0.75)
            if b > 0:
                clamped = (ref[:, k] < -0.75) & (sub.position[k] == 0)
                clamped |= (ref[:, k] > 0.75) & (sub.position[k] == dec.per_dim_counts[k] - 1)
                vals = pou_eval("psi_b", t, b)
                vals[clamped] = 0.0
                out = out * vals / sub.half_width[k] ** b
                continue
        out = out * pou_eval(bank.pou, t, b) / sub.half_width[k] ** b
    return out


def local_basis(bank: FeatureBank, sub_index: int, points, deriv) -> np.ndarray:
    """Derivative ``deriv`` of subdomain ``sub_index``'s J_n PoU-weighted features.

    Points outside the (closed) PoU support get zero rows.
    """
    dec = bank.decomposition
    deriv = as_deriv(deriv, dec.dim)
    if sum(deriv) > bank.max_order():
        raise ValueError(f"derivative {deriv} exceeds the smoothness of {bank.pou}")
    sub = dec.subdomains[sub_index]
    ref = normalize(sub, points)
    k = bank.directions[sub_index]  # (J, d)
    z = ref @ k.T + bank.biases[sub_index]
    sig = activation_derivatives(bank.activation, z)
    # (k_m / r_m): chain-rule factor of d/dx_m applied to the feature
    scale = k / sub.half_width
    out = np.zeros_like(z)
    for beta in itertools.product(*(range(a + 1) for a in deriv)):
        if bank.pou == "psi_a" and any(beta):
            continue  # the indicator is flat on its support
        rest = tuple(a - b for a, b in zip(deriv, beta))
        weight = 1.0
        for a, b in zip(deriv, beta):
            weight *= comb(a, b)
        psi = _pou_factor(bank, sub, ref, beta)
        if not np.any(psi):
            continue
        feat = sig[sum(rest)] * np.prod(scale ** np.asarray(rest), axis=1)
        out += weight * psi[:, None] * feat
    return out


def basis_matrix(bank: FeatureBank, points, deriv, subdomain: int | None = None) -> np.ndarray:
    """Matrix of ``d^deriv [psi(x~^(i)) phi_j^(i)](x)``, rows = points, cols = M * J_n.

    With ``subdomain`` given, only that subdomain's columns are filled and the
    points are treated as belonging to it (closed support). Otherwise points
    are assigned globally: for ``psi_a`` each point belongs to exactly one
    subdomain (half-open cells), for ``psi_b`` every subdomain whose blended
    support covers the point contributes.
    """
    dec = bank.decomposition
    pts = _as_points(points, dec.dim)
    out = np.zeros((pts.shape[0], bank.n_features))
    if subdomain is not None:
        out[:, bank.columns(subdomain)] = local_basis(bank, subdomain, pts, deriv)
        return out
    if bank.pou == "psi_a":
        owner = dec.locate(pts)
        for i in np.unique(owner):
            rows = owner == i
            out[np.ix_(rows, np.arange(i * bank.j_n, (i + 1) * bank.j_n))] = local_basis(bank, i, pts[rows], deriv)
        return out
    for sub in dec.subdomains:
        ref = normalize(sub, pts)
        rows = np.all(np.abs(ref) <= 1.25, axis=1)
        if np.any(rows):
            out[np.ix_(rows, np.arange(sub.index * bank.j_n, (sub.index + 1) * bank.j_n))] = local_basis(
                bank, sub.index, pts[rows], deriv
            )
    return out
