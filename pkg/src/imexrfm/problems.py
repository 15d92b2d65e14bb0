"""Catalog of benchmark evolution problems ``u_t = L u + G(u)``.

``L`` is linear and treated implicitly; ``G`` is the nonlinear part treated
explicitly. ``G`` is either pointwise in ``u`` (type I) or an outer
derivative of a pointwise function, ``G(u) = d^k K(u)`` (type II).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Domain

# Default seed of the Cahn-Hilliard initial-condition realization.
CH_IC_SEED = 37


@dataclass(frozen=True)
class LinearOpSpec:
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a linear operator needs at least one term")
        if any(sum(d) > 4 for d, _ in self.terms):
            raise ValueError("derivative order above 4")

    @property
    def order(self) -> int:
        return max(sum(d) for d, c in self.terms if c != 0) if any(c != 0 for _, c in self.terms) else 0

    @property
    def derivs(self) -> list[tuple[int, ...]]:
        return sorted({d for d, _ in self.terms})


def apply_linear(spec: LinearOpSpec, stacks) -> np.ndarray:
    """``sum coefficient * stacks[deriv]``; works for value vectors and basis matrices alike."""
    out = None
    for deriv, coef in spec.terms:
        if deriv not in stacks:
            raise KeyError(f"missing derivative stack {deriv}")
        term = coef * stacks[deriv]
        out = term if out is None else out + term
    return out


def _inner(name: str, coef: float, u: np.ndarray, order: int) -> np.ndarray:
    """Pointwise inner function K and its first two derivatives."""
    if name == "zero":
        return np.zeros_like(u)
    if name == "allen_cahn_well":  # coef * (u - u^3)
        return coef * [u - u**3, 1.0 - 3.0 * u**2, -6.0 * u][order]
    if name == "ch_well":  # coef * (u^3 - u)
        return coef * [u**3 - u, 3.0 * u**2 - 1.0, 6.0 * u][order]
    if name == "burgers_flux":  # -u^2 / 2, so that d/dx K(u) = -u u_x
        return [-0.5 * u**2, -u, -np.ones_like(u)][order]
    raise ValueError(f"unknown nonlinearity {name!r}")


@dataclass(frozen=True)
class NonlinearSpec:
    kind: str  # "type_i" or "type_ii"
    inner: str = "zero"
    coefficient: float = 1.0
    outer: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("type_i", "type_ii"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "type_i" and self.outer is not None:
            raise ValueError("type-I terms carry no outer derivative")
        if self.kind == "type_ii":
            if self.outer is None:
                raise ValueError("type-II terms need an outer derivative")
            if sum(1 for a in self.outer if a) != 1 or sum(self.outer) > 2:
                raise ValueError("outer derivative must act along one axis with order 1 or 2")

    @property
    def is_zero(self) -> bool:
        return self.inner == "zero"

    def required_derivs(self, dim: int) -> list[tuple[int, ...]]:
        zero = (0,) * dim
        if self.kind == "type_i":
            return [zero]
        axis = next(k for k, a in enumerate(self.outer) if a)
        out = [zero]
        for n in range(1, sum(self.outer) + 1):
            out.append(tuple(n if k == axis else 0 for k in range(dim)))
        return out


def apply_nonlinear(spec: NonlinearSpec, stacks) -> np.ndarray:
    """Evaluate ``G`` from value/derivative stacks keyed by multi-index."""
    dim = len(next(iter(stacks)))
    need = spec.required_derivs(dim)
    for d in need:
        if d not in stacks:
            raise KeyError(f"missing derivative stack {d}")
    u = stacks[need[0]]
    if spec.kind == "type_i":
        return _inner(spec.inner, spec.coefficient, u, 0)
    ux = stacks[need[1]]
    if sum(spec.outer) == 1:
        return _inner(spec.inner, spec.coefficient, u, 1) * ux
    uxx = stacks[need[2]]
    return _inner(spec.inner, spec.coefficient, u, 2) * ux**2 + _inner(spec.inner, spec.coefficient, u, 1) * uxx


@dataclass(frozen=True)
class BoundaryRow:
    """``periodic``: d^deriv u(lower face) - d^deriv u(upper face) = value along ``axis``.
    ``dirichlet``: d^deriv u = value on the face ``side`` (-1 lower, +1 upper) of ``axis``."""

    kind: str
    deriv: tuple[int, ...]
    axis: int = 0
    side: int = -1
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown boundary row kind {self.kind!r}")


@dataclass(frozen=True)
class BoundarySpec:
    rows: tuple[BoundaryRow, ...]

    @property
    def fully_periodic(self) -> bool:
        return all(r.kind == "periodic" for r in self.rows)

    @property
    def max_order(self) -> int:
        return max((sum(r.deriv) for r in self.rows), default=0)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: Domain
    linear: LinearOpSpec
    nonlinear: NonlinearSpec
    boundary: BoundarySpec
    continuity_order: int
    initial: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict)
    initial_info: dict = field(default_factory=dict)
    exact: Callable[[np.ndarray, float], np.ndarray] | None = field(default=None, repr=False)
    d_u: int = 1

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def spatial_order(self) -> int:
        nl = sum(self.nonlinear.outer) if self.nonlinear.kind == "type_ii" else 0
        return max(self.linear.order, nl)

    def rhs(self, stacks) -> np.ndarray:
        """Full right-hand side ``N(u) = L u + G(u)``."""
        return apply_linear(self.linear, stacks) + apply_nonlinear(self.nonlinear, stacks)


def _periodic(dim: int, orders) -> BoundarySpec:
    rows = []
    for axis in range(dim):
        for n in orders:
            rows.append(BoundaryRow("periodic", tuple(n if k == axis else 0 for k in range(dim)), axis=axis))
    return BoundarySpec(tuple(rows))


_INTERVAL = Domain((-1.0,), (1.0,))


def _heat_1d(diffusivity: float = 1.0):
    def exact(x, t):
        return np.exp(-diffusivity * np.pi**2 * t) * np.sin(np.pi * x[:, 0])

    return ProblemSpec(
        name="heat_1d",
        domain=_INTERVAL,
        linear=LinearOpSpec((((2,), diffusivity),)),
        nonlinear=NonlinearSpec("type_i", "zero"),
        boundary=_periodic(1, (0, 1)),
        continuity_order=1,
        initial=lambda x: np.sin(np.pi * x[:, 0]),
        params={"diffusivity": diffusivity},
        initial_info={"formula": "sin(pi x)"},
        exact=exact,
    )


def _allen_cahn_1d(epsilon: float = 1e-2, reaction: float = 5.0):
    return ProblemSpec(
        name="allen_cahn_1d",
        domain=_INTERVAL,
        linear=LinearOpSpec((((2,), epsilon**2),)),
        nonlinear=NonlinearSpec("type_i", "allen_cahn_well", reaction),
        boundary=_periodic(1, (0, 1)),
        continuity_order=1,
        initial=lambda x: x[:, 0] ** 2 * np.cos(np.pi * x[:, 0]),
        params={"epsilon": epsilon, "reaction": reaction},
        initial_info={"formula": "x^2 cos(pi x)"},
    )


def _burgers_1d(nu: float = 1.0 / (10.0 * np.pi)):
    rows = (
        BoundaryRow("dirichlet", (0,), side=-1),
        BoundaryRow("dirichlet", (0,), side=+1),
        BoundaryRow("periodic", (1,)),
    )
    return ProblemSpec(
        name="burgers_1d",
        domain=_INTERVAL,
        linear=LinearOpSpec((((2,), nu),)),
        nonlinear=NonlinearSpec("type_ii", "burgers_flux", 1.0, outer=(1,)),
        boundary=BoundarySpec(rows),
        continuity_order=1,
        initial=lambda x: -np.sin(np.pi * x[:, 0]),
        params={"nu": nu},
        initial_info={"formula": "-sin(pi x)"},
    )


def _kdv_1d(alpha: float = 0.022):
    return ProblemSpec(
        name="kdv_1d",
        domain=_INTERVAL,
        linear=LinearOpSpec((((3,), -(alpha**2)),)),
        nonlinear=NonlinearSpec("type_ii", "burgers_flux", 1.0, outer=(1,)),
        boundary=_periodic(1, (0, 1, 2)),
        continuity_order=2,
        initial=lambda x: np.cos(np.pi * x[:, 0]),
        params={"alpha": alpha},
        initial_info={"formula": "cos(pi x)"},
    )


def cahn_hilliard_ic(seed: int = CH_IC_SEED) -> dict:
    """Draw the two-mode initial condition ``sum_i A_i sin(2 pi n_i x + phase_i)``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = rng.integers(1, 9, size=2)
    amp = rng.uniform(0.0, 1.0, size=2)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
    return {"seed": int(seed), "n": n.tolist(), "amplitude": amp.tolist(), "phase": phase.tolist()}


def _cahn_hilliard_1d(gamma1: float = 0.01, gamma2: float = 1e-6, ic_seed: int = CH_IC_SEED):
    info = cahn_hilliard_ic(ic_seed)
    n, amp, phase = (np.asarray(info[k]) for k in ("n", "amplitude", "phase"))

    def initial(x):
        arg = 2.0 * np.pi * np.outer(x[:, 0], n) + phase
        return np.sin(arg) @ amp

    return ProblemSpec(
        name="cahn_hilliard_1d",
        domain=_INTERVAL,
        linear=LinearOpSpec((((4,), -gamma2),)),
        nonlinear=NonlinearSpec("type_ii", "ch_well", gamma1, outer=(2,)),
        boundary=_periodic(1, (0, 1, 2, 3)),
        continuity_order=3,
        initial=initial,
        params={"gamma1": gamma1, "gamma2": gamma2, "ic_seed": ic_seed},
        initial_info={"formula": "sum_i A_i sin(2 pi n_i x + phase_i)", **info},
    )


def _allen_cahn_2d(epsilon: float = 1e-2, reaction: float = 1.0):
    eps2 = epsilon**2
    return ProblemSpec(
        name="allen_cahn_2d",
        domain=Domain((-1.0, -1.0), (1.0, 1.0)),
        linear=LinearOpSpec((((2, 0), eps2), ((0, 2), eps2))),
        nonlinear=NonlinearSpec("type_i", "allen_cahn_well", reaction),
        boundary=_periodic(2, (0, 1)),
        continuity_order=1,
        initial=lambda x: 0.05 * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
        params={"epsilon": epsilon, "reaction": reaction},
        initial_info={"formula": "0.05 sin(pi x) sin(pi y)"},
    )


_BUILDERS = {
    "heat_1d": _heat_1d,
    "allen_cahn_1d": _allen_cahn_1d,
    "burgers_1d": _burgers_1d,
    "kdv_1d": _kdv_1d,
    "cahn_hilliard_1d": _cahn_hilliard_1d,
    "allen_cahn_2d": _allen_cahn_2d,
}

PROBLEMS = tuple(_BUILDERS)

# Full-scale discretizations and time-step sets; DESK_SETTINGS in config.py are reduced versions.
# In 2-D, M and Q are per direction (Q = 5 x 5 points per subdomain) and J_n is per subdomain.
FULL_SETTINGS = {
    "allen_cahn_1d": {"r_m": 20.0, "m": 8, "j_n": 500, "q": 100, "t_end": 1.0,
                      "dt_set": [1e-1, 4e-2, 2e-2, 1e-2, 5e-3, 1e-3]},
    "burgers_1d": {"r_m": 20.0, "m": 2, "j_n": 400, "q": 100, "t_end": 1.0,
                   "dt_set": [1e-1, 5e-2, 4e-2, 2e-2, 1e-3]},
    "kdv_1d": {"r_m": 16.0, "m": 8, "j_n": 400, "q": 100, "t_end": 1.0,
               "dt_set": [7e-3, 3e-3, 2e-3, 1e-3, 8e-4]},
    "cahn_hilliard_1d": {"r_m": 14.0, "m": 10, "j_n": 500, "q": 100, "t_end": 1.0,
                         "dt_set": [6e-2, 2e-2, 1e-2, 8e-3, 5e-3, 1e-3]},
    "allen_cahn_2d": {"r_m": 1.0, "m": 2, "j_n": 200, "q": 5, "t_end": 1.0,
                      "dt_set": [6e-2, 3e-2, 2e-2, 1e-2, 1e-3]},
    "heat_1d": {"r_m": 2.0, "m": 4, "j_n": 100, "q": 50, "t_end": 0.5,
                "dt_set": [4e-2, 2e-2, 1e-2]},
}


def make_problem(name: str, **overrides) -> ProblemSpec:
    """Build a catalog problem; keyword overrides replace its physical parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}") from None
    return builder(**overrides)
