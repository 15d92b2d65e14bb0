"""IMEX Runge-Kutta time stepping in the random-feature trial space.

Each implicit stage solves the linear collocation problem

    (I - dt a_ii L) U_i = u^n + dt sum_{j<i} a_ij L(U_j) + dt sum_j ahat_ij G(E_j)

in least squares, where the explicit stages are ``E_0 = u^n`` and
``E_j = U_j``. This is the standard pairing of an ``s``-stage DIRK with an
``s``-stage explicit method whose first stage is the old solution: the
explicit coefficients used by implicit stage ``i`` are row ``i + 1`` of the
explicit matrix (the weights ``b_hat`` for the last stage). The update

    u^{n+1} = u^n + dt sum_i b_i L(U_i) + dt sum_j bhat_j G(E_j)

is applied pointwise at the collocation points.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureBank, local_basis, sample_feature_bank, basis_matrix
from .geometry import Decomposition, collocation_grid, decompose, face_points, interface_points
from .lsq import TruncatedPinv, factorize
from .model import TrialFunction
from .problems import ProblemSpec, apply_linear, apply_nonlinear


class InstabilityError(RuntimeError):
    def __init__(self, step: int, stage: int | None, message: str = "non-finite stage solution"):
        where = f"step {step}" + ("" if stage is None else f", stage {stage}")
        super().__init__(f"{message} ({where})")
        self.step = step
        self.stage = stage


@dataclass(frozen=True)
class Tableau:
    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    order: int

    def __post_init__(self):
        s = self.stages
        if self.a.shape != (s, s) or self.a_hat.shape != (s, s):
            raise ValueError("tableau matrices must be s x s")
        if np.any(np.triu(self.a, 1)) or np.any(np.diag(self.a) == 0):
            raise ValueError("implicit matrix must be lower triangular with nonzero diagonal")
        if np.any(np.triu(self.a_hat)):
            raise ValueError("explicit matrix must be strictly lower triangular")

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.array_equal(self.a[-1], self.b))

    @property
    def uniform_diagonal(self) -> bool:
        d = np.diag(self.a)
        return bool(np.all(d == d[0]))

    def explicit_row(self, i: int) -> np.ndarray:
        """Weights on ``G(E_0..E_i)`` entering implicit stage ``i`` (0-based)."""
        if i + 1 < self.stages:
            return self.a_hat[i + 1, : i + 1]
        return self.b_hat[: i + 1]


def tableau_ars443() -> Tableau:
    """Four-stage, third-order ARS IMEX pair."""
    a = np.array(
        [
            [1 / 2, 0, 0, 0],
            [1 / 6, 1 / 2, 0, 0],
            [-1 / 2, 1 / 2, 1 / 2, 0],
            [3 / 2, -3 / 2, 1 / 2, 1 / 2],
        ]
    )
    a_hat = np.array(
        [
            [0, 0, 0, 0],
            [1 / 2, 0, 0, 0],
            [11 / 18, 1 / 18, 0, 0],
            [5 / 6, -5 / 6, 1 / 2, 0],
        ]
    )
    return Tableau(
        name="ars443",
        a=a,
        b=np.array([3 / 2, -3 / 2, 1 / 2, 1 / 2]),
        c=np.array([1 / 2, 2 / 3, 1 / 2, 1]),
        a_hat=a_hat,
        b_hat=np.array([1 / 4, 7 / 4, 3 / 4, -7 / 4]),
        c_hat=np.array([0, 1 / 2, 2 / 3, 1 / 2]),
        order=3,
    )


def tableau_imex1() -> Tableau:
    """Backward Euler for L paired with forward Euler for G."""
    return Tableau(
        name="imex1",
        a=np.array([[1.0]]),
        b=np.array([1.0]),
        c=np.array([1.0]),
        a_hat=np.array([[0.0]]),
        b_hat=np.array([1.0]),
        c_hat=np.array([0.0]),
        order=1,
    )


TABLEAUX = {"ars443": tableau_ars443, "imex1": tableau_imex1}


def get_tableau(name: str) -> Tableau:
    try:
        return TABLEAUX[name]()
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(TABLEAUX)}") from None


def order_conditions(tab: Tableau) -> dict[str, float]:
    """Residuals of the classical conditions through order 3 for both halves."""
    out = {}
    for tag, a, b, c in (("implicit", tab.a, tab.b, tab.c), ("explicit", tab.a_hat, tab.b_hat, tab.c_hat)):
        out[f"{tag}: sum(b) = 1"] = abs(b.sum() - 1.0)
        out[f"{tag}: row sums = c"] = float(np.max(np.abs(a.sum(axis=1) - c)))
        if tab.order >= 2:
            out[f"{tag}: b.c = 1/2"] = abs(b @ c - 0.5)
        if tab.order >= 3:
            out[f"{tag}: b.c^2 = 1/3"] = abs(b @ c**2 - 1.0 / 3.0)
            out[f"{tag}: b.A.c = 1/6"] = abs(b @ a @ c - 1.0 / 6.0)
    return out


def stability_function(tab: Tableau, z: complex) -> complex:
    """Amplification factor of the implicit half for ``u' = lambda u``, ``z = dt lambda``."""
    s = tab.stages
    ones = np.ones(s)
    stage = np.linalg.solve(np.eye(s) - z * tab.a, ones)
    return 1.0 + z * tab.b @ stage


@dataclass
class Discretization:
    """Collocation layout and the dt-independent pieces of every stage system."""

    problem: ProblemSpec
    bank: FeatureBank
    points: np.ndarray  # (P, d), subdomain-major
    owner: np.ndarray  # (P,)
    derivs: dict = field(repr=False)  # multi-index -> (P, N)
    linear: np.ndarray = field(repr=False)  # L applied to every basis column, (P, N)
    boundary: np.ndarray = field(repr=False)  # (n_b, N)
    boundary_rhs: np.ndarray = field(repr=False)
    continuity: np.ndarray = field(repr=False)  # (n_c, N)
    weights: dict = field(default_factory=dict)
    row_scaling: str = "none"

    @property
    def n_colloc(self) -> int:
        return self.points.shape[0]

    @property
    def n_rows(self) -> int:
        return self.n_colloc + self.boundary.shape[0] + self.continuity.shape[0]

    def row_weights(self, matrix: np.ndarray) -> np.ndarray | None:
        """Block weights times, with ``row_scaling='max'``, the inverse max-abs of each row."""
        w = [self.weights.get(k, 1.0) for k in ("pde", "boundary", "continuity")]
        sizes = (self.n_colloc, self.boundary.shape[0], self.continuity.shape[0])
        out = np.concatenate([np.full(n, v, dtype=float) for n, v in zip(sizes, w)])
        if self.row_scaling == "max":
            scale = np.max(np.abs(matrix), axis=1)
            out = out / np.where(scale > 0, scale, 1.0)
        elif self.row_scaling != "none":
            raise ValueError(f"unknown row scaling {self.row_scaling!r}")
        return None if np.all(out == 1.0) else out

    def stacks(self, coeffs: np.ndarray, derivs) -> dict:
        return {d: self.derivs[d] @ coeffs for d in derivs}


def _unit(dim: int, axis: int, n: int) -> tuple[int, ...]:
    return tuple(n if k == axis else 0 for k in range(dim))


def _boundary_rows(problem: ProblemSpec, bank: FeatureBank, per_face: int):
    dec = bank.decomposition
    rows, rhs = [], []
    for spec in problem.boundary.rows:
        ax = spec.axis
        last = dec.per_dim_counts[ax] - 1
        for sub in dec.subdomains:
            if sub.position[ax] != 0 and spec.kind == "periodic":
                continue
            if spec.kind == "dirichlet" and sub.position[ax] != (0 if spec.side < 0 else last):
                continue
            side = -1 if spec.kind == "periodic" else spec.side
            pts = face_points(sub, ax, side, per_face)
            row = np.zeros((pts.shape[0], bank.n_features))
            row[:, bank.columns(sub.index)] = local_basis(bank, sub.index, pts, spec.deriv)
            if spec.kind == "periodic":
                pos = list(sub.position)
                pos[ax] = last
                partner = dec.subdomains[dec.index_of(pos)]
                opp = pts.copy()
                opp[:, ax] = dec.domain.upper[ax]
                row[:, bank.columns(partner.index)] -= local_basis(bank, partner.index, opp, spec.deriv)
            rows.append(row)
            rhs.append(np.full(pts.shape[0], spec.value))
    if not rows:
        return np.zeros((0, bank.n_features)), np.zeros(0)
    return np.vstack(rows), np.concatenate(rhs)


def _continuity_rows(problem: ProblemSpec, bank: FeatureBank, per_face: int) -> np.ndarray:
    dec = bank.decomposition
    if dec.M < 2 or bank.pou == "psi_b":
        return np.zeros((0, bank.n_features))
    rows = []
    for ip in interface_points(dec, per_face):
        p = ip.location[None, :]
        for n in range(problem.continuity_order + 1):
            d = _unit(dec.dim, ip.axis, n)
            row = np.zeros(bank.n_features)
            row[bank.columns(ip.left_sub)] = local_basis(bank, ip.left_sub, p, d)[0]
            row[bank.columns(ip.right_sub)] -= local_basis(bank, ip.right_sub, p, d)[0]
            rows.append(row)
    return np.array(rows)


def build_discretization(
    problem: ProblemSpec,
    bank: FeatureBank,
    q: int,
    scheme: str = "uniform-closed",
    weights: dict | None = None,
    row_scaling: str = "none",
) -> Discretization:
    dec = bank.decomposition
    if max(problem.spatial_order, problem.boundary.max_order, problem.continuity_order) > bank.max_order():
        raise ValueError(f"problem {problem.name} needs derivatives beyond what {bank.pou} supports")
    pts, owner = [], []
    for sub in dec.subdomains:
        g = collocation_grid(sub, q, scheme)
        pts.append(g)
        owner.append(np.full(g.shape[0], sub.index))
    points, owner = np.vstack(pts), np.concatenate(owner)
    zero = (0,) * dec.dim
    needed = {zero, *problem.linear.derivs, *problem.nonlinear.required_derivs(dec.dim)}
    derivs = {}
    for d in sorted(needed):
        if bank.pou == "psi_a":
            mat = np.zeros((points.shape[0], bank.n_features))
            for sub in dec.subdomains:
                rows = owner == sub.index
                mat[rows, bank.columns(sub.index)] = local_basis(bank, sub.index, points[rows], d)
        else:
            mat = basis_matrix(bank, points, d)
        derivs[d] = mat
    boundary, boundary_rhs = _boundary_rows(problem, bank, q)
    return Discretization(
        problem=problem,
        bank=bank,
        points=points,
        owner=owner,
        derivs=derivs,
        linear=apply_linear(problem.linear, derivs),
        boundary=boundary,
        boundary_rhs=boundary_rhs,
        continuity=_continuity_rows(problem, bank, q),
        weights=dict(weights or {}),
        row_scaling=row_scaling,
    )


@dataclass(frozen=True)
class StageOperator:
    """Factorized ``[(I - dt a_ii L) at collocation; boundary; continuity]``."""

    pinv: TruncatedPinv
    dt_diag: float  # dt * a_ii
    n_colloc: int
    n_boundary: int
    n_continuity: int

    @property
    def effective_rank(self) -> int:
        return self.pinv.effective_rank

    def rhs(self, colloc_rhs: np.ndarray, boundary_rhs: np.ndarray) -> np.ndarray:
        return np.concatenate([colloc_rhs, boundary_rhs, np.zeros(self.n_continuity)])

    def solve(self, colloc_rhs: np.ndarray, boundary_rhs: np.ndarray) -> np.ndarray:
        return self.pinv.apply(self.rhs(colloc_rhs, boundary_rhs))


def stage_matrix(disc: Discretization, dt_diag: float) -> np.ndarray:
    return np.vstack([disc.derivs[(0,) * disc.bank.dim] - dt_diag * disc.linear, disc.boundary, disc.continuity])


def build_stage_operator(disc: Discretization, dt: float, a_ii: float, tau_s: float = 1e-16) -> StageOperator:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    h = dt * a_ii
    mat = stage_matrix(disc, h)
    pinv = factorize(mat, tau_s, disc.row_weights(mat))
    return StageOperator(pinv, h, disc.n_colloc, disc.boundary.shape[0], disc.continuity.shape[0])


@dataclass(frozen=True)
class State:
    n: int
    t: float
    values: np.ndarray = field(repr=False)  # u^n at the collocation points
    trial: TrialFunction | None = field(default=None, repr=False)  # trial-space representative of u^n


@dataclass(frozen=True)
class StageSolution:
    coeffs: np.ndarray = field(repr=False)
    l_values: np.ndarray = field(repr=False)
    g_values: np.ndarray = field(repr=False)


def evaluate_explicit_term(disc: Discretization, coeffs: np.ndarray) -> np.ndarray:
    """``G`` at the collocation points from a trial function's coefficients.

    Type-I terms are pointwise in ``u``; type-II terms use the chain rule on
    the analytic derivative stacks of the trial function.
    """
    nl = disc.problem.nonlinear
    if nl.is_zero:
        return np.zeros(disc.n_colloc)
    return apply_nonlinear(nl, disc.stacks(coeffs, nl.required_derivs(disc.bank.dim)))


def stage_rhs(values, l_values, g_values, tab: Tableau, i: int, dt: float) -> np.ndarray:
    """Collocation part of the stage-``i`` right-hand side (0-based ``i``).

    ``l_values`` holds ``L(U_j)`` for the ``i`` finished implicit stages,
    ``g_values`` holds ``G(E_j)`` for the explicit stages ``E_0 = u^n, ..., E_i``.
    """
    if len(l_values) != i or len(g_values) != i + 1:
        raise ValueError(f"stage {i} needs {i} implicit and {i + 1} explicit evaluations")
    rhs = np.array(values, dtype=float, copy=True)
    for j in range(i):
        rhs += dt * tab.a[i, j] * l_values[j]
    for j, w in enumerate(tab.explicit_row(i)):
        if w != 0:
            rhs += dt * w * g_values[j]
    return rhs


@dataclass
class Timer:
    seconds: Counter = field(default_factory=Counter)
    counts: Counter = field(default_factory=Counter)

    def add(self, phase: str, start: float) -> float:
        now = time.perf_counter()
        self.seconds[phase] += now - start
        self.counts[phase] += 1
        return now


# "pointwise": u^{n+1} from the weighted stage sums at the collocation points.
# "last_stage": u^{n+1} = U_s, which is the same update for a stiffly accurate
# pair but drops the least-squares residual instead of carrying it forward.
UPDATES = ("pointwise", "last_stage")


class Stepper:
    """Time integrator for one (problem, bank, dt) triple.

    The stage operator is factorized once and reused by every stage (all
    implicit diagonal entries agree) and every step. With ``reuse=False`` it is
    rebuilt for each stage instead, which must not change the result.
    """

    def __init__(self, disc: Discretization, tab: Tableau, dt: float, tau_s: float = 1e-16,
                 reuse: bool = True, timer: Timer | None = None, update: str = "pointwise"):
        if update not in UPDATES:
            raise ValueError(f"unknown update {update!r}; choose from {', '.join(UPDATES)}")
        if update == "last_stage" and not tab.stiffly_accurate:
            raise ValueError("the last_stage update needs a stiffly accurate tableau")
        self.update = update
        self.disc = disc
        self.tab = tab
        self.dt = float(dt)
        self.tau_s = tau_s
        self.reuse = reuse
        self.timer = timer or Timer()
        self._ops: dict[float, StageOperator] = {}
        self._projector: StageOperator | None = None

    def operator(self, a_ii: float) -> StageOperator:
        if self.reuse and a_ii in self._ops:
            return self._ops[a_ii]
        t0 = time.perf_counter()
        op = build_stage_operator(self.disc, self.dt, a_ii, self.tau_s)
        self.timer.add("factorization", t0)
        if self.reuse:
            self._ops[a_ii] = op
        return op

    @property
    def projector(self) -> StageOperator:
        """The ``dt = 0`` operator: least-squares fit of collocation values under the constraints."""
        if self._projector is None:
            t0 = time.perf_counter()
            self._projector = build_stage_operator(self.disc, 0.0, 0.0, self.tau_s)
            self.timer.add("projection_factorization", t0)
        return self._projector

    def project(self, values: np.ndarray) -> TrialFunction:
        projector = self.projector
        t0 = time.perf_counter()
        coeffs = projector.solve(values, self.disc.boundary_rhs)
        self.timer.add("projection", t0)
        return TrialFunction(self.disc.bank, coeffs)

    def initial_state(self, values: np.ndarray | None = None) -> State:
        """Fit ``u^0`` on the collocation grid; the state keeps the fitted values."""
        if values is None:
            values = self.disc.problem.initial(self.disc.points)
        if not np.all(np.isfinite(values)):
            raise ValueError("initial condition has non-finite values")
        trial = self.project(values)
        return State(0, 0.0, self.disc.derivs[(0,) * self.disc.bank.dim] @ trial.coeffs, trial)

    def explicit_term(self, coeffs: np.ndarray) -> np.ndarray:
        t0 = time.perf_counter()
        g = evaluate_explicit_term(self.disc, coeffs)
        self.timer.add("explicit_terms", t0)
        return g

    def advance(self, state: State) -> State:
        tab, dt, disc = self.tab, self.dt, self.disc
        if state.trial is None:
            state = State(state.n, state.t, state.values, self.project(state.values))
        g_vals = [self.explicit_term(state.trial.coeffs)]
        l_vals: list[np.ndarray] = []
        coeffs = None
        for i in range(tab.stages):
            t0 = time.perf_counter()
            rhs = stage_rhs(state.values, l_vals, g_vals, tab, i, dt)
            t0 = self.timer.add("assembly", t0)
            op = self.operator(tab.a[i, i])
            t0 = time.perf_counter()
            coeffs = op.solve(rhs, disc.boundary_rhs)
            t0 = self.timer.add("stage_solves", t0)
            if not np.all(np.isfinite(coeffs)):
                raise InstabilityError(state.n + 1, i + 1)
            l_vals.append(disc.linear @ coeffs)
            self.timer.add("linear_terms", t0)
            if i + 1 < tab.stages:
                g_vals.append(self.explicit_term(coeffs))
        t0 = time.perf_counter()
        if self.update == "last_stage":
            new = disc.derivs[(0,) * disc.bank.dim] @ coeffs
        else:
            new = state.values.copy()
            for i in range(tab.stages):
                new += dt * tab.b[i] * l_vals[i]
            for j in range(len(g_vals)):
                new += dt * tab.b_hat[j] * g_vals[j]
        self.timer.add("update", t0)
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > 1e8:
            raise InstabilityError(state.n + 1, None, "solution blew up")
        # stiffly accurate: u^{n+1} coincides with the last stage in the trial space
        trial = TrialFunction(disc.bank, coeffs) if tab.stiffly_accurate else None
        return State(state.n + 1, (state.n + 1) * dt, new, trial)

    def snapshot(self, state: State) -> TrialFunction:
        """Trial-space representative of ``state`` for dense output."""
        if self.update == "last_stage" and state.trial is not None:
            return state.trial
        return self.project(state.values)


@dataclass
class Trajectory:
    """Snapshots of one run plus everything needed to evaluate and report it."""

    stepper: Stepper
    dt: float
    steps: int
    states: list[State] = field(default_factory=list)
    snapshots: list[TrialFunction] = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]

    @property
    def bank(self) -> FeatureBank:
        return self.stepper.disc.bank

    @property
    def timer(self) -> Timer:
        return self.stepper.timer

    @property
    def final(self) -> TrialFunction:
        return self.snapshots[-1]

    def effective_rank(self) -> int:
        ops = list(self.stepper._ops.values())
        return ops[0].effective_rank if ops else self.stepper.projector.effective_rank


def snapshot_steps(times, dt: float, steps: int) -> list[int]:
    """Step indices for the requested times, rounded down to completed steps.

    The initial and final steps are always included.
    """
    out = {min(steps, int(np.floor(t / dt + 1e-9))) for t in times}
    out.update((0, steps))
    return sorted(out)


def run_simulation(problem: ProblemSpec, config, dt: float | None = None, bank: FeatureBank | None = None) -> Trajectory:
    """Decompose, sample, fit ``u^0`` and take ``K`` steps of size ``dt``.

    ``config`` is a :class:`imexrfm.config.RunConfig`. Snapshots are taken at
    ``config.snapshot_times`` (default: the initial and final times) and
    projected onto the trial space.
    """
    start = time.perf_counter()
    dt = float(config.dt if dt is None else dt)
    steps = config.steps_for(dt)
    timer = Timer()
    t0 = time.perf_counter()
    if bank is None:
        dec = decompose(problem.domain, config.counts)
        bank = sample_feature_bank(dec, config.j_n, config.r_m, config.activation, config.pou, config.seed)
    disc = build_discretization(problem, bank, config.q, config.collocation, config.weights, config.row_scaling)
    timer.add("setup", t0)
    stepper = Stepper(disc, get_tableau(config.scheme), dt, config.tau_s, config.reuse_operator, timer,
                      config.update)
    traj = Trajectory(stepper, dt, steps)
    wanted = set(snapshot_steps(config.snapshot_times, dt, steps))
    state = stepper.initial_state()
    for n in range(steps + 1):
        if n > 0:
            state = stepper.advance(state)
        if n in wanted:
            traj.states.append(state)
            traj.snapshots.append(stepper.snapshot(state))
    traj.wall_seconds = time.perf_counter() - start
    return traj
