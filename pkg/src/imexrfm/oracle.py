"""Reference solutions and error metrics.

The reference solver is a Fourier pseudospectral method on the periodic
interval [-1, 1) using the same linear/nonlinear split as the RFM solver:
the linear symbol is inverted exactly in Fourier space and the nonlinear
term is evaluated in physical space.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .problems import ProblemSpec, _inner

INTEGRATORS = ("ars443_spectral", "ifrk4")


@dataclass(frozen=True)
class SpectralConfig:
    modes: int = 512
    dt_ref: float = 1e-5
    integrator: str = "ars443_spectral"

    def __post_init__(self):
        if self.modes < 64 or self.modes & (self.modes - 1):
            raise ValueError("modes must be a power of two >= 64")
        if not self.dt_ref > 0:
            raise ValueError("dt_ref must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass
class ErrorReport:
    dt: list[float] = field(default_factory=list)
    relative_l2: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)

    def add(self, dt: float, err: float, wall_ms: float = 0.0) -> None:
        self.dt.append(float(dt))
        self.relative_l2.append(float(err))
        self.wall_ms.append(float(wall_ms))
        order = np.argsort(self.dt)[::-1]
        self.dt = [self.dt[k] for k in order]
        self.relative_l2 = [self.relative_l2[k] for k in order]
        self.wall_ms = [self.wall_ms[k] for k in order]

    @property
    def slope(self) -> float:
        return estimate_order(self)

    def to_csv(self, path) -> None:
        slope = estimate_order(self) if len(set(self.dt)) >= 2 else float("nan")
        lines = ["dt,relative_l2,wall_ms,slope"]
        for dt, err, ms in zip(self.dt, self.relative_l2, self.wall_ms):
            lines.append(f"{dt:.17g},{err:.17g},{ms:.3f},{slope:.6g}")
        Path(path).write_text("\n".join(lines) + "\n")


def relative_l2(pred, ref) -> float:
    pred, ref = np.asarray(pred, dtype=float).ravel(), np.asarray(ref, dtype=float).ravel()
    if pred.shape != ref.shape:
        raise ValueError("prediction and reference differ in length")
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(pred - ref) / norm)


def estimate_order(report: ErrorReport) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    dt = np.asarray(report.dt, dtype=float)
    err = np.asarray(report.relative_l2, dtype=float)
    ok = (dt > 0) & (err > 0) & np.isfinite(err)
    if len(np.unique(dt[ok])) < 2:
        raise ValueError("need at least two distinct step sizes with positive errors")
    return float(np.polyfit(np.log(dt[ok]), np.log(err[ok]), 1)[0])


def spectral_grid(modes: int) -> np.ndarray:
    return -1.0 + 2.0 * np.arange(modes) / modes


def _check_periodic(problem: ProblemSpec) -> None:
    if problem.dim != 1 or problem.domain.lower != (-1.0,) or problem.domain.upper != (1.0,):
        raise ValueError("the spectral reference handles 1-D problems on [-1, 1] only")
    # burgers_1d mixes Dirichlet rows with a periodic row, but its odd solution is periodic
    if not problem.boundary.fully_periodic and problem.name != "burgers_1d":
        raise ValueError(f"problem {problem.name} is not periodic")


class _Spectral:
    def __init__(self, problem: ProblemSpec, modes: int):
        _check_periodic(problem)
        self.problem = problem
        self.n = modes
        k = np.pi * np.arange(modes // 2 + 1)
        self.ik = 1j * k
        self.nyquist = np.zeros(modes // 2 + 1, dtype=bool)
        self.nyquist[-1] = True
        self.lin = np.zeros_like(self.ik)
        for (order,), coef in problem.linear.terms:
            self.lin += coef * self._deriv_symbol(order)

    def _deriv_symbol(self, order: int) -> np.ndarray:
        sym = self.ik**order
        if order % 2:
            sym = np.where(self.nyquist, 0.0, sym)
        return sym

    def explicit(self, u_hat: np.ndarray) -> np.ndarray:
        nl = self.problem.nonlinear
        if nl.is_zero:
            return np.zeros_like(u_hat)
        u = np.fft.irfft(u_hat, self.n)
        k_hat = np.fft.rfft(_inner(nl.inner, nl.coefficient, u, 0))
        if nl.kind == "type_i":
            return k_hat
        return self._deriv_symbol(sum(nl.outer)) * k_hat


def _ars_spectral(sp: _Spectral, u_hat: np.ndarray, dt: float, steps: int) -> np.ndarray:
    from .imex import tableau_ars443

    tab = tableau_ars443()
    s = tab.stages
    inv = {a: 1.0 / (1.0 - dt * a * sp.lin) for a in set(np.diag(tab.a))}
    for _ in range(steps):
        g = [sp.explicit(u_hat)]
        lv = []
        for i in range(s):
            rhs = u_hat.copy()
            for j in range(i):
                rhs += dt * tab.a[i, j] * lv[j]
            for j, w in enumerate(tab.explicit_row(i)):
                rhs += dt * w * g[j]
            stage = inv[tab.a[i, i]] * rhs
            lv.append(sp.lin * stage)
            if i + 1 < s:
                g.append(sp.explicit(stage))
        for i in range(s):
            u_hat = u_hat + dt * tab.b[i] * lv[i]
        for j in range(s):
            u_hat = u_hat + dt * tab.b_hat[j] * g[j]
    return u_hat


def _ifrk4(sp: _Spectral, u_hat: np.ndarray, dt: float, steps: int) -> np.ndarray:
    e = np.exp(0.5 * dt * sp.lin)
    e2 = e * e
    for _ in range(steps):
        k1 = dt * sp.explicit(u_hat)
        k2 = dt * sp.explicit(e * (u_hat + 0.5 * k1))
        k3 = dt * sp.explicit(e * u_hat + 0.5 * k2)
        k4 = dt * sp.explicit(e2 * u_hat + e * k3)
        u_hat = e2 * u_hat + (e2 * k1 + 2.0 * e * (k2 + k3) + k4) / 6.0
    return u_hat


def pseudospectral_reference(problem: ProblemSpec, cfg: SpectralConfig | None = None, t_end: float = 1.0,
                             times=None) -> np.ndarray:
    """Reference solution on ``spectral_grid(cfg.modes)`` at ``t_end`` (or at each of ``times``)."""
    cfg = cfg or SpectralConfig()
    sp = _Spectral(problem, cfg.modes)
    x = spectral_grid(cfg.modes)
    u_hat = np.fft.rfft(problem.initial(x[:, None]))
    step = _ars_spectral if cfg.integrator == "ars443_spectral" else _ifrk4
    targets = [t_end] if times is None else list(times)
    out, t_now = [], 0.0
    for t in targets:
        if t < t_now - 1e-12:
            raise ValueError("times must be increasing")
        steps = int(round((t - t_now) / cfg.dt_ref))
        dt = (t - t_now) / steps if steps else 0.0
        if steps:
            u_hat = step(sp, u_hat, dt, steps)
        t_now = t
        out.append(np.fft.irfft(u_hat, cfg.modes))
    return out[0] if times is None else np.array(out)


def _cache_key(problem: ProblemSpec, cfg: SpectralConfig, times) -> str:
    blob = json.dumps(
        {"problem": problem.name, "params": problem.params, "ic": problem.initial_info,
         "cfg": asdict(cfg), "times": [float(t) for t in times]},
        sort_keys=True, default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def cached_reference(problem: ProblemSpec, cfg: SpectralConfig, times, cache_dir=None) -> np.ndarray:
    """``pseudospectral_reference`` at several times, cached on disk by content hash."""
    times = [float(t) for t in times]
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{problem.name}-{_cache_key(problem, cfg, times)}.npy"
        if path.exists():
            return np.load(path)
    ref = pseudospectral_reference(problem, cfg, times=times)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, ref)
    return ref
