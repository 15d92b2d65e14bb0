"""Command-line front end.

Commands::

    imexrfm solve --config run.yaml [--problem NAME] [--dt V] [--seed N] [--out DIR]
    imexrfm converge --config run.yaml --dt-list 0.1,0.04,0.02 [--out DIR]
    imexrfm check-tableau [--scheme NAME]
    imexrfm fit-ic --problem NAME [--config run.yaml]

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure (instability or a failed factorization). Failures print a one-line
JSON diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, ConfigError, RunConfig, load_config
from .geometry import decompose
from .features import basis_matrix, sample_feature_bank
from .imex import InstabilityError, Trajectory, get_tableau, order_conditions, run_simulation
from .model import fit_function, save_coefficients
from .oracle import ErrorReport, SpectralConfig, cached_reference, relative_l2, spectral_grid
from .problems import ProblemSpec, make_problem

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass
class SolveResult:
    trajectory: Trajectory
    grid: np.ndarray
    predicted: np.ndarray  # (snapshots, points)
    reference: np.ndarray | None
    reference_kind: str | None
    manifest: dict = field(default_factory=dict)

    @property
    def errors(self) -> list[float]:
        if self.reference is None:
            return []
        return [relative_l2(p, r) for p, r in zip(self.predicted, self.reference)]


@dataclass
class ConvergenceResult:
    report: ErrorReport
    manifests: list[dict]


def build_problem(config: RunConfig) -> ProblemSpec:
    try:
        return make_problem(config.problem, **config.overrides)
    except TypeError as exc:
        raise ConfigError(f"bad problem override: {exc}") from None


def evaluation_grid(problem: ProblemSpec, config: RunConfig) -> np.ndarray:
    """Error grid: the oracle's mode grid in 1-D, a uniform periodic tensor grid otherwise."""
    if problem.dim == 1 and config.oracle:
        return spectral_grid(int(config.oracle["modes"]))[:, None]
    axes = []
    for lo, hi in zip(problem.domain.lower, problem.domain.upper):
        axes.append(lo + (hi - lo) * np.arange(config.eval_points) / config.eval_points)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def reference_kind(problem: ProblemSpec, config: RunConfig) -> str | None:
    if problem.exact is not None:
        return "exact"
    if problem.dim == 1 and config.oracle:
        return "spectral"
    if config.reference_dt is not None:
        return "self"
    return None


def compute_reference(problem: ProblemSpec, config: RunConfig, times, grid: np.ndarray, bank=None):
    """Reference values at ``times`` on ``grid``, or ``None`` when no reference applies."""
    kind = reference_kind(problem, config)
    if kind == "exact":
        return np.array([problem.exact(grid, t) for t in times])
    if kind == "spectral":
        cfg = SpectralConfig(**config.oracle)
        return cached_reference(problem, cfg, times, config.cache_dir)
    if kind == "self":
        ref_cfg = replace(config, snapshot_times=list(times), end_time="floor")
        traj = run_simulation(problem, ref_cfg, dt=config.reference_dt, bank=bank)
        by_time = {round(s.t, 9): f for s, f in zip(traj.states, traj.snapshots)}
        return np.array([basis_matrix(traj.bank, grid, (0,) * problem.dim) @ by_time[round(t, 9)].coeffs
                         for t in times])
    return None


def _grid_rows(times, grid, values):
    for t, vals in zip(times, values):
        for p, v in zip(grid, vals):
            yield [repr(float(t)), *(repr(float(c)) for c in p), repr(float(v))]


def write_grid_csv(path: Path, times, grid: np.ndarray, values: np.ndarray) -> None:
    """Long-format CSV with columns ``time, x[, y], value``."""
    coords = ["x", "y", "z"][: grid.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", *coords, "value"])
        w.writerows(_grid_rows(times, grid, values))


def build_manifest(config: RunConfig, problem: ProblemSpec, traj: Trajectory, errors, kind) -> dict:
    timer = traj.timer
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "problem": {"name": problem.name, "params": problem.params, "initial": problem.initial_info},
        "dt": traj.dt,
        "steps": traj.steps,
        "snapshot_times": traj.times,
        "n_features": traj.bank.n_features,
        "n_rows": traj.stepper.disc.n_rows,
        "effective_rank": traj.effective_rank(),
        "factorizations": {
            "stage_operator": timer.counts["factorization"],
            "projector": timer.counts["projection_factorization"],
        },
        "timings_seconds": dict(timer.seconds),
        "phase_counts": dict(timer.counts),
        "wall_seconds": traj.wall_seconds,
        "reference": kind,
        "relative_l2": errors,
    }


def run_solve(config: RunConfig, out_dir=None, write: bool = True) -> SolveResult:
    """Run one simulation and write predicted/reference/abs-error grids plus a manifest."""
    config.validate()
    if config.dt is None:
        raise ConfigError("solve needs a time step 'dt'")
    problem = build_problem(config)
    traj = run_simulation(problem, config)
    grid = evaluation_grid(problem, config)
    basis = basis_matrix(traj.bank, grid, (0,) * problem.dim)
    predicted = np.array([basis @ f.coeffs for f in traj.snapshots])
    kind = reference_kind(problem, config)
    ref = compute_reference(problem, config, traj.times, grid, bank=traj.bank)
    result = SolveResult(traj, grid, predicted, ref, kind)
    result.manifest = build_manifest(config, problem, traj, result.errors, kind)
    if write:
        t0 = time.perf_counter()
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_grid_csv(out / "predicted.csv", traj.times, grid, predicted)
        if ref is not None:
            write_grid_csv(out / "reference.csv", traj.times, grid, ref)
            write_grid_csv(out / "abs_error.csv", traj.times, grid, np.abs(predicted - ref))
        save_coefficients(out / "coefficients.csv", traj.final)
        traj.timer.add("io", t0)
        result.manifest["timings_seconds"] = dict(traj.timer.seconds)
        (out / "manifest.json").write_text(json.dumps(result.manifest, indent=2) + "\n")
    return result


def run_convergence(config: RunConfig, out_dir=None, write: bool = True) -> ConvergenceResult:
    """One solve per ``dt_list`` entry on a shared bank, scored against a shared reference at each final time."""
    config.validate()
    dts = sorted({float(v) for v in config.dt_list}, reverse=True)
    if len(dts) < 2:
        raise ConfigError("a convergence study needs at least two distinct dt values")
    problem = build_problem(config)
    dec = decompose(problem.domain, config.counts)
    bank = sample_feature_bank(dec, config.j_n, config.r_m, config.activation, config.pou, config.seed)
    grid = evaluation_grid(problem, config)
    basis = basis_matrix(bank, grid, (0,) * problem.dim)
    runs = []
    for dt in dts:
        run_cfg = replace(config, dt=dt, dt_list=[], snapshot_times=[])
        traj = run_simulation(problem, run_cfg, bank=bank)
        runs.append((run_cfg, traj, basis @ traj.final.coeffs))
    finals = sorted({traj.times[-1] for _, traj, _ in runs})
    kind = reference_kind(problem, config)
    ref = compute_reference(problem, config, finals, grid, bank=bank)
    if ref is None:
        raise ConfigError(f"no reference available for {problem.name}; set reference_dt")
    ref_at = dict(zip(finals, ref))
    report, manifests = ErrorReport(), []
    for run_cfg, traj, pred in runs:
        err = relative_l2(pred, ref_at[traj.times[-1]])
        report.add(traj.dt, err, 1e3 * traj.wall_seconds)
        manifests.append(build_manifest(run_cfg, problem, traj, [err], kind))
    if write:
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "convergence.csv")
        (out / "convergence_manifest.json").write_text(json.dumps(manifests, indent=2) + "\n")
    return ConvergenceResult(report, manifests)


def check_tableau(scheme: str = "ars443") -> dict[str, float]:
    return order_conditions(get_tableau(scheme))


def fit_initial_condition(config: RunConfig) -> float:
    """Relative residual of the least-squares fit of ``u^0`` on the collocation grid."""
    from .geometry import collocation_grid

    problem = build_problem(config)
    dec = decompose(problem.domain, config.counts)
    bank = sample_feature_bank(dec, config.j_n, config.r_m, config.activation, config.pou, config.seed)
    pts = np.vstack([collocation_grid(s, config.q, config.collocation) for s in dec.subdomains])
    _, rel = fit_function(bank, problem.initial, pts, config.tau_s)
    return rel


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imexrfm", description="IMEX random feature method solver")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one simulation")
    s.add_argument("--config", help="YAML config (a run manifest also works)")
    s.add_argument("--problem", help="problem name (used when no config is given, or to override it)")
    s.add_argument("--dt", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    c = sub.add_parser("converge", help="error-vs-dt study")
    c.add_argument("--config")
    c.add_argument("--problem")
    c.add_argument("--dt-list", required=True, help="comma-separated time steps")
    c.add_argument("--seed", type=int)
    c.add_argument("--out")

    t = sub.add_parser("check-tableau", help="print order-condition residuals")
    t.add_argument("--scheme", default="ars443")

    f = sub.add_parser("fit-ic", help="report the initial-condition fit residual")
    f.add_argument("--problem", required=True)
    f.add_argument("--config")
    f.add_argument("--seed", type=int)
    return p


def _resolve(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.problem and args.problem != cfg.problem:
            cfg = RunConfig.for_problem(args.problem, **{k: v for k, v in cfg.to_dict().items()
                                                         if k not in ("problem", "overrides")})
    elif args.problem:
        cfg = RunConfig.for_problem(args.problem)
    else:
        raise ConfigError("give --config or --problem")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "dt", None) is not None:
        cfg.dt = args.dt
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _fail(code: int, kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "check-tableau":
            res = check_tableau(args.scheme)
            for name, val in res.items():
                print(f"{name:28s} residual {val:.3e}")
            return EXIT_OK
        cfg = _resolve(args)
        if args.command == "solve":
            res = run_solve(cfg)
            m = res.manifest
            err = f" relative_l2={m['relative_l2'][-1]:.3e}" if m["relative_l2"] else ""
            print(f"{cfg.problem}: {m['steps']} steps, rank {m['effective_rank']}{err} -> {cfg.out_dir}")
        elif args.command == "converge":
            try:
                cfg.dt_list = [float(v) for v in args.dt_list.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"bad --dt-list {args.dt_list!r}") from None
            cfg.dt = None
            res = run_convergence(cfg)
            for dt, err, ms in zip(res.report.dt, res.report.relative_l2, res.report.wall_ms):
                print(f"dt={dt:.3e} relative_l2={err:.3e} wall_ms={ms:.0f}")
            print(f"slope {res.report.slope:.3f}")
        elif args.command == "fit-ic":
            print(f"{cfg.problem}: relative fit residual {fit_initial_condition(cfg):.3e}")
    except ConfigError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    except InstabilityError as exc:
        return _fail(EXIT_NUMERICAL, "instability", str(exc), step=exc.step, stage=exc.stage)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    except ValueError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
