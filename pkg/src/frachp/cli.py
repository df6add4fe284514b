"""Command-line front end: simulate, convergence, action-check, volterra.

Every command resolves its configuration, writes its outputs into the run
directory together with a `run_manifest` that is sufficient to reproduce
the run byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_lines, parse_config
from .core import FractionalParams, TimeGrid, Trajectory, make_grid
from .dynamics import (assemble_hp_fields, pendulum_system,
                       polar_metric_system)
from .errors import FracHPError, NotApplicable, ParseError
from .fracint import VolterraCoefficients, volterra_paths
from .integrator import (EulerRun, initial_state, integrate,
                         stationarity_ratio, strong_convergence_order)
from .noise import generate_path, spawn_substream, zero_path
from .svgplot import write_orbit

STATIONARITY_GATE = 1e-3


def ensemble_map(fn, items):
    """Map over an ensemble, optionally threaded (FRACHP_THREADS, 0 = auto).

    Results are returned in input order, so parallelism never changes
    output.
    """
    workers = int(os.environ.get("FRACHP_THREADS", "1") or "0")
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_system(cfg: RunConfig):
    if cfg.system == "pendulum":
        return pendulum_system(gamma_coupling=cfg.gamma)
    if cfg.system == "metric:polar":
        return polar_metric_system(gamma_coupling=cfg.gamma)
    if cfg.system == "hamiltonian:custom":
        from .exprsys import hamiltonian_from_expression
        if not cfg.hamiltonian_expr:
            raise ParseError("hamiltonian:custom needs hamiltonian_expr")
        gammas = list(cfg.gamma_expr) or ["cos(q1)"]
        return hamiltonian_from_expression(cfg.hamiltonian_expr, gammas,
                                           cfg.dim)
    if cfg.system == "metric:custom":
        from .exprsys import metric_from_expressions
        if not cfg.metric_expr:
            raise ParseError("metric:custom needs metric_expr")
        rows = [[e.strip() for e in row.split(",")]
                for row in cfg.metric_expr.split(";")]
        gammas = list(cfg.gamma_expr) or ["cos(q1)"]
        return metric_from_expressions(rows, gammas, cfg.dim)
    raise ParseError(f"unknown system {cfg.system!r}")


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(cfg: RunConfig, outdir: Path, extra: dict | None = None):
    body = config_lines(cfg, {"code_version": __version__,
                              "resolved_seed": cfg.seed, **(extra or {})})
    (outdir / "run_manifest").write_text(body, encoding="utf-8")


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    n = traj.dim
    header = ",".join(
        ["step", "s"]
        + [f"q_{i + 1}" for i in range(n)]
        + [f"p_{i + 1}" for i in range(n)]
        + [f"v_{i + 1}" for i in range(n)])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for k, state in enumerate(traj.states):
            vals = [f"{x:.17g}" for x in
                    (*state.q, *state.p, *state.v)]
            fh.write(f"{k},{traj.grid.point(k):.17g}," + ",".join(vals) + "\n")


def _integrate_pair(cfg: RunConfig):
    """Noisy and zero-noise trajectories for the configured run."""
    params = FractionalParams(cfg.alpha, cfg.beta, cfg.t_eval)
    grid = make_grid(0.0, cfg.h, cfg.n_steps, params)
    system = build_system(cfg)
    fields = assemble_hp_fields(system, params,
                                eq15_literal=cfg.eq15_literal)
    init = initial_state(system, cfg.q0, p0=cfg.p0)
    m = system.noise.m
    noisy_path = generate_path(cfg.seed, cfg.h, cfg.n_steps, m)
    det_path = zero_path(cfg.h, cfg.n_steps, m)
    noisy = integrate(EulerRun(fields, grid, noisy_path, init, params))
    det = integrate(EulerRun(fields, grid, det_path, init, params))
    return params, system, fields, noisy, det, noisy_path


def cmd_simulate(cfg: RunConfig) -> int:
    params, system, fields, noisy, det, _ = _integrate_pair(cfg)
    outdir = _outdir(cfg)
    write_trajectory_csv(outdir / "trajectory.csv", noisy)
    write_trajectory_csv(outdir / "trajectory_deterministic.csv", det)
    if cfg.plot:
        steps = np.arange(cfg.n_steps + 1)
        for traj, suffix in ((det, ""), (noisy, "_noisy")):
            p = traj.component("p")[:, 0]
            q = traj.component("q")[:, 0]
            write_orbit(outdir / f"p_vs_n{suffix}.svg", steps, p,
                        f"orbit (n, p(nh)){suffix.replace('_', ' ')}")
            write_orbit(outdir / f"phase_qp{suffix}.svg", q, p,
                        f"orbit (q(nh), p(nh)){suffix.replace('_', ' ')}")
    _write_manifest(cfg, outdir)
    print(f"simulate: wrote {outdir}/trajectory.csv "
          f"({cfg.n_steps} steps, seed {cfg.seed})")
    return 0


def cmd_convergence(cfg: RunConfig) -> int:
    params = FractionalParams(cfg.alpha, cfg.beta, cfg.t_eval)
    system = build_system(cfg)
    fields = assemble_hp_fields(system, params,
                                eq15_literal=cfg.eq15_literal)
    init = initial_state(system, cfg.q0, p0=cfg.p0)
    slope, hs, errors = strong_convergence_order(
        fields, init, params, base_h=cfg.h, levels=cfg.levels,
        n_paths=cfg.n_paths, seed=cfg.seed, t_end=cfg.t_end,
        return_errors=True)
    outdir = _outdir(cfg)
    with open(outdir / "convergence.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("h,mean_error\n")
        for h, e in zip(hs, errors):
            fh.write(f"{h:.17g},{e:.17g}\n")
    _write_manifest(cfg, outdir, {"fitted_slope": f"{slope:.6g}"})
    print(f"convergence: fitted strong-order slope = {slope:.4f}")
    return 0


def cmd_action_check(cfg: RunConfig, _trajectory_override=None) -> int:
    params, system, fields, noisy, det, noisy_path = _integrate_pair(cfg)
    outdir = _outdir(cfg)
    deterministic = cfg.gamma == "const"
    m = system.noise.m

    if deterministic:
        traj = _trajectory_override or det
        ratio = stationarity_ratio(traj, system, params,
                                   zero_path(cfg.h, cfg.n_steps, m),
                                   n_perturbations=20, seed=cfg.seed)
        ok = ratio <= STATIONARITY_GATE
        verdict = "PASS" if ok else "FAIL"
        print(f"action-check: max |dA|/||w|| = {ratio:.3e} "
              f"(gate {STATIONARITY_GATE:g}) -> {verdict}")
        _write_manifest(cfg, outdir, {"stationarity_ratio": f"{ratio:.6g}",
                                      "verdict": verdict})
        return 0 if ok else 1

    # Noisy case: expectation statistics, reported but not gated.
    n_paths = min(cfg.n_paths, 100)

    def one(i: int) -> float:
        path = generate_path(spawn_substream(cfg.seed, i), cfg.h,
                             cfg.n_steps, m)
        grid = make_grid(0.0, cfg.h, cfg.n_steps, params)
        init = initial_state(system, cfg.q0, p0=cfg.p0)
        traj = _trajectory_override or integrate(
            EulerRun(fields, grid, path, init, params))
        return stationarity_ratio(traj, system, params, path,
                                  n_perturbations=5, seed=cfg.seed + i)

    ratios = np.array(ensemble_map(one, range(n_paths)))
    print(f"action-check (noisy, {n_paths} paths): "
          f"mean |dA|/||w|| = {ratios.mean():.3e}, "
          f"max = {ratios.max():.3e} (not gated)")
    _write_manifest(cfg, outdir, {"mean_ratio": f"{ratios.mean():.6g}",
                                  "max_ratio": f"{ratios.max():.6g}"})
    return 0


def cmd_volterra(cfg: RunConfig) -> int:
    grid = TimeGrid(0.0, cfg.h, cfg.n_steps)
    coeffs = VolterraCoefficients(mu=cfg.mu, sigma=cfg.sigma, x0=cfg.x0,
                                  rate=cfg.rate)
    inc = np.empty((cfg.n_paths, cfg.n_steps))
    for i in range(cfg.n_paths):
        inc[i] = generate_path(spawn_substream(cfg.seed, i), cfg.h,
                               cfg.n_steps, 1).increments[:, 0]
    x = volterra_paths(coeffs, cfg.beta, grid, inc)
    x_t = x[:, -1]
    mean = float(np.mean(x_t))
    var = float(np.var(x_t, ddof=1)) if cfg.n_paths > 1 else 0.0

    outdir = _outdir(cfg)
    with open(outdir / "summary.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("n_paths,mean_XT,var_XT\n")
        fh.write(f"{cfg.n_paths},{mean:.17g},{var:.17g}\n")
    if cfg.n_paths <= 32:
        for i in range(cfg.n_paths):
            with open(outdir / f"path_{i:04d}.csv", "w", encoding="utf-8",
                      newline="\n") as fh:
                fh.write("step,s,X\n")
                for k in range(cfg.n_steps + 1):
                    fh.write(f"{k},{grid.point(k):.17g},{x[i, k]:.17g}\n")

    t_end = grid.t_end
    print(f"volterra: {cfg.n_paths} paths, mean X(T) = {mean:.6g}, "
          f"var = {var:.6g}")
    if cfg.sigma == 0.0 and cfg.beta == 1.0:
        exact = cfg.x0 * math.exp(cfg.mu * t_end)
        print(f"  sigma = 0, beta = 1 closed form X0 exp(mu T) = {exact:.6g} "
              f"(rel err {abs(mean - exact) / exact:.3e})")
    if cfg.mu == 0.0 and cfg.n_paths > 1:
        se = math.sqrt(var / cfg.n_paths)
        print(f"  mu = 0 martingale check: |mean - X0| = "
              f"{abs(mean - cfg.x0):.3e}, standard error = {se:.3e}")
    _write_manifest(cfg, outdir, {"mean_XT": f"{mean:.17g}",
                                  "var_XT": f"{var:.17g}"})
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "action-check": cmd_action_check,
    "volterra": cmd_volterra,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frachp",
        description="Stochastic fractional Hamilton-Pontryagin simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="override the output directory")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out=args.out)
        return _COMMANDS[args.command](cfg)
    except (FracHPError, NotApplicable, OSError) as exc:
        print(f"frachp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
