"""Explicit Euler(-Maruyama) stepping for the assembled fractional fields,
strong-convergence measurement, and the discrete action with its
directional derivative (stationarity checking).

Coefficients are always evaluated at the left endpoint of each step (Ito
convention); the momentum/velocity equation carries the noise, the
configuration equation never does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (EPSILON_GUARD_STEPS, FractionalParams, PhaseState,
                   SeedRecord, TimeGrid, Trajectory, make_grid)
from .dynamics import (HamiltonianSystem, LagrangianSystem, MetricSystem,
                       SdeFields, SystemSpec, invert_legendre,
                       system_lagrangian)
from .errors import (BoundaryViolation, GridMismatch, NotApplicable,
                     NumericalBlowup)
from .noise import (WienerPath, _uniforms, coarsen, generate_path,
                    spawn_substream)
from .specfun import gamma

BLOWUP_LIMIT = 1e12


def initial_state(sys: SystemSpec, q0, p0=None, v0=None) -> PhaseState:
    """Build a consistent (q, v, p) sample from q0 and either p0 or v0."""
    q = np.atleast_1d(np.asarray(q0, dtype=float))
    if isinstance(sys, HamiltonianSystem):
        if p0 is None:
            raise ValueError("Hamiltonian systems need p0")
        p = np.atleast_1d(np.asarray(p0, dtype=float))
        return PhaseState(q, sys.velocity(q, p), p)
    if isinstance(sys, LagrangianSystem):
        if v0 is not None:
            v = np.atleast_1d(np.asarray(v0, dtype=float))
        else:
            v = invert_legendre(sys, q, np.atleast_1d(np.asarray(p0, float)))
        return PhaseState(q, v, np.asarray(sys.grad_v(q, v), dtype=float))
    if isinstance(sys, MetricSystem):
        g = sys.metric_at(q)
        if v0 is not None:
            v = np.atleast_1d(np.asarray(v0, dtype=float))
        else:
            v = np.linalg.solve(g, np.atleast_1d(np.asarray(p0, float)))
        return PhaseState(q, v, g @ v)
    raise TypeError(f"unsupported system {type(sys)!r}")


def euler_step(fields: SdeFields, s: float, state: PhaseState, h: float,
               increments: np.ndarray,
               params: FractionalParams) -> PhaseState:
    """One explicit Euler step with left-endpoint coefficients."""
    g = np.asarray(increments, dtype=float)
    if fields.formulation == "Metric-velocity":
        q, v = state.q, state.v
        q_new = q + h * fields.drift_q(s, q, v)
        v_new = (v + h * fields.drift_p(s, q, v)
                 + fields.diffusion_p(s, q) @ g)
        p_new = fields.system.metric_at(q_new) @ v_new
        return PhaseState(q_new, v_new, p_new)

    y = state.p
    q, p = state.q, state.p
    if fields.formulation == "HP-Lagrangian":
        y = state.v
    q_new = q + h * fields.drift_q(s, q, y)
    p_new = p + h * fields.drift_p(s, q, y) + fields.diffusion_p(s, q) @ g
    if fields.formulation == "HP-Lagrangian":
        v_new = invert_legendre(fields.system, q_new, p_new)
    else:
        v_new = fields.system.velocity(q_new, p_new)
    return PhaseState(q_new, v_new, p_new)


@dataclass(frozen=True)
class EulerRun:
    """Everything needed for one trajectory; validated on construction."""

    fields: SdeFields
    grid: TimeGrid
    path: WienerPath
    initial: PhaseState
    params: FractionalParams

    def __post_init__(self):
        if (self.grid.n_steps != self.path.n_steps
                or not math.isclose(self.grid.h, self.path.h,
                                    rel_tol=1e-12, abs_tol=0.0)):
            raise GridMismatch("grid and Wiener path are not aligned")
        if self.path.channels != self.fields.channels:
            raise GridMismatch(
                f"path has {self.path.channels} channels, "
                f"fields expect {self.fields.channels}")
        if self.initial.dim != self.fields.dim:
            raise GridMismatch("initial state dimension mismatch")
        guard = EPSILON_GUARD_STEPS * self.grid.h
        if self.grid.t_end > self.params.t_eval - guard:
            from .errors import GridReachesSingularity
            raise GridReachesSingularity(
                f"grid end {self.grid.t_end} violates the singularity guard")


def integrate(run: EulerRun) -> Trajectory:
    """Iterate the Euler scheme over the grid; aborts on non-finite states."""
    states = [run.initial]
    state = run.initial
    h = run.grid.h
    for k in range(run.grid.n_steps):
        s = run.grid.point(k)
        state = euler_step(run.fields, s, state, h,
                           run.path.increments[k], run.params)
        if (not np.all(np.isfinite(state.q)) or not np.all(np.isfinite(state.p))
                or np.max(np.abs(state.q)) > BLOWUP_LIMIT
                or np.max(np.abs(state.p)) > BLOWUP_LIMIT):
            raise NumericalBlowup(k + 1)
        states.append(state)
    return Trajectory(run.grid, tuple(states),
                      SeedRecord(run.path.seed, run.path.channels))


def strong_convergence_order(fields: SdeFields, initial: PhaseState,
                             params: FractionalParams, base_h: float,
                             levels: int, n_paths: int, seed: int,
                             t_end: float, t_start: float = 0.0,
                             return_errors: bool = False):
    """Fit the strong order of the Euler scheme by grid coarsening.

    For each path the finest Wiener path (step base_h) is generated once
    and coarsened by powers of two; terminal-state errors at the coarse
    levels are measured against the finest run sharing the same Brownian
    path.  Returns the least-squares slope of log(mean error) vs log(h).
    """
    if levels < 3:
        raise ValueError("levels must be >= 3")
    n_fine = round((t_end - t_start) / base_h)
    top_factor = 2 ** (levels - 1)
    if n_fine % top_factor != 0 or n_fine < top_factor:
        raise ValueError(
            f"(t_end - t_start)/base_h = {n_fine} not divisible by "
            f"2^(levels-1) = {top_factor}")

    grids = [make_grid(t_start, base_h * 2 ** l, n_fine // 2 ** l, params)
             for l in range(levels)]
    errors = np.zeros(levels - 1)
    for i in range(n_paths):
        fine = generate_path(spawn_substream(seed, i), base_h, n_fine,
                             fields.channels)
        ref = integrate(EulerRun(fields, grids[0], fine, initial,
                                 params)).states[-1]
        for l in range(1, levels):
            coarse = coarsen(fine, 2 ** l)
            term = integrate(EulerRun(fields, grids[l], coarse, initial,
                                      params)).states[-1]
            errors[l - 1] += np.linalg.norm(
                np.concatenate([term.q - ref.q, term.p - ref.p]))
    errors /= n_paths
    if np.all(errors == 0.0):
        raise NotApplicable("all terminal errors are zero (degenerate fields)")
    hs = np.array([base_h * 2 ** l for l in range(1, levels)])
    slope = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    if return_errors:
        return slope, hs, errors
    return slope


# ---------------------------------------------------------------------------
# Discrete action and stationarity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionEvaluation:
    value: float
    trajectory: Trajectory
    params: FractionalParams

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("action value is not finite")


def _alpha_step_weights(t: float, s: np.ndarray, alpha: float) -> np.ndarray:
    return ((t - s[:-1]) ** alpha - (t - s[1:]) ** alpha) / alpha


def evaluate_action(trajectory: Trajectory, sys: SystemSpec,
                    params: FractionalParams,
                    path: WienerPath) -> ActionEvaluation:
    """Discretized Hamilton-Pontryagin fractional action of a trajectory.

    Deterministic part: left-endpoint integrand against the exact per-step
    integral of (t - s)^(alpha-1); qdot by forward differences.  Stochastic
    part: midpoint (Stratonovich) evaluation of gamma_a against the Wiener
    increments, kernel (t - s)^(beta-1) at the step midpoint.
    """
    grid = trajectory.grid
    if path.n_steps != grid.n_steps or not math.isclose(
            path.h, grid.h, rel_tol=1e-12, abs_tol=0.0):
        raise GridMismatch("trajectory and path are not aligned")
    t = params.t_eval
    s = grid.points
    h = grid.h
    w_alpha = _alpha_step_weights(t, s, params.alpha)

    qs = trajectory.component("q")
    vs = trajectory.component("v")
    ps = trajectory.component("p")
    qdot = (qs[1:] - qs[:-1]) / h

    det = 0.0
    for k in range(grid.n_steps):
        lag = system_lagrangian(sys, qs[k], vs[k])
        det += (lag + float(ps[k] @ (qdot[k] - vs[k]))) * w_alpha[k]
    det /= gamma(params.alpha)

    s_mid = s[:-1] + 0.5 * h
    kernel = (t - s_mid) ** (params.beta - 1.0)
    q_mid = 0.5 * (qs[:-1] + qs[1:])
    stoch = 0.0
    for a, gamma_a in enumerate(sys.noise.gamma):
        vals = np.array([gamma_a(q_mid[k]) for k in range(grid.n_steps)])
        stoch += float(np.dot(vals * kernel, path.increments[:, a]))
    stoch /= gamma(params.beta)

    return ActionEvaluation(det + stoch, trajectory, params)


def _shift_trajectory(trajectory: Trajectory, dq, dv, dp,
                      eps: float) -> Trajectory:
    qs = trajectory.component("q") + eps * dq
    vs = trajectory.component("v") + eps * dv
    ps = trajectory.component("p") + eps * dp
    states = tuple(PhaseState(qs[k], vs[k], ps[k])
                   for k in range(len(trajectory.states)))
    return Trajectory(trajectory.grid, states, trajectory.seed_record)


def action_derivative(trajectory: Trajectory, sys: SystemSpec,
                      params: FractionalParams, path: WienerPath,
                      perturbation, eps: float = 1e-5) -> float:
    """Central-difference directional derivative of the discrete action.

    perturbation is a (dq, dv, dp) triple of (N+1, n) arrays; dq must
    vanish at both endpoints.
    """
    dq, dv, dp = (np.asarray(a, dtype=float) for a in perturbation)
    if np.any(dq[0] != 0.0) or np.any(dq[-1] != 0.0):
        raise BoundaryViolation("dq must vanish at both endpoints")
    plus = evaluate_action(_shift_trajectory(trajectory, dq, dv, dp, eps),
                           sys, params, path).value
    minus = evaluate_action(_shift_trajectory(trajectory, dq, dv, dp, -eps),
                            sys, params, path).value
    return (plus - minus) / (2.0 * eps)


def random_admissible_perturbation(grid: TimeGrid, dim: int, seed: int):
    """Smooth random (dq, dv, dp) with dq vanishing at both endpoints.

    dq is a short sine series in the normalized time, so it is C^1 and
    admissible; the triple is normalized to unit sup norm.
    """
    n_modes = 3
    u = _uniforms(seed, 0, 3 * n_modes * dim).reshape(3, dim, n_modes)
    coeff = 2.0 * u - 1.0
    tau = (grid.points - grid.t_start) / (grid.t_end - grid.t_start)

    def series(c, basis):
        out = np.zeros((grid.n_steps + 1, dim))
        for j in range(n_modes):
            out += np.outer(basis((j + 1) * math.pi * tau), c[:, j])
        return out

    dq = series(coeff[0], np.sin)
    dq[0] = 0.0
    dq[-1] = 0.0  # sin(j*pi) is only zero up to rounding
    dv = series(coeff[1], np.cos)
    dp = series(coeff[2], np.cos)
    scale = max(np.max(np.abs(dq)), np.max(np.abs(dv)), np.max(np.abs(dp)))
    if scale == 0.0:
        raise NotApplicable("degenerate zero perturbation")
    return dq / scale, dv / scale, dp / scale


def stationarity_ratio(trajectory: Trajectory, sys: SystemSpec,
                       params: FractionalParams, path: WienerPath,
                       n_perturbations: int = 20, seed: int = 0) -> float:
    """Max |action derivative| over seeded unit-norm admissible perturbations."""
    if n_perturbations < 1:
        raise NotApplicable("need at least one perturbation")
    worst = 0.0
    for i in range(n_perturbations):
        pert = random_admissible_perturbation(
            trajectory.grid, trajectory.dim, spawn_substream(seed, i))
        worst = max(worst, abs(action_derivative(
            trajectory, sys, params, path, pert)))
    return worst
