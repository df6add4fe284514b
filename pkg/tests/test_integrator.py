import math

import numpy as np
import pytest

from frachp.core import (FractionalParams, PhaseState, TimeGrid, Trajectory,
                         make_grid)
from frachp.dynamics import (NoiseCoupling, SdeFields, assemble_hp_fields,
                             pendulum_lagrangian_system, pendulum_system)
from frachp.errors import (BoundaryViolation, GridMismatch, NotApplicable,
                           NumericalBlowup)
from frachp.integrator import (EulerRun, action_derivative, euler_step,
                               evaluate_action, initial_state, integrate,
                               random_admissible_perturbation,
                               stationarity_ratio, strong_convergence_order)
from frachp.noise import generate_path, zero_path

from ._reference import rk4_terminal

CLASSICAL = FractionalParams(1.0, 1.0, 10.0)
REFERENCE = FractionalParams(0.6, 0.3, 0.8)


def pendulum_run(params, h, n, path=None, gamma="cos", q0=1.0, p0=0.0):
    sys = pendulum_system(gamma_coupling=gamma)
    fields = assemble_hp_fields(sys, params)
    grid = make_grid(0.0, h, n, params)
    if path is None:
        path = zero_path(h, n, 1)
    init = initial_state(sys, [q0], p0=[p0])
    return sys, fields, EulerRun(fields, grid, path, init, params)


class TestEulerStep:
    def test_hand_evaluated_pendulum_step(self):
        # alpha = beta = 1, x = 1, y = 0, h = 0.1, G = 0.05:
        # x' = 1, y' = 0.1 sin(1) - sin(1) * 0.05 = 0.0420735...
        sys = pendulum_system()
        fields = assemble_hp_fields(sys, CLASSICAL)
        state = PhaseState([1.0], [0.0], [0.0])
        out = euler_step(fields, 0.0, state, 0.1, np.array([0.05]), CLASSICAL)
        assert out.q[0] == pytest.approx(1.0)
        assert out.p[0] == pytest.approx(0.1 * math.sin(1.0)
                                         - math.sin(1.0) * 0.05, rel=1e-12)
        assert out.p[0] == pytest.approx(0.0420735, rel=1e-5)

    def test_zero_fields_leave_state_unchanged(self):
        n = 1
        fields = SdeFields(
            drift_q=lambda s, q, y: np.zeros(n),
            drift_p=lambda s, q, y: np.zeros(n),
            diffusion_p=lambda s, q: np.zeros((n, 1)),
            formulation="Hamiltonian", dim=n, channels=1,
            system=pendulum_system(), params=CLASSICAL)
        state = PhaseState([1.0], [0.5], [0.5])
        out = euler_step(fields, 0.0, state, 0.1, np.array([0.3]), CLASSICAL)
        assert out.q[0] == 1.0 and out.p[0] == 0.5

    def test_zero_increment_is_deterministic_euler(self):
        sys = pendulum_system()
        fields = assemble_hp_fields(sys, CLASSICAL)
        state = PhaseState([1.0], [0.7], [0.7])
        out = euler_step(fields, 0.0, state, 0.01, np.array([0.0]), CLASSICAL)
        assert out.q[0] == pytest.approx(1.0 + 0.01 * 0.7)
        assert out.p[0] == pytest.approx(0.7 + 0.01 * math.sin(1.0))

    def test_lagrangian_route_matches_hamiltonian(self):
        lsys = pendulum_lagrangian_system()
        hsys = pendulum_system()
        fl = assemble_hp_fields(lsys, REFERENCE)
        fh = assemble_hp_fields(hsys, REFERENCE)
        state = PhaseState([1.0], [0.4], [0.4])
        g = np.array([0.02])
        a = euler_step(fl, 0.1, state, 1e-3, g, REFERENCE)
        b = euler_step(fh, 0.1, state, 1e-3, g, REFERENCE)
        assert np.allclose(a.q, b.q, rtol=1e-12)
        assert np.allclose(a.p, b.p, rtol=1e-12)
        assert np.allclose(a.v, b.v, atol=1e-10)


class TestIntegrate:
    def test_reference_parameter_run_is_finite(self):
        path = generate_path(1, 1e-4, 7000, 1)
        _, _, run = pendulum_run(REFERENCE, 1e-4, 7000, path)
        traj = integrate(run)
        assert len(traj.states) == 7001
        assert np.all(np.isfinite(traj.component("p")))

    def test_bitwise_determinism(self):
        path = generate_path(42, 1e-3, 500, 1)
        _, _, run1 = pendulum_run(REFERENCE, 1e-3, 500, path)
        _, _, run2 = pendulum_run(REFERENCE, 1e-3, 500, path)
        a, b = integrate(run1), integrate(run2)
        assert np.array_equal(a.component("p"), b.component("p"))
        assert np.array_equal(a.component("q"), b.component("q"))

    def test_momentum_constraint_along_trajectory(self):
        # p = dL/dv = v for the pendulum at every accepted sample
        path = generate_path(3, 1e-3, 500, 1)
        _, _, run = pendulum_run(REFERENCE, 1e-3, 500, path)
        traj = integrate(run)
        assert np.allclose(traj.component("p"), traj.component("v"),
                           atol=1e-10)

    def test_first_step_q_ignores_noise(self):
        pa = generate_path(1, 1e-3, 500, 1)
        pb = generate_path(2, 1e-3, 500, 1)
        _, _, ra = pendulum_run(REFERENCE, 1e-3, 500, pa)
        _, _, rb = pendulum_run(REFERENCE, 1e-3, 500, pb)
        ta, tb = integrate(ra), integrate(rb)
        assert ta.states[1].q[0] == tb.states[1].q[0]
        assert ta.states[1].p[0] != tb.states[1].p[0]

    def test_blowup_reports_step(self):
        n = 1
        fields = SdeFields(
            drift_q=lambda s, q, y: np.zeros(n),
            drift_p=lambda s, q, y: np.full(n, 1e15),
            diffusion_p=lambda s, q: np.zeros((n, 1)),
            formulation="Hamiltonian", dim=n, channels=1,
            system=pendulum_system(), params=CLASSICAL)
        grid = make_grid(0.0, 0.1, 5, CLASSICAL)
        run = EulerRun(fields, grid, zero_path(0.1, 5, 1),
                       PhaseState([0.0], [0.0], [0.0]), CLASSICAL)
        with pytest.raises(NumericalBlowup) as exc:
            integrate(run)
        assert exc.value.step == 1

    def test_mismatched_path_rejected(self):
        sys = pendulum_system()
        fields = assemble_hp_fields(sys, CLASSICAL)
        grid = make_grid(0.0, 1e-3, 100, CLASSICAL)
        with pytest.raises(GridMismatch):
            EulerRun(fields, grid, zero_path(1e-3, 99, 1),
                     initial_state(sys, [1.0], p0=[0.0]), CLASSICAL)


class TestStrongConvergence:
    def test_deterministic_euler_order_one(self):
        sys = pendulum_system(gamma_coupling="const")
        fields = assemble_hp_fields(sys, CLASSICAL)
        init = initial_state(sys, [1.0], p0=[0.0])
        slope = strong_convergence_order(fields, init, CLASSICAL,
                                         base_h=2e-4, levels=4, n_paths=1,
                                         seed=0, t_end=0.4)
        # Self-referencing against the finest Euler level inflates the
        # fitted slope above the ideal 1 (error ~ h - h_ref), so accept a
        # window around [1, log2(3)] rather than exactly 1.
        assert 0.85 <= slope <= 1.7

    def test_degenerate_fields_not_applicable(self):
        n = 1
        fields = SdeFields(
            drift_q=lambda s, q, y: np.zeros(n),
            drift_p=lambda s, q, y: np.zeros(n),
            diffusion_p=lambda s, q: np.zeros((n, 1)),
            formulation="Hamiltonian", dim=n, channels=1,
            system=pendulum_system(), params=CLASSICAL)
        with pytest.raises(NotApplicable):
            strong_convergence_order(fields,
                                     PhaseState([0.0], [0.0], [0.0]),
                                     CLASSICAL, base_h=1e-2, levels=3,
                                     n_paths=2, seed=0, t_end=0.32)

    def test_levels_validation(self):
        sys = pendulum_system()
        fields = assemble_hp_fields(sys, CLASSICAL)
        init = initial_state(sys, [1.0], p0=[0.0])
        with pytest.raises(ValueError):
            strong_convergence_order(fields, init, CLASSICAL, 1e-3, 2, 4, 0,
                                     t_end=0.4)


class TestReferenceAgreement:
    def test_euler_error_linear_in_h(self):
        sys = pendulum_system(gamma_coupling="const")
        fields = assemble_hp_fields(sys, CLASSICAL)
        init = initial_state(sys, [1.0], p0=[0.0])
        q_ref, p_ref = rk4_terminal(fields, [1.0], [0.0], 0.0, 0.5, 2000)
        errs = []
        for h, n in ((2e-3, 250), (1e-3, 500)):
            grid = make_grid(0.0, h, n, CLASSICAL)
            traj = integrate(EulerRun(fields, grid, zero_path(h, n, 1),
                                      init, CLASSICAL))
            term = traj.states[-1]
            errs.append(abs(term.q[0] - q_ref[0]) + abs(term.p[0] - p_ref[0]))
        assert errs[1] == pytest.approx(errs[0] / 2.0, rel=0.25)


class TestAction:
    def test_all_zero_action(self):
        import frachp.dynamics as dyn
        sys = dyn.LagrangianSystem(
            1, lambda q, v: 0.0, NoiseCoupling.constant([0.0], 1),
            grad_q=lambda q, v: np.zeros(1),
            grad_v=lambda q, v: np.zeros(1),
            v_hessian=lambda q, v: np.eye(1))
        grid = make_grid(0.0, 0.01, 50, CLASSICAL)
        zero = PhaseState([0.0], [0.0], [0.0])
        traj = Trajectory(grid, tuple([zero] * 51))
        path = generate_path(1, 0.01, 50, 1)
        assert evaluate_action(traj, sys, CLASSICAL, path).value == 0.0

    def test_constant_gamma_stochastic_term(self):
        # alpha = beta = 1, gamma == c: stochastic term is c W(T)
        c = 2.5
        import frachp.dynamics as dyn
        sys = dyn.LagrangianSystem(
            1, lambda q, v: 0.0, NoiseCoupling.constant([c], 1),
            grad_q=lambda q, v: np.zeros(1),
            grad_v=lambda q, v: np.zeros(1),
            v_hessian=lambda q, v: np.eye(1))
        grid = make_grid(0.0, 0.01, 50, CLASSICAL)
        zero = PhaseState([0.0], [0.0], [0.0])
        traj = Trajectory(grid, tuple([zero] * 51))
        path = generate_path(4, 0.01, 50, 1)
        val = evaluate_action(traj, sys, CLASSICAL, path).value
        assert val == pytest.approx(c * float(np.sum(path.increments)),
                                    rel=1e-12)

    def test_constraint_term_isolated(self):
        # L == 0, gamma == 0, v != qdot: action = int <p, qdot - v> ds
        import frachp.dynamics as dyn
        sys = dyn.LagrangianSystem(
            1, lambda q, v: 0.0, NoiseCoupling.constant([0.0], 1),
            grad_q=lambda q, v: np.zeros(1),
            grad_v=lambda q, v: np.zeros(1),
            v_hessian=lambda q, v: np.eye(1))
        grid = make_grid(0.0, 0.01, 50, CLASSICAL)
        # q constant (qdot = 0), v = 1, p = 1 -> integrand = -1
        st = PhaseState([0.0], [1.0], [1.0])
        traj = Trajectory(grid, tuple([st] * 51))
        path = zero_path(0.01, 50, 1)
        val = evaluate_action(traj, sys, CLASSICAL, path).value
        assert val == pytest.approx(-0.5, rel=1e-10)  # -(T = 0.5)

    def test_classical_action_harmonic_oscillator(self):
        # alpha = beta = 1, gamma = 0, v = qdot: Riemann-sum action of
        # L = v^2/2 - q^2/2 along q = sin(s) over [0, 1]
        import frachp.dynamics as dyn
        sys = dyn.LagrangianSystem(
            1, lambda q, v: 0.5 * float(v[0]) ** 2 - 0.5 * float(q[0]) ** 2,
            NoiseCoupling.constant([0.0], 1),
            grad_q=lambda q, v: np.array([-float(q[0])]),
            grad_v=lambda q, v: np.array([float(v[0])]),
            v_hessian=lambda q, v: np.eye(1))
        h, n = 1e-3, 1000
        grid = make_grid(0.0, h, n, CLASSICAL)
        states = []
        for k in range(n + 1):
            s = k * h
            q = math.sin(s)
            # v matches the discrete forward difference of q
            v = (math.sin(min(s + h, n * h)) - q) / h if k < n else math.cos(s)
            states.append(PhaseState([q], [v], [v]))
        traj = Trajectory(grid, tuple(states))
        val = evaluate_action(traj, sys, CLASSICAL, zero_path(h, n, 1)).value
        # exact: int_0^1 (cos^2 - sin^2)/2 ds = sin(2)/4
        assert val == pytest.approx(math.sin(2.0) / 4.0, abs=5e-3)

    def test_zero_perturbation_derivative(self):
        path = generate_path(2, 1e-3, 500, 1)
        sys, _, run = pendulum_run(REFERENCE, 1e-3, 500, path)
        traj = integrate(run)
        n1 = traj.grid.n_steps + 1
        zero = (np.zeros((n1, 1)), np.zeros((n1, 1)), np.zeros((n1, 1)))
        assert action_derivative(traj, sys, REFERENCE, path, zero) == 0.0

    def test_boundary_violation(self):
        path = generate_path(2, 1e-3, 500, 1)
        sys, _, run = pendulum_run(REFERENCE, 1e-3, 500, path)
        traj = integrate(run)
        n1 = traj.grid.n_steps + 1
        bad = (np.ones((n1, 1)), np.zeros((n1, 1)), np.zeros((n1, 1)))
        with pytest.raises(BoundaryViolation):
            action_derivative(traj, sys, REFERENCE, path, bad)


class TestStationarity:
    def test_solution_is_near_critical_and_tightens(self):
        ratios = {}
        for h, n in ((5e-4, 1400), (2.5e-4, 2800)):
            sys, _, run = pendulum_run(REFERENCE, h, n, gamma="const")
            traj = integrate(run)
            ratios[h] = stationarity_ratio(traj, sys, REFERENCE,
                                           zero_path(h, n, 1),
                                           n_perturbations=10, seed=7)
        assert ratios[5e-4] <= 5e-3
        assert ratios[2.5e-4] < ratios[5e-4]

    def test_frozen_trajectory_is_not_critical(self):
        h, n = 5e-4, 1400
        sys, _, run = pendulum_run(REFERENCE, h, n, gamma="const")
        grid = make_grid(0.0, h, n, REFERENCE)
        init = initial_state(sys, [1.0], p0=[0.0])
        frozen = Trajectory(grid, tuple([init] * (n + 1)))
        ratio = stationarity_ratio(frozen, sys, REFERENCE, zero_path(h, n, 1),
                                   n_perturbations=10, seed=7)
        assert ratio > 0.05

    def test_perturbations_are_admissible_and_unit_norm(self):
        grid = TimeGrid(0.0, 0.01, 100)
        dq, dv, dp = random_admissible_perturbation(grid, 2, seed=5)
        assert not dq[0].any() and not dq[-1].any()
        assert max(np.abs(dq).max(), np.abs(dv).max(),
                   np.abs(dp).max()) == pytest.approx(1.0)
