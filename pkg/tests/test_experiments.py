import math
from types import SimpleNamespace

import numpy as np
import pytest

from bergerbeam.experiments import (
    PROBE_INTEGRATOR, BracketError, Continuation, SteadyStateError, buckling_loads, detect_limit_cycle, extrema,
    find_ucrit, run_sweep, solve_steady_state, steady_residual,
)
from bergerbeam.integrator import IntegratorConfig, run
from bergerbeam.model import BeamConfig, SemiDiscreteSystem, grad_norm_sq


def series(f, T=10.0, dt=1e-3):
    t = np.arange(0.0, T + 0.5 * dt, dt)
    return SimpleNamespace(t=t, u_mid=f(t))


class TestExtrema:
    def test_parabolic_refinement_is_exact_on_parabolas(self):
        t = np.array([0.0, 0.1, 0.2, 0.3])
        y = -(t - 0.13) ** 2 + 2.0
        (tm, ym), = extrema(t, y)[0]
        assert tm == pytest.approx(0.13, abs=1e-12) and ym == pytest.approx(2.0, abs=1e-12)

    def test_counts(self):
        tr = series(lambda t: np.sin(2 * np.pi * t), T=3.0)
        mx, mn = extrema(tr.t, tr.u_mid)
        assert len(mx) == 3 and len(mn) == 3


class TestLimitCycle:
    def test_sine(self):
        rep = detect_limit_cycle(series(lambda t: 0.3 * np.sin(2 * np.pi * t / 0.7)))
        assert rep.converged and rep.status == "converged"
        assert abs(rep.period - 0.7) < 1e-3
        assert rep.amplitude == pytest.approx(0.6, rel=1e-5)
        assert rep.peaks_per_period == 1 and rep.n_peaks >= 7

    def test_several_maxima_per_period(self):
        rep = detect_limit_cycle(series(lambda t: np.sin(2 * np.pi * t) + 0.6 * np.sin(6 * np.pi * t + 0.3)))
        assert rep.converged and rep.peaks_per_period == 3
        assert abs(rep.period - 1.0) < 1e-3

    def test_growing_oscillation_is_not_converged(self):
        rep = detect_limit_cycle(series(lambda t: np.exp(0.2 * t) * np.sin(2 * np.pi * t)))
        assert not rep.converged and rep.status == "not-converged"

    def test_quiet_signal_below_floor(self):
        rep = detect_limit_cycle(series(lambda t: 1e-8 * np.sin(2 * np.pi * t)))
        assert not rep.converged and rep.amplitude < 1e-6

    def test_too_few_extrema(self):
        rep = detect_limit_cycle(series(lambda t: np.sin(0.3 * t)))
        assert rep.status == "inconclusive" and not rep.converged

    def test_tail_window(self):
        rep = detect_limit_cycle(series(lambda t: np.sin(2 * np.pi * t)), tail_fraction=0.25)
        assert rep.tail_window == pytest.approx((7.5, 10.0))
        with pytest.raises(ValueError):
            detect_limit_cycle(series(np.sin), tail_fraction=0.0)

    def test_decayed_beam(self):
        traj = run(BeamConfig(k=20.0), 3.0, PROBE_INTEGRATOR, store_states=False)
        rep = detect_limit_cycle(traj)
        assert not rep.converged and rep.amplitude < 1e-6


class TestSteadyState:
    def test_trivial_without_compression(self):
        rep = solve_steady_state(BeamConfig(U=100.0, lambda_flag=1, b=0.0, b0=1.0), confirm=False)
        assert rep.converged and rep.amplitude == 0.0 and rep.residual_norm == 0.0

    def test_loaded_linear_beam(self):
        # uniform load: D4 u = p is linear, one Newton step
        cfg = BeamConfig(pressure=384.0)
        rep = solve_steady_state(cfg, confirm=False)
        assert rep.converged and rep.residual_norm <= 1e-10
        # continuous deflection p x^2 (1 - x)^2 / 24 peaks at 1 in the middle
        assert rep.amplitude == pytest.approx(1.0, rel=1e-3)

    def test_closed_form_branch_without_flow(self):
        # U = 0: u* = a phi1 with b - b0 |u*_x|^2 equal to the first buckling load
        cfg = BeamConfig(lambda_flag=1, b=100.0, b0=1.0)
        system = SemiDiscreteSystem(cfg)
        loads, modes = buckling_loads(system)
        phi = modes[:, 0]
        a = math.sqrt((100.0 - loads[0]) / grad_norm_sq(phi, system.mesh))
        exact = a * phi * np.sign(phi[system.mesh.mid_index])
        rep = solve_steady_state(cfg, continuation="b", confirm=False)
        assert rep.converged and rep.residual_norm <= 1e-10
        u = rep.u_star.astype(float)
        assert np.max(np.abs(u - exact)) <= 1e-9 * np.max(np.abs(exact))
        assert 100.0 - grad_norm_sq(u, system.mesh) == pytest.approx(loads[0], rel=1e-10)
        assert loads[0] == pytest.approx(4 * np.pi**2, rel=1e-3)

    def test_mirror_state_also_solves(self):
        cfg = BeamConfig(U=100.0, lambda_flag=1, b=50.0, b0=1.0)
        rep = solve_steady_state(cfg, continuation="b", confirm=False)
        system = SemiDiscreteSystem(cfg)
        assert rep.u_star[system.mesh.mid_index] > 0
        g = steady_residual(system, -rep.u_star)
        assert np.sqrt(system.mesh.dx * float(np.sum(g.astype(float) ** 2))) <= 1e-10

    def test_failed_ramp_is_reported(self):
        cfg = BeamConfig(U=100.0, lambda_flag=1, b=50.0, b0=1.0)
        with pytest.raises(SteadyStateError, match="fold"):
            solve_steady_state(cfg, continuation=Continuation(step=5.0, min_step=2.5), tol=1e-16,
                               max_iter=2, confirm=False)

    def test_bad_guess(self):
        with pytest.raises(ValueError, match="guess"):
            solve_steady_state(BeamConfig(), guess=np.zeros(3), confirm=False)

    def test_continuation_parameter(self):
        with pytest.raises(ValueError):
            Continuation(parameter="k")


class TestCriticalVelocity:
    def test_needs_linear_model(self):
        with pytest.raises(ValueError, match="lambda_flag"):
            find_ucrit(BeamConfig(lambda_flag=1), 500, 800)

    def test_bracket_invalid(self):
        with pytest.raises(BracketError, match="bracket invalid"):
            find_ucrit(BeamConfig(), 700.0, 800.0, horizon=1.0)


class TestSweep:
    def test_empty(self):
        assert len(run_sweep(BeamConfig(), "U", [])) == 0

    def test_rows_follow_input_and_keep_errors(self):
        table = run_sweep(BeamConfig(), "k", [1.0, -1.0, 0.0], horizon=0.01)
        assert table.column("axis_value").tolist() == [1.0, -1.0, 0.0]
        assert table.rows[1].status == "error" and "k" in table.rows[1].error
        assert table.rows[0].status == table.rows[2].status == "ok"

    def test_parallel_matches_serial(self):
        args = (BeamConfig(), "U", [300.0, 0.0, 100.0])
        serial = run_sweep(*args, horizon=0.01)
        parallel = run_sweep(*args, horizon=0.01, workers=2)
        assert np.array_equal(serial.column("final_E"), parallel.column("final_E"))

    def test_rejects_unknown_axis(self):
        with pytest.raises(ValueError, match="axis"):
            run_sweep(BeamConfig(), "ell", [1.0])

    def test_damping_speeds_decay(self):
        table = run_sweep(BeamConfig(U=600.0), "k", [0.0, 0.1, 1.0, 10.0], outputs=("growth",), horizon=2.0,
                          int_cfg=PROBE_INTEGRATOR)
        sigma = table.column("sigma")
        assert np.all(np.diff(sigma) <= 0), sigma

    def test_axial_load_rows_stay_bounded(self):
        cfg = BeamConfig(U=600.0, k=1.0, lambda_flag=1, b0=0.1)
        table = run_sweep(cfg, "b", [-50.0, 0.0, 50.0], outputs=("final_E", "u_mid"), horizon=1.0,
                          int_cfg=PROBE_INTEGRATOR)
        assert all(r.status == "ok" for r in table.rows)
        assert all(np.all(np.isfinite(r.u_mid)) for r in table.rows)
