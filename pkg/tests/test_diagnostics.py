import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergerbeam.diagnostics import (
    NEUTRAL_BAND, bending_energy, classify, energies, energy_identity_residual, energy_rates, fit_growth_rate,
    fit_log_slope, potential,
)
from bergerbeam.integrator import IntegratorConfig, run
from bergerbeam.model import BeamConfig, State, build_mesh, build_operators, grad_norm_sq, initial_state, sample

MESH = build_mesh(1.0, 100)
OPS = build_operators(MESH)


def synthetic(t, e, diverged=False):
    return SimpleNamespace(t=np.asarray(t), E=np.asarray(e), diverged=diverged)


class TestEnergies:
    def test_zero_state(self):
        rec = energies(State(0.0, np.zeros(99), np.zeros(99)), BeamConfig(lambda_flag=1, b=3.0), OPS, MESH)
        assert rec.E == 0.0 and rec.E_nl == 0.0 and rec.Pi_B == 0.0

    def test_preset_initial_energy(self):
        # E(0) = 1/2 int (10 x (1 - x))^2 dx = 5/3; the nodal sum of a quartic converges at O(dx^4)
        errs = []
        for n in (50, 100, 200):
            mesh = build_mesh(1.0, n)
            ops = build_operators(mesh)
            errs.append(abs(energies(initial_state(BeamConfig(), mesh), BeamConfig(), ops, mesh).E - 5 / 3))
        assert errs[1] < 1e-7
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)

    def test_pi_b_quartic_part(self, rng):
        u = rng.normal(size=99)
        s = grad_norm_sq(u, MESH)
        rec = energies(State(0.0, u, np.zeros(99)), BeamConfig(lambda_flag=1, b=0.0, b0=1.0), OPS, MESH)
        assert rec.Pi_B == pytest.approx(s * s / 4, rel=1e-14)

    def test_pi_b_full_formula(self, rng):
        u = rng.normal(size=99)
        cfg = BeamConfig(lambda_flag=1, b=7.0, b0=0.5, pressure=2.0)
        s = grad_norm_sq(u, MESH)
        expected = 0.5 / 4 * s * s - 7.0 / 2 * s - 2.0 * MESH.dx * u.sum()
        assert potential(u, cfg, OPS, MESH) == pytest.approx(expected, rel=1e-13)

    def test_linear_model_has_no_berger_potential(self, rng):
        u = rng.normal(size=99)
        assert potential(u, BeamConfig(b=7.0, b0=3.0), OPS, MESH) == 0.0

    @given(st.integers(0, 2**32 - 1))
    def test_e_nl_is_e_plus_pi(self, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.normal(size=(2, 99))
        rec = energies(State(0.0, u, v), BeamConfig(lambda_flag=1, b=30.0, b0=2.0, pressure=1.5), OPS, MESH)
        assert rec.E_nl == pytest.approx(rec.E + rec.Pi_B, rel=1e-15)
        assert rec.E >= 0.0

    @given(st.integers(0, 2**32 - 1))
    def test_bending_energy_is_u_d4u(self, seed):
        u = np.random.default_rng(seed).normal(size=99)
        assert bending_energy(u, MESH.dx) == pytest.approx(OPS.inner(u, OPS.D4.matvec(u)), rel=1e-12)

    def test_midpoint_value(self):
        u = sample(lambda x: x, MESH)
        assert energies(State(0.0, u, u), BeamConfig(), OPS, MESH).u_mid == pytest.approx(0.5)

    def test_flow_term_does_no_work_on_u_parallel_v(self, rng):
        # (D1 u, u)_h = 0, so with v = c u only the damping drains energy
        u = rng.normal(size=99)
        rate = energy_rates(u, 3.0 * u, BeamConfig(k=0.0, U=900.0), OPS)
        assert abs(rate) < 1e-9


class TestIdentityResidual:
    def test_needs_three_samples(self):
        traj = run(BeamConfig(), 1e-3, IntegratorConfig(sample_dt=1e-3))
        with pytest.raises(ValueError, match="3 samples"):
            energy_identity_residual(traj)

    def test_conservative_beam(self):
        traj = run(BeamConfig(), 1.0, store_states=False)
        assert np.max(np.abs(energy_identity_residual(traj))) <= 1e-6

    def test_recorded_power_matches_states(self):
        cfg = BeamConfig(k=1.0, U=300.0, lambda_flag=1)
        traj = run(cfg, 0.02)
        a = energy_identity_residual(traj)
        b = energy_identity_residual(traj, cfg.with_(k=1.0 + 0.0))  # forces the state-based path
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_damped_residual_converges(self):
        cfg = BeamConfig(k=1.0)
        r = [np.max(np.abs(energy_identity_residual(run(cfg, 0.05, IntegratorConfig(sample_dt=h, dt_max=h, dt_init=h),
                                                         store_states=False))))
             for h in (2e-5, 1e-5)]
        assert r[0] / r[1] >= 2.0


class TestGrowthFit:
    @pytest.mark.parametrize("sigma", [-2.0, 0.0, 3.0])
    def test_exact_on_exponentials(self, sigma):
        t = np.linspace(0.0, 2.0, 401)
        est = fit_growth_rate(synthetic(t, 4.0 * np.exp(sigma * t)))
        assert abs(est.sigma - sigma) <= 1e-10
        assert est.classification == classify(sigma)

    def test_window_uses_trailing_samples(self):
        t = np.linspace(0, 2, 201)
        e = np.where(t < 1.0, np.exp(-t), np.exp(-1.0) * np.exp(5.0 * (t - 1.0)))
        assert fit_growth_rate(synthetic(t, e), window=0.45).sigma == pytest.approx(5.0, rel=1e-10)

    def test_band(self):
        assert classify(0.5 * NEUTRAL_BAND) == "neutral"
        assert classify(2 * NEUTRAL_BAND) == "growing"
        assert classify(-2 * NEUTRAL_BAND) == "decaying"

    def test_zero_energy_is_neutral(self):
        est = fit_growth_rate(synthetic(np.linspace(0, 1, 11), np.zeros(11)))
        assert est.sigma == 0.0 and est.classification == "neutral"

    def test_diverged_label_keeps_slope(self):
        t = np.linspace(0, 1, 101)
        est = fit_growth_rate(synthetic(t, np.exp(40 * t), diverged=True))
        assert est.classification == "diverged" and est.sigma == pytest.approx(40.0)

    def test_fit_quality_gate(self):
        # beating: large log-slope, poor straight-line fit
        t = np.linspace(0, 2, 2001)
        e = np.exp(0.3 * t + 1.5 * np.sin(2 * np.pi * t / 0.6))
        loose = fit_growth_rate(synthetic(t, e))
        gated = fit_growth_rate(synthetic(t, e), min_r2=0.9)
        assert loose.classification == "growing" and loose.r2 < 0.5
        assert gated.classification == "neutral" and gated.sigma == loose.sigma

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            fit_growth_rate(synthetic([0, 1], [1, 1]), window=0.0)

    def test_log_slope_r2(self):
        slope, r2 = fit_log_slope(np.arange(5.0), np.exp(2 * np.arange(5.0)))
        assert slope == pytest.approx(2.0) and r2 == pytest.approx(1.0)

    def test_on_runs(self):
        conservative = fit_growth_rate(run(BeamConfig(), 1.0, store_states=False))
        damped = fit_growth_rate(run(BeamConfig(k=1.0), 1.0, store_states=False))
        assert abs(conservative.sigma) < 1e-2 and conservative.classification == "neutral"
        assert damped.sigma < 0 and damped.classification == "decaying"

    def test_supercritical_growth(self):
        from bergerbeam.experiments import PROBE_INTEGRATOR
        est = fit_growth_rate(run(BeamConfig(U=1.05 * 636), 2.0, PROBE_INTEGRATOR, store_states=False))
        assert est.sigma > 0 and est.growing
        assert math.isfinite(est.r2) and est.r2 > 0.99
