"""Energies, the energy-balance residual and exponential growth fits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BeamConfig, DiscreteOperators, Mesh, State, grad_norm_sq, pressure_at_nodes

NEUTRAL_BAND = 1e-2


@dataclass(frozen=True)
class EnergyRecord:
    """Energy bookkeeping for one sample.

    ``E`` is the linear energy ``(|u_xx|^2 + |u_t|^2) / 2`` and ``E_nl = E + Pi_B``.
    The Berger part of ``Pi_B`` is only present when the nonlinearity is on,
    so that ``E_nl`` is the energy actually balanced by the dynamics.
    """

    t: float
    E: float
    E_nl: float
    Pi_B: float
    u_mid: float
    identity_residual: float = math.nan


def potential(u: np.ndarray, cfg: BeamConfig, ops: DiscreteOperators, mesh: Mesh,
              p: np.ndarray | None = None) -> float:
    """``Pi_B = lambda [b0/4 |u_x|^4 - b/2 |u_x|^2] - (p, u)``."""
    if p is None:
        p = pressure_at_nodes(cfg, mesh)
    pi = 0.0 - ops.inner(p, u)
    if cfg.lambda_flag:
        s = grad_norm_sq(u, mesh)
        pi += 0.25 * cfg.b0 * s * s - 0.5 * cfg.b * s
    return pi


def bending_energy(u: np.ndarray, dx: float) -> float:
    """``(u, D4 u)_h`` written as a sum of squares.

    With second differences ``w_i`` at every node (ghost value ``u_{-1} = u_1``
    at the clamped ends) the quadratic form equals
    ``dx [sum_interior w_i^2 + (w_0^2 + w_N^2) / 2]``. No large terms cancel,
    so the rounding error is relative to the energy itself rather than to
    ``|u| / dx^4``.
    """
    p = np.concatenate((u[:1], [0.0], u, [0.0], u[-1:]))
    w = (p[:-2] - 2.0 * p[1:-1] + p[2:]) / dx**2
    return float(dx * (w[1:-1] @ w[1:-1] + 0.5 * (w[0] ** 2 + w[-1] ** 2)))


def linear_energy(u: np.ndarray, v: np.ndarray, ops: DiscreteOperators) -> float:
    """``((u, D4 u)_h + |v|_h^2) / 2``."""
    dx = float(ops.ip_weights[0])
    return 0.5 * (bending_energy(u, dx) + ops.inner(v, v))


def energies(state: State, cfg: BeamConfig, ops: DiscreteOperators, mesh: Mesh,
             p: np.ndarray | None = None) -> EnergyRecord:
    E = linear_energy(state.u, state.v, ops)
    pi = potential(state.u, cfg, ops, mesh, p)
    return EnergyRecord(
        t=state.t, E=E, E_nl=E + pi, Pi_B=pi, u_mid=float(state.u[mesh.mid_index])
    )


def energy_rates(u: np.ndarray, v: np.ndarray, cfg: BeamConfig, ops: DiscreteOperators) -> float:
    """Power drained by damping and flow: ``k |v|^2 + mu U (D1 u, v)``."""
    return cfg.k * ops.inner(v, v) + cfg.mu * cfg.U * ops.inner(ops.D1.matvec(u), v)


def energy_identity_residual(traj, cfg: BeamConfig | None = None) -> np.ndarray:
    """Centered-difference residual of ``dE_nl/dt = -k|u_t|^2 - mu U (u_x, u_t)``.

    Returns one value per interior sample ``j = 1 .. n-2``.
    """
    cfg = traj.cfg if cfg is None else cfg
    t, e = traj.t, traj.E_nl
    if t.size < 3:
        raise ValueError("energy identity residual needs at least 3 samples")
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    if cfg is traj.cfg and getattr(traj, "power", None) is not None and traj.power.size == t.size:
        power = traj.power[1:-1]
    else:
        ops = traj.ops
        power = np.array([energy_rates(traj.u[j], traj.v[j], cfg, ops) for j in range(1, t.size - 1)])
    return dedt + power


@dataclass(frozen=True)
class GrowthEstimate:
    sigma: float
    r2: float
    classification: str

    @property
    def growing(self) -> bool:
        return self.classification in ("growing", "diverged")


def classify(sigma: float, band: float = NEUTRAL_BAND) -> str:
    if sigma > band:
        return "growing"
    if sigma < -band:
        return "decaying"
    return "neutral"


def fit_log_slope(t: np.ndarray, e: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of ``log e`` against ``t`` and the fit's R^2."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.asarray(e, dtype=float))
    tc = t - t.mean()
    yc = y - y.mean()
    stt = float(tc @ tc)
    if stt == 0.0:
        return 0.0, math.nan
    slope = float(tc @ yc) / stt
    ss_tot = float(yc @ yc)
    ss_res = float(np.sum((yc - slope * tc) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def fit_growth_rate(traj, window: float = 0.5, band: float = NEUTRAL_BAND,
                    energy: str = "E", min_r2: float = 0.0) -> GrowthEstimate:
    """Fit ``E(t) ~ exp(sigma t)`` over the trailing ``window`` fraction of samples.

    Parameters
    ----------
    traj : Trajectory
    window : float
        Fraction of the samples, counted from the end, used in the fit.
    band : float
        Rates with ``|sigma| <= band`` are classified ``"neutral"``.
    energy : str
        Trajectory attribute to fit, ``"E"`` by default.
    min_r2 : float
        A positive rate only counts as ``"growing"`` when the straight-line fit
        of ``log E`` explains at least this fraction of its variance. Beating
        between two nearby modes produces large log-slopes with a poor fit;
        the default 0 disables the check.

    Returns
    -------
    GrowthEstimate
        Diverged trajectories keep the fitted rate but are classified ``"diverged"``.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError(f"window must be in (0, 1], got {window!r}")
    t = np.asarray(traj.t, dtype=float)
    e = np.asarray(getattr(traj, energy), dtype=float)
    start = min(int(math.floor((1.0 - window) * t.size)), max(t.size - 2, 0))
    t, e = t[start:], e[start:]
    if e.size < 2 or not np.any(e > 0):
        return GrowthEstimate(0.0, math.nan, "diverged" if traj.diverged else "neutral")
    floor = np.finfo(float).tiny
    sigma, r2 = fit_log_slope(t, np.maximum(e, floor))
    if traj.diverged:
        label = "diverged"
    else:
        label = classify(sigma, band)
        if label == "growing" and not r2 >= min_r2:
            label = "neutral"
    return GrowthEstimate(sigma, r2, label)
