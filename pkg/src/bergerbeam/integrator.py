"""Implicit adaptive time stepping for the semi-discrete beam.

Two one-step schemes share the same implicit stage solver:

``average-acceleration``
    The trapezoidal rule on ``(u, v)`` (Newmark with beta = 1/4, gamma = 1/2).
    Conserves the discrete energy of the undamped linear beam exactly.
``bdf2``
    TR-BDF2: a trapezoidal stage to ``t + gamma dt`` followed by a BDF2 stage,
    with ``gamma = 2 - sqrt(2)``. L-stable, so unresolved stiff modes are damped
    instead of carried along.

Every implicit stage has the form ``u1 = r_u + d v1``, ``v1 = r_v + d a(u1, v1)``
and is reduced to a nonlinear system in ``u1`` whose Jacobian is banded plus a
symmetric rank-one term from the Berger force. Step size is controlled by step
doubling with a PI controller; each sample interval is split into equal steps
so that every output sample is an actual step endpoint.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .banded import BandedLU, SingularMatrixError, combine
from .diagnostics import EnergyRecord, energies, energy_rates
from .model import BeamConfig, BlowUpError, SemiDiscreteSystem, State

log = logging.getLogger(__name__)

SCHEMES = ("average-acceleration", "bdf2")
ERROR_NORMS = ("displacement", "state")
GAMMA = 2.0 - math.sqrt(2.0)

Forcing = Optional[Callable[[float], np.ndarray]]


class NewtonFailure(RuntimeError):
    """The implicit stage did not converge; the caller should shrink ``dt``."""


class StepSizeError(RuntimeError):
    """Step size fell below ``dt_min``."""

    def __init__(self, t: float, dt: float, state: State | None = None):
        super().__init__(f"step size {dt:.3e} below dt_min at t={t!r}")
        self.t, self.dt, self.state = t, dt, state


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-integration settings.

    ``error_norm="displacement"`` measures the local error on ``u`` only, the
    usual choice for second-order structural dynamics; ``"state"`` includes
    the velocities.
    """

    scheme: str = "average-acceleration"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: float = 1e-3
    newton_tol: float = 1e-12
    newton_max_iters: int = 25
    sample_dt: float = 1e-3
    refactor_threshold: float = 0.01
    overflow_guard: float = 1e15
    error_norm: str = "displacement"
    adaptive: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme: expected one of {SCHEMES}, got {self.scheme!r}")
        if self.error_norm not in ERROR_NORMS:
            raise ValueError(f"error_norm: expected one of {ERROR_NORMS}, got {self.error_norm!r}")
        for name in ("rtol", "atol", "dt_init", "dt_min", "dt_max", "newton_tol", "sample_dt",
                     "overflow_guard"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}: must be positive")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("dt_init: need dt_min <= dt_init <= dt_max")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters: must be >= 1")
        if self.refactor_threshold < 0:
            raise ValueError("refactor_threshold: must be nonnegative")

    def with_(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    newton_iterations: int = 0
    newton_failures: int = 0
    factorizations: int = 0


class _StageSolver:
    """Newton solver for one implicit stage, caching banded factorizations.

    A factorization depends on the stage coefficient ``d`` and, for the Berger
    beam, on the axial coefficient ``s``; it is reused while ``s`` moves by less
    than ``refactor_threshold`` (relative, floored at 1).
    """

    def __init__(self, system: SemiDiscreteSystem, icfg: IntegratorConfig, stats: StepStats):
        self.sys = system
        self.icfg = icfg
        self.stats = stats
        self._cache: dict[float, tuple[float, BandedLU]] = {}
        self._rank_c = 2.0 * system.cfg.b0 * system.mesh.dx if system.nonlinear else 0.0

    def _factor(self, d: float, s: float, fresh: bool) -> BandedLU:
        cached = self._cache.get(d)
        if cached is not None and not fresh:
            s_used, lu = cached
            if abs(s - s_used) <= self.icfg.refactor_threshold * max(abs(s), 1.0):
                return lu
        sys = self.sys
        terms = [(1.0, sys.A)]
        if sys.nonlinear and s != 0.0:
            terms.append((s, sys.ops.D2))
        lu = BandedLU(combine(sys.n, 1.0 / d**2 + sys.cfg.k / d, terms))
        self.stats.factorizations += 1
        if len(self._cache) >= 6:
            self._cache.pop(next(iter(self._cache)))
        self._cache[d] = (s, lu)
        return lu

    def solve(self, r_u: np.ndarray, r_v: np.ndarray, d: float, t1: float, guess: np.ndarray,
              forcing: Forcing = None) -> tuple[np.ndarray, np.ndarray]:
        """Solve ``v1 = r_v + d a(r_u + d v1, v1)`` for ``v1``; ``guess`` is a velocity.

        Working with the velocity avoids recovering it as ``(u1 - r_u) / d``,
        which amplifies round-off by ``1 / d``.
        """
        sys = self.sys
        k = sys.cfg.k
        load = sys.p if forcing is None else sys.p + forcing(t1)
        tol = self.icfg.newton_tol
        v = guess.copy()
        fresh = False
        for attempt in range(2):
            for it in range(self.icfg.newton_max_iters):
                u = r_u + d * v
                force, s, z = sys.internal_force(u)
                # residual scaled by 1/d so that its Jacobian is d (c0 I + A + lambda J_g)
                res = (v - r_v) / d + force + k * v - load
                try:
                    lu = self._factor(d, s, fresh)
                    if z is None:
                        dv = lu.solve(res)
                    else:
                        both = lu.solve(np.column_stack((res, z)))
                        x, y = both[:, 0], both[:, 1]
                        denom = 1.0 + self._rank_c * (z @ y)
                        if denom == 0.0:
                            raise SingularMatrixError("rank-one updated stage matrix is singular")
                        dv = x - (self._rank_c * (z @ x) / denom) * y
                except SingularMatrixError as exc:
                    raise NewtonFailure(str(exc)) from exc
                dv *= -1.0 / d
                v = v + dv
                self.stats.newton_iterations += 1
                if not np.all(np.isfinite(v)):
                    break
                if z is None:
                    # exact Jacobian of a linear stage: one solve is the answer
                    return r_u + d * v, v
                if d * np.max(np.abs(dv)) <= tol * (1.0 + np.max(np.abs(u))):
                    return r_u + d * v, v
            if fresh:
                break
            fresh = True
            v = guess.copy()
        self.stats.newton_failures += 1
        raise NewtonFailure(f"Newton did not converge at t={t1!r} with d={d:.3e}")


class Stepper:
    """Single-step driver shared by :func:`step` and :func:`integrate`."""

    def __init__(self, system: SemiDiscreteSystem, icfg: IntegratorConfig, forcing: Forcing = None,
                 stats: StepStats | None = None):
        self.sys = system
        self.icfg = icfg
        self.forcing = forcing
        self.stats = stats if stats is not None else StepStats()
        self.stage = _StageSolver(system, icfg, self.stats)

    def accel(self, t: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        a = self.sys.acceleration(u, v)
        if self.forcing is not None:
            a = a + self.forcing(t)
        return a

    def _trapezoid(self, t: float, u0: np.ndarray, v0: np.ndarray, a0: np.ndarray, h: float):
        d = 0.5 * h
        r_u = u0 + d * v0
        r_v = v0 + d * a0
        guess = v0 + h * a0
        return self.stage.solve(r_u, r_v, d, t + h, guess, self.forcing)

    def advance(self, t: float, u0: np.ndarray, v0: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
        a0 = self.accel(t, u0, v0)
        if self.icfg.scheme == "average-acceleration":
            return self._trapezoid(t, u0, v0, a0, h)
        ug, vg = self._trapezoid(t, u0, v0, a0, GAMMA * h)
        denom = GAMMA * (2.0 - GAMMA)
        cg, c0 = 1.0 / denom, (1.0 - GAMMA) ** 2 / denom
        d = (1.0 - GAMMA) / (2.0 - GAMMA) * h
        r_u = cg * ug - c0 * u0
        r_v = cg * vg - c0 * v0
        guess = v0 + (vg - v0) / GAMMA
        return self.stage.solve(r_u, r_v, d, t + h, guess, self.forcing)


def step(state: State, dt: float, cfg: BeamConfig, ops=None, mesh=None,
         int_cfg: IntegratorConfig | None = None, forcing: Forcing = None,
         system: SemiDiscreteSystem | None = None) -> State:
    """Advance ``state`` by one implicit step of size ``dt`` (no error control).

    Raises :class:`NewtonFailure` when the stage equations do not converge.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not state.is_finite():
        raise BlowUpError(state.t)
    icfg = int_cfg or IntegratorConfig()
    system = system or SemiDiscreteSystem(cfg, mesh, ops)
    u, v = Stepper(system, icfg, forcing).advance(state.t, state.u, state.v, dt)
    return State(state.t + dt, u, v)


@dataclass(eq=False)
class Trajectory:
    """Samples of one integration at multiples of ``sample_dt``."""

    cfg: BeamConfig
    icfg: IntegratorConfig
    system: SemiDiscreteSystem
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    E_nl: np.ndarray
    Pi_B: np.ndarray
    u_mid: np.ndarray
    power: np.ndarray
    status: str = "ok"
    exit_time: float = math.nan
    stats: StepStats = field(default_factory=StepStats)

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    @property
    def ops(self):
        return self.system.ops

    @property
    def mesh(self):
        return self.system.mesh

    def __len__(self) -> int:
        return self.t.size

    def state(self, j: int) -> State:
        return State(float(self.t[j]), self.u[j].copy(), self.v[j].copy())

    @property
    def final_state(self) -> State:
        return self.state(-1)

    def records(self, residual: np.ndarray | None = None) -> list[EnergyRecord]:
        res = np.full(self.t.size, math.nan)
        if residual is not None and self.t.size >= 3:
            res[1:-1] = residual
        return [
            EnergyRecord(float(self.t[j]), float(self.E[j]), float(self.E_nl[j]), float(self.Pi_B[j]),
                         float(self.u_mid[j]), float(res[j]))
            for j in range(self.t.size)
        ]


class _Recorder:
    def __init__(self, system: SemiDiscreteSystem, store_states: bool):
        self.sys = system
        self.store = store_states
        self.t, self.u, self.v, self.E, self.E_nl, self.Pi, self.mid, self.power = ([] for _ in range(8))

    def add(self, t: float, u: np.ndarray, v: np.ndarray) -> EnergyRecord:
        rec = energies(State(t, u, v), self.sys.cfg, self.sys.ops, self.sys.mesh, self.sys.p)
        self.t.append(t)
        self.E.append(rec.E)
        self.E_nl.append(rec.E_nl)
        self.Pi.append(rec.Pi_B)
        self.mid.append(rec.u_mid)
        self.power.append(energy_rates(u, v, self.sys.cfg, self.sys.ops))
        if self.store:
            self.u.append(u)
            self.v.append(v)
        return rec

    def build(self, icfg, status, exit_time, stats) -> Trajectory:
        n = self.sys.n
        as2d = lambda rows: np.array(rows) if rows else np.empty((0, n))
        return Trajectory(
            cfg=self.sys.cfg, icfg=icfg, system=self.sys, t=np.array(self.t), u=as2d(self.u),
            v=as2d(self.v), E=np.array(self.E), E_nl=np.array(self.E_nl), Pi_B=np.array(self.Pi),
            u_mid=np.array(self.mid), power=np.array(self.power), status=status, exit_time=exit_time, stats=stats,
        )


def _error_norm(err_u, err_v, u_old, u_new, v_old, v_new, icfg: IntegratorConfig) -> float:
    def part(err, a, b):
        scale = icfg.atol + icfg.rtol * np.maximum(np.abs(a), np.abs(b))
        return np.sum((err / scale) ** 2), err.size

    su, nu = part(err_u, u_old, u_new)
    if icfg.error_norm == "displacement":
        return math.sqrt(su / nu)
    sv, nv = part(err_v, v_old, v_new)
    return math.sqrt((su + sv) / (nu + nv))


def integrate(state0: State, t_end: float, cfg: BeamConfig, ops=None, mesh=None,
              int_cfg: IntegratorConfig | None = None, forcing: Forcing = None,
              system: SemiDiscreteSystem | None = None, store_states: bool = True,
              n_cells: int = 100) -> Trajectory:
    """Integrate from ``state0`` to ``t_end`` and sample every ``sample_dt``.

    A run whose linear energy passes ``overflow_guard`` (or becomes
    non-finite) stops early with ``status="diverged"``; that is a result, not
    an error. Raises :class:`StepSizeError` if the controller needs a step
    below ``dt_min``.
    """
    icfg = int_cfg or IntegratorConfig()
    if not t_end > state0.t:
        raise ValueError("t_end must exceed the initial time")
    if not state0.is_finite():
        raise BlowUpError(state0.t)
    system = system or SemiDiscreteSystem(cfg, mesh, ops, n_cells=n_cells)
    stepper = Stepper(system, icfg, forcing)
    stats = stepper.stats
    rec = _Recorder(system, store_states)

    t0 = float(state0.t)
    n_samples = int(math.floor((t_end - t0) / icfg.sample_dt * (1 + 1e-12)))
    sample_times = t0 + icfg.sample_dt * np.arange(1, n_samples + 1)
    if sample_times.size == 0 or sample_times[-1] < t_end - 1e-12 * max(1.0, abs(t_end)):
        sample_times = np.append(sample_times, t_end)

    t, u, v = t0, state0.u.copy(), state0.v.copy()
    rec.add(t, u, v)
    dt = min(icfg.dt_init, icfg.dt_max)
    err_prev = 1.0
    status, exit_time = "ok", math.nan
    order = 2
    richardson = 1.0 / (2**order - 1)

    t_prev = t0
    for t_next in sample_times:
        span = t_next - t_prev
        if abs(span - icfg.sample_dt) <= 1e-9 * icfg.sample_dt:
            span = icfg.sample_dt
        # the interval [t_prev, t_next] is covered by equal steps of size h = left / n_steps;
        # identical h across intervals lets the stage factorizations be reused
        t_start, left, n_steps, taken = t_prev, span, 0, 0
        while taken < n_steps or n_steps == 0:
            if n_steps == 0:
                n_steps = max(1, math.ceil(left / dt * (1 - 1e-9)))
                h = left / n_steps
                if h < icfg.dt_min and n_steps > 1:
                    raise StepSizeError(t, h, State(t, u, v))
            try:
                if icfg.adaptive:
                    u_big, v_big = stepper.advance(t, u, v, h)
                    u_half, v_half = stepper.advance(t, u, v, 0.5 * h)
                    u_new, v_new = stepper.advance(t + 0.5 * h, u_half, v_half, 0.5 * h)
                    err = _error_norm(richardson * (u_new - u_big), richardson * (v_new - v_big),
                                      u, u_new, v, v_new, icfg)
                else:
                    u_new, v_new = stepper.advance(t, u, v, h)
                    err = 0.0
            except NewtonFailure:
                stats.rejected += 1
                dt = 0.5 * h
                if dt < icfg.dt_min:
                    raise StepSizeError(t, dt, State(t, u, v))
                t_start, left, n_steps, taken = t, left - taken * h, 0, 0
                continue
            if not math.isfinite(err) or not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
                status, exit_time = "diverged", t
                break
            if err > 1.0:
                stats.rejected += 1
                dt = h * max(0.2, 0.9 * err ** (-1.0 / (order + 1)))
                if dt < icfg.dt_min:
                    raise StepSizeError(t, dt, State(t, u, v))
                t_start, left, n_steps, taken = t, left - taken * h, 0, 0
                continue
            stats.accepted += 1
            taken += 1
            t = t_next if taken == n_steps else t_start + taken * h
            u, v = u_new, v_new
            if icfg.adaptive:
                e = max(err, 1e-10)
                fac = 0.9 * e ** (-0.7 / (order + 1)) * err_prev ** (0.4 / (order + 1))
                proposal = h * min(5.0, max(0.2, fac))
                err_prev = e
                # sticky step size: small changes are not worth a new factorization
                if proposal < 0.8 * h or proposal > 1.25 * dt:
                    dt = min(proposal, icfg.dt_max)
                    if taken < n_steps:
                        t_start, left, n_steps, taken = t, left - taken * h, 0, 0
        if status == "diverged":
            break
        t_prev = t_next
        energy = rec.add(t, u, v)
        if not math.isfinite(energy.E) or energy.E > icfg.overflow_guard:
            status, exit_time = "diverged", t
            break

    if status == "diverged":
        log.info("trajectory diverged at t=%.6g", exit_time)
    return rec.build(icfg, status, exit_time, stats)


def run(cfg: BeamConfig, t_end: float, int_cfg: IntegratorConfig | None = None, n_cells: int = 100,
        **kwargs) -> Trajectory:
    """Integrate from the configuration's own initial data."""
    from .model import initial_state

    system = SemiDiscreteSystem(cfg, n_cells=n_cells)
    return integrate(initial_state(cfg, system.mesh), t_end, cfg, int_cfg=int_cfg, system=system, **kwargs)
