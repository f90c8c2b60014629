"""Parameter studies built on the integrator: critical flow velocity, buckled
steady states, limit cycles and one-parameter sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .diagnostics import NEUTRAL_BAND, GrowthEstimate, fit_growth_rate
from .integrator import IntegratorConfig, integrate, run
from .model import BeamConfig, SemiDiscreteSystem, State

log = logging.getLogger(__name__)

# Probes only need the trend of E(t); L-stable stepping at a looser tolerance
# keeps a bisection within a couple of minutes.
PROBE_INTEGRATOR = IntegratorConfig(scheme="bdf2", rtol=1e-5, atol=1e-8, sample_dt=1e-3)
CONFIRM_INTEGRATOR = IntegratorConfig(scheme="bdf2", rtol=1e-6, atol=1e-9, sample_dt=1e-3)

SWEEP_AXES = ("U", "k", "b", "b0")
SWEEP_OUTPUTS = ("final_E", "growth", "cycle", "u_mid")


# --------------------------------------------------------------------------- critical velocity

class BracketError(ValueError):
    """The initial bracket does not straddle the stability threshold."""


@dataclass(frozen=True)
class Probe:
    U: float
    estimate: GrowthEstimate
    final_E: float
    status: str

    @property
    def growing(self) -> bool:
        return self.estimate.growing


@dataclass(frozen=True)
class CriticalVelocityReport:
    """Outcome of :func:`find_ucrit`.

    ``brackets`` lists every ``(U_lo, U_hi)`` pair, the initial one first, and
    ``probes`` every integration in the order it was run.
    """

    U_crit: float
    brackets: tuple[tuple[float, float], ...]
    probes: tuple[Probe, ...]
    horizon: float
    tol_U: float
    band: float
    min_r2: float
    window: float
    integrator: IntegratorConfig

    @property
    def bracket(self) -> tuple[float, float]:
        return self.brackets[-1]


def probe_growth(cfg: BeamConfig, U: float, horizon: float, int_cfg: IntegratorConfig | None = None,
                 n_cells: int = 100, window: float = 0.5, band: float = NEUTRAL_BAND,
                 min_r2: float = 0.9) -> Probe:
    """Integrate at flow velocity ``U`` and classify the growth of ``E``."""
    traj = run(cfg.with_(U=float(U)), horizon, int_cfg or PROBE_INTEGRATOR, n_cells=n_cells,
               store_states=False)
    est = fit_growth_rate(traj, window=window, band=band, min_r2=min_r2)
    return Probe(float(U), est, float(traj.E[-1]), traj.status)


def find_ucrit(cfg: BeamConfig, U_lo: float, U_hi: float, tol_U: float = 2.0, horizon: float = 2.0,
               int_cfg: IntegratorConfig | None = None, n_cells: int = 100, window: float = 0.5,
               band: float = NEUTRAL_BAND, min_r2: float = 0.9) -> CriticalVelocityReport:
    """Bisect on ``U`` for the onset of exponential energy growth of the linear beam.

    Parameters
    ----------
    cfg : BeamConfig
        Linear configuration (``lambda_flag == 0``); its ``U`` is ignored.
    U_lo, U_hi : float
        Initial bracket. ``U_lo`` must be non-growing and ``U_hi`` growing.
    tol_U : float
        Stop once ``U_hi - U_lo <= tol_U``.
    horizon : float
        Length of every probe integration.
    window, band, min_r2 : float
        Passed to :func:`~bergerbeam.diagnostics.fit_growth_rate`. The ``min_r2``
        gate keeps the beating of two nearly coalesced modes below the
        threshold from being read as growth.

    Returns
    -------
    CriticalVelocityReport
        ``U_crit`` is the midpoint of the final bracket.

    Raises
    ------
    BracketError
        If the end points do not classify as non-growing / growing, or the
        ``U_lo`` probe diverges.
    """
    if cfg.lambda_flag != 0:
        raise ValueError("lambda_flag: find_ucrit works on the linear model (lambda_flag=0)")
    if not (0 <= U_lo < U_hi) or not (tol_U > 0 and horizon > 0):
        raise ValueError("need 0 <= U_lo < U_hi, tol_U > 0 and horizon > 0")
    icfg = int_cfg or PROBE_INTEGRATOR
    opts = dict(horizon=horizon, int_cfg=icfg, n_cells=n_cells, window=window, band=band, min_r2=min_r2)

    lo, hi = probe_growth(cfg, U_lo, **opts), probe_growth(cfg, U_hi, **opts)
    probes = [lo, hi]
    if lo.status == "diverged":
        raise BracketError(f"bracket invalid: probe at U_lo={U_lo!r} diverged; shorten the horizon "
                           "or tighten the integrator")
    if lo.growing or not hi.growing:
        raise BracketError(
            f"bracket invalid: U_lo={U_lo!r} is {lo.estimate.classification}, "
            f"U_hi={U_hi!r} is {hi.estimate.classification}"
        )
    a, b = float(U_lo), float(U_hi)
    brackets = [(a, b)]
    while b - a > tol_U:
        mid = 0.5 * (a + b)
        p = probe_growth(cfg, mid, **opts)
        probes.append(p)
        log.info("U=%.4f sigma=%.4g r2=%.3f -> %s", mid, p.estimate.sigma, p.estimate.r2,
                 p.estimate.classification)
        if p.growing:
            b = mid
        else:
            a = mid
        brackets.append((a, b))
    return CriticalVelocityReport(
        U_crit=0.5 * (a + b), brackets=tuple(brackets), probes=tuple(probes), horizon=horizon,
        tol_U=tol_U, band=band, min_r2=min_r2, window=window, integrator=icfg,
    )


# --------------------------------------------------------------------------- steady states

class SteadyStateError(RuntimeError):
    """Continuation could not proceed (fold or singular Jacobian)."""


def buckling_loads(system: SemiDiscreteSystem) -> tuple[np.ndarray, np.ndarray]:
    """Real axial loads ``s`` with ``(D4 + mu U D1) phi = s (-D2) phi``, ascending.

    Returns the loads and the matching eigenvectors as columns. Past the
    smallest load the trivial state of the Berger beam loses stability.
    """
    A = system.A.toarray()
    B = -system.ops.D2.toarray()
    w, V = scipy.linalg.eig(A, B)
    real = np.isfinite(w) & (np.abs(w.imag) <= 1e-9 * np.maximum(1.0, np.abs(w.real)))
    order = np.argsort(w.real[real])
    return w.real[real][order], V[:, real].real[:, order]


def _stencils(n: int, dx):
    """Difference operators evaluated in whatever precision ``dx`` carries."""
    zero = np.zeros(1, dtype=type(dx))

    def d1(u):
        p = np.concatenate((zero, u, zero))
        return (p[2:] - p[:-2]) / (2 * dx)

    def d2(u):
        p = np.concatenate((zero, u, zero))
        return (p[:-2] - 2 * p[1:-1] + p[2:]) / dx**2

    def d4(u):
        p = np.concatenate((u[:1], zero, u, zero, u[-1:]))
        return (p[:-4] - 4 * p[1:-3] + 6 * p[2:-2] - 4 * p[3:-1] + p[4:]) / dx**4

    return d1, d2, d4


def steady_residual(system: SemiDiscreteSystem, u: np.ndarray) -> np.ndarray:
    """``G(u) = -D4 u - lambda (b - b0 |u_x|^2) D2 u + p - mu U D1 u``, in the precision of ``u``.

    Passing a ``np.longdouble`` vector gives the residual with extended
    precision, which matters here: ``D4`` scales like ``dx^-4``, so the float64
    rounding of ``u`` alone already contributes ``O(1e-8)`` to ``G``.
    """
    cfg, mesh = system.cfg, system.mesh
    dt = u.dtype.type
    dx = dt(mesh.ell) / dt(mesh.n_cells)
    d1, d2, d4 = _stencils(u.size, dx)
    g = system.p.astype(u.dtype) - d4(u)
    if system.flow != 0.0:
        g -= dt(system.flow) * d1(u)
    if system.nonlinear:
        z = d2(u)
        s = dt(cfg.b) + dt(cfg.b0) * dx * (u @ z)
        g -= s * z
    return g


def _norm_h(g: np.ndarray, dx: float) -> float:
    return float(np.sqrt(dx * np.sum(g.astype(np.longdouble) ** 2)))


@dataclass(frozen=True)
class _NewtonResult:
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _newton_steady(system: SemiDiscreteSystem, guess: np.ndarray, tol: float, max_iter: int) -> _NewtonResult:
    """Newton with float64 corrections and an extended-precision residual.

    The Jacobian is dense: at a buckled state ``A + s D2`` is singular by
    construction, so the banded-plus-rank-one splitting would divide by zero.
    """
    dx = system.mesh.dx
    A = system.A.toarray()
    D2 = system.ops.D2.toarray()
    u = np.asarray(guess, dtype=np.longdouble).copy()
    g = steady_residual(system, u)
    res = _norm_h(g, dx)
    for it in range(1, max_iter + 1):
        if res <= tol:
            return _NewtonResult(u, res, it - 1, True)
        u64 = u.astype(float)
        J = -A
        if system.nonlinear:
            _, s, z = system.internal_force(u64)
            J = J - s * D2 - 2.0 * system.cfg.b0 * dx * np.outer(z, z)
        try:
            du = scipy.linalg.solve(J, g.astype(float), check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise np.linalg.LinAlgError(f"singular steady-state Jacobian: {exc}") from exc
        u = u - du.astype(np.longdouble)
        g = steady_residual(system, u)
        res = _norm_h(g, dx)
        if not math.isfinite(res):
            return _NewtonResult(u, res, it, False)
    return _NewtonResult(u, res, max_iter, res <= tol)


@dataclass(frozen=True)
class Continuation:
    """Ramp one parameter from ``start`` to the target value of the configuration.

    Steps that fail are halved until they drop below ``min_step``.
    """

    parameter: str = "b"
    start: float = 0.0
    step: float = 5.0
    min_step: float = 5.0 / 64

    def __post_init__(self):
        if self.parameter not in ("b", "U"):
            raise ValueError(f"continuation parameter: expected 'b' or 'U', got {self.parameter!r}")
        if not (self.step > 0 and 0 < self.min_step <= self.step):
            raise ValueError("continuation step: need 0 < min_step <= step")


@dataclass(frozen=True, eq=False)
class SteadyStateReport:
    """Steady state ``u*`` of the beam and how it was obtained.

    ``u_star`` is kept in extended precision; ``residual_norm`` is the
    ``h``-norm of ``G(u*)`` evaluated in that precision and
    ``residual_norm_float64`` the same quantity after rounding ``u*`` to
    float64. ``stability`` is ``"stable"``, ``"unstable"`` or ``"untested"``.
    """

    u_star: np.ndarray
    x: np.ndarray
    residual_norm: float
    residual_norm_float64: float
    newton_iterations: int
    energy: float
    converged: bool
    stability: str = "untested"
    path: tuple[tuple[float, int], ...] = ()

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.u_star)))


def _amplitude(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.astype(float)), initial=0.0))


def _branch_guess(system: SemiDiscreteSystem) -> np.ndarray | None:
    """Leading-order buckled shape ``a phi`` once ``b`` exceeds the first buckling load.

    From ``b - b0 |a phi_x|^2 = s_c`` on the buckled branch.
    """
    cfg = system.cfg
    if not system.nonlinear or cfg.b0 <= 0:
        return None
    loads, modes = buckling_loads(system)
    if loads.size == 0 or cfg.b <= loads[0]:
        return None
    phi = modes[:, 0]
    slope = -system.mesh.dx * float(phi @ system.ops.D2.matvec(phi))
    a = math.sqrt((cfg.b - loads[0]) / (cfg.b0 * slope))
    u = a * phi
    return u if u[system.mesh.mid_index] >= 0 else -u


def solve_steady_state(cfg: BeamConfig, guess: np.ndarray | None = None,
                       continuation: Continuation | str | None = None, tol: float = 1e-10,
                       max_iter: int = 50, confirm: bool = True, confirm_horizon: float = 5.0,
                       perturbation: float = 1e-3, int_cfg: IntegratorConfig | None = None,
                       n_cells: int = 100) -> SteadyStateReport:
    """Solve ``G(u) = 0`` by Newton's method, optionally along a parameter ramp.

    Parameters
    ----------
    cfg : BeamConfig
    guess : ndarray, optional
        Interior starting vector; zero by default. With continuation it seeds
        the first ramp value.
    continuation : Continuation, "b", "U" or None
        Ramp the named parameter from 0 to its value in ``cfg``. While the
        iterate sits on the trivial branch past the first buckling load, the
        next guess is switched to the buckled mode.
    tol : float
        Target for ``|G(u*)|_h``.
    confirm : bool
        Integrate from ``u* + perturbation * bump`` for ``confirm_horizon``
        and tag the state stable if the deviation stays within 50 times the
        perturbation.

    Returns
    -------
    SteadyStateReport
        Non-convergence without continuation is reported with
        ``converged=False`` and the last iterate.

    Raises
    ------
    SteadyStateError
        A continuation step fails below the minimum step, or the Jacobian is
        singular (the message names the step).
    """
    if isinstance(continuation, str):
        continuation = Continuation(parameter=continuation)
    system = SemiDiscreteSystem(cfg, n_cells=n_cells)
    n = system.n
    u = np.zeros(n) if guess is None else np.asarray(guess, dtype=float).copy()
    if u.shape != (n,) or not np.all(np.isfinite(u)):
        raise ValueError(f"guess: need {n} finite interior values")

    path: list[tuple[float, int]] = []
    total = 0
    if continuation is None:
        try:
            res = _newton_steady(system, u, tol, max_iter)
        except np.linalg.LinAlgError as exc:
            raise SteadyStateError(str(exc)) from exc
        total = res.iterations
    else:
        name = continuation.parameter
        target = float(getattr(cfg, name))
        value = float(continuation.start)
        step = continuation.step
        direction = 1.0 if target >= value else -1.0
        current = u.astype(np.longdouble)
        res = None
        j = 0
        while True:
            j += 1
            nxt = target if abs(target - value) <= step else value + direction * step
            sub = SemiDiscreteSystem(cfg.with_(**{name: nxt}), system.mesh, system.ops)
            start = current
            seeded = _branch_guess(sub)
            # still near the trivial branch although buckling is possible: jump to the buckled mode
            if seeded is not None and _amplitude(current) < 0.5 * _amplitude(seeded):
                start = seeded
            try:
                attempt = _newton_steady(sub, start, tol, max_iter)
            except np.linalg.LinAlgError as exc:
                raise SteadyStateError(f"continuation step {j} ({name}={nxt:g}): {exc}") from exc
            total += attempt.iterations
            if not attempt.converged:
                step *= 0.5
                if step < continuation.min_step:
                    raise SteadyStateError(
                        f"continuation step {j} ({name}={nxt:g}): Newton failed with step below "
                        f"{continuation.min_step:g}; possible fold"
                    )
                continue
            current, value, res = attempt.u, nxt, attempt
            path.append((value, attempt.iterations))
            if value == target:
                break
            step = min(continuation.step, 2.0 * step)
    u_star = res.u
    if not np.any(system.p) and u_star[system.mesh.mid_index] < 0:
        u_star = -u_star  # G is odd when p = 0; report the branch with u_mid > 0
    u64 = u_star.astype(float)
    ops = system.ops
    report = SteadyStateReport(
        u_star=u_star, x=system.mesh.x, residual_norm=_norm_h(steady_residual(system, u_star), system.mesh.dx),
        residual_norm_float64=_norm_h(steady_residual(system, u64), system.mesh.dx),
        newton_iterations=total, energy=0.5 * ops.inner(u64, ops.D4.matvec(u64)),
        converged=res.converged, path=tuple(path),
    )
    if confirm and report.converged:
        report = _with_stability(report, system, confirm_horizon, perturbation, int_cfg)
    return report


def _with_stability(report: SteadyStateReport, system: SemiDiscreteSystem, horizon: float, eps: float,
                    int_cfg: IntegratorConfig | None) -> SteadyStateReport:
    x, ell = system.mesh.x, system.mesh.ell
    u_star = report.u_star.astype(float)
    bump = 4.0 * x * (ell - x) / ell**2
    start = State(0.0, u_star + eps * bump, np.zeros_like(u_star))
    icfg = (int_cfg or CONFIRM_INTEGRATOR).with_(sample_dt=max(horizon / 500, 1e-3))
    traj = integrate(start, horizon, system.cfg, int_cfg=icfg, system=system)
    if traj.diverged:
        tag = "unstable"
    else:
        dev = np.max(np.abs(traj.u - u_star), axis=1)
        tag = "stable" if dev.max() <= 50.0 * eps else "unstable"
    return SteadyStateReport(**{**report.__dict__, "stability": tag})


# --------------------------------------------------------------------------- limit cycles

@dataclass(frozen=True)
class LimitCycleReport:
    """Periodicity check on the tail of ``u_mid(t)``.

    ``status`` is ``"converged"``, ``"not-converged"`` or ``"inconclusive"``
    (fewer than six extrema in the tail).
    """

    converged: bool
    period: float
    amplitude: float
    tail_window: tuple[float, float]
    n_peaks: int
    status: str
    variation: float = math.nan
    peak_times: tuple[float, ...] = ()
    peaks_per_period: int | None = None


def _refine(t: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through samples ``i - 1, i, i + 1``."""
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
    a = (t2 * (y1 - y0) + t1 * (y0 - y2) + t0 * (y2 - y1)) / denom
    b = (t2**2 * (y0 - y1) + t1**2 * (y2 - y0) + t0**2 * (y1 - y2)) / denom
    if a == 0.0:
        return float(t1), float(y1)
    tv = -b / (2 * a)
    if not t0 <= tv <= t2:
        return float(t1), float(y1)
    c = y1 - a * t1**2 - b * t1
    return float(tv), float(a * tv**2 + b * tv + c)


def extrema(t: np.ndarray, y: np.ndarray) -> tuple[list[tuple[float, float]], list[tuple[float, float]]]:
    """Refined ``(time, value)`` of the interior maxima and minima of a sampled signal."""
    dy = np.diff(y)
    maxima, minima = [], []
    for i in range(1, y.size - 1):
        if dy[i - 1] > 0 and dy[i] <= 0:
            maxima.append(_refine(t, y, i))
        elif dy[i - 1] < 0 and dy[i] >= 0:
            minima.append(_refine(t, y, i))
    return maxima, minima


def _peaks_per_period(values: np.ndarray, tol: float) -> int | None:
    """Smallest lag m at which the peak heights repeat over the last two periods."""
    for m in range(1, values.size // 3 + 1):
        recent = values[-3 * m - 1:]
        if np.max(np.abs(recent[m:] - recent[:-m])) <= tol:
            return m
    return None


def detect_limit_cycle(traj, tail_fraction: float = 0.5, rel_tol: float = 0.01,
                       floor: float = 1e-6) -> LimitCycleReport:
    """Decide whether ``u_mid`` has settled onto a periodic orbit.

    An orbit may carry several unequal maxima per period. The number ``m``
    of maxima per period is the smallest lag at which the refined peak
    heights recur to within ``rel_tol`` of the tail's range. The last three
    periods, each spanning ``m`` consecutive peak gaps, are then compared
    by their peak-to-peak amplitude.

    Parameters
    ----------
    traj : Trajectory or any object with ``t`` and ``u_mid`` arrays
    tail_fraction : float
        Trailing fraction of the time span that is analysed.
    rel_tol : float
        Allowed relative spread of the last three period amplitudes.
    floor : float
        Amplitudes at or below this count as no cycle.

    Returns
    -------
    LimitCycleReport
        ``status`` is ``"inconclusive"`` when the tail holds fewer than six
        extrema. Without a recurring peak pattern the period falls back to
        the mean peak spacing and the report is not converged.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction must be in (0, 1], got {tail_fraction!r}")
    t = np.asarray(traj.t, dtype=float)
    y = np.asarray(traj.u_mid, dtype=float)
    t_cut = t[-1] - tail_fraction * (t[-1] - t[0])
    keep = t >= t_cut
    t, y = t[keep], y[keep]
    window = (float(t[0]), float(t[-1])) if t.size else (math.nan, math.nan)
    maxima, minima = extrema(t, y) if t.size >= 3 else ([], [])
    spread = float(np.ptp(y)) if y.size else 0.0
    if len(maxima) + len(minima) < 6 or len(maxima) < 3 or len(minima) < 2:
        return LimitCycleReport(False, math.nan, spread, window, len(maxima), "inconclusive")
    peak_t = np.array([m[0] for m in maxima])
    peak_v = np.array([m[1] for m in maxima])
    m = _peaks_per_period(peak_v, rel_tol * spread) if spread > floor else None
    if m is None:
        return LimitCycleReport(False, float(np.mean(np.diff(peak_t))), spread, window, len(maxima),
                                "not-converged", math.inf, tuple(float(v) for v in peak_t))
    ends = peak_t[-1 - np.arange(4) * m][::-1]
    ext = np.array(maxima + minima)
    swings = np.array([np.ptp(ext[(ext[:, 0] >= a) & (ext[:, 0] <= b), 1]) for a, b in zip(ends[:-1], ends[1:])])
    amplitude = float(np.mean(swings))
    variation = float(np.ptp(swings) / amplitude) if amplitude > 0 else math.inf
    converged = amplitude > floor and variation <= rel_tol
    return LimitCycleReport(
        converged=converged, period=float(np.mean(np.diff(ends))), amplitude=amplitude, tail_window=window,
        n_peaks=len(maxima), status="converged" if converged else "not-converged",
        variation=variation, peak_times=tuple(float(v) for v in peak_t), peaks_per_period=m,
    )


# --------------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    final_E: float = math.nan
    sigma: float = math.nan
    classification: str = ""
    cycle_amplitude: float = math.nan
    cycle_period: float = math.nan
    cycle_converged: bool = False
    status: str = "ok"
    error: str | None = None
    u_mid: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SweepTable:
    axis: str
    rows: tuple[SweepRow, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


@dataclass(frozen=True)
class _SweepJob:
    cfg: BeamConfig
    axis: str
    value: float
    horizon: float
    icfg: IntegratorConfig
    n_cells: int
    outputs: tuple[str, ...]
    window: float
    tail_fraction: float


def _sweep_row(job: _SweepJob) -> SweepRow:
    try:
        cfg = job.cfg.with_(**{job.axis: job.value})
        traj = run(cfg, job.horizon, job.icfg, n_cells=job.n_cells, store_states=False)
        row = {"axis_value": job.value, "status": traj.status}
        if "final_E" in job.outputs:
            row["final_E"] = float(traj.E[-1])
        if "growth" in job.outputs:
            est = fit_growth_rate(traj, window=job.window)
            row.update(sigma=est.sigma, classification=est.classification)
        if "cycle" in job.outputs:
            cyc = detect_limit_cycle(traj, job.tail_fraction)
            row.update(cycle_amplitude=cyc.amplitude, cycle_period=cyc.period, cycle_converged=cyc.converged)
        if "u_mid" in job.outputs:
            row["u_mid"] = tuple(float(v) for v in traj.u_mid)
        return SweepRow(**row)
    except Exception as exc:  # a failing row must not sink the sweep
        return SweepRow(job.value, classification="error", status="error", error=f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: BeamConfig, axis: str, values: Sequence[float],
              outputs: Sequence[str] = ("final_E", "growth", "cycle"), horizon: float = 1.0,
              int_cfg: IntegratorConfig | None = None, n_cells: int = 100, workers: int = 1,
              window: float = 0.5, tail_fraction: float = 0.5) -> SweepTable:
    """Integrate once per value of ``axis`` and tabulate the selected summaries.

    Rows follow the order of ``values`` whatever the completion order; a row
    whose run raises is kept with ``status="error"`` and the message.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis: expected one of {SWEEP_AXES}, got {axis!r}")
    unknown = set(outputs) - set(SWEEP_OUTPUTS)
    if unknown:
        raise ValueError(f"outputs: unknown selectors {sorted(unknown)}")
    vals = [float(v) for v in values]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("values: must be finite")
    icfg = int_cfg or IntegratorConfig()
    jobs = [_SweepJob(cfg, axis, v, horizon, icfg, n_cells, tuple(outputs), window, tail_fraction) for v in vals]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    return SweepTable(axis, tuple(rows))
