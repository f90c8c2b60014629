"""Reference values and the built-in oracle suite behind ``bergerbeam verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .diagnostics import energy_identity_residual
from .integrator import IntegratorConfig, run
from .model import BeamConfig, build_mesh, build_operators


def clamped_beam_root(n: int = 1, tol: float = 1e-15) -> float:
    """``n``-th positive root of ``cos(beta) cosh(beta) = 1`` by bisection.

    The equation is rewritten as ``cos(beta) - 1 / cosh(beta) = 0``, which
    stays bounded; the ``n``-th root is the only one in ``(n pi, (n + 1) pi)``,
    close to ``(n + 1/2) pi`` on alternating sides.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    f = lambda b: math.cos(b) - 1.0 / math.cosh(b)
    lo, hi = n * math.pi, (n + 1.0) * math.pi
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ArithmeticError("root not bracketed")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def smallest_d4_eigenvalue(n_cells: int, ell: float = 1.0) -> float:
    """Smallest eigenvalue of the clamped ``D4`` matrix."""
    ops = build_operators(build_mesh(ell, n_cells))
    D4 = ops.D4
    # upper band storage for the symmetric solver
    upper = D4.ab[: D4.ku + 1]
    w = scipy.linalg.eig_banded(upper, lower=False, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def observed_orders(n_cells, errors) -> np.ndarray:
    """``log2`` ratios of successive errors on meshes refined by the same factor."""
    n = np.asarray(n_cells, dtype=float)
    e = np.abs(np.asarray(errors, dtype=float))
    return np.log(e[:-1] / e[1:]) / np.log(n[1:] / n[:-1])


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: {self.value:.6g} (threshold {self.threshold:g}) {self.detail}".rstrip()


def check_conservation(t_end: float = 1.0) -> OracleResult:
    """Undamped linear beam without flow: relative drift of ``E`` under the trapezoidal rule."""
    traj = run(BeamConfig(), t_end, IntegratorConfig(scheme="average-acceleration"), store_states=False)
    drift = float(np.max(np.abs(traj.E - traj.E[0])) / traj.E[0])
    return OracleResult("conservation", drift, 1e-10, drift <= 1e-10, f"T={t_end:g}")


def check_eigenvalue_convergence(n_cells=(25, 50, 100, 200)) -> OracleResult:
    """Order of convergence of the smallest ``D4`` eigenvalue to ``beta_1^4``."""
    exact = clamped_beam_root(1) ** 4
    errors = [smallest_d4_eigenvalue(n) - exact for n in n_cells]
    orders = observed_orders(n_cells, errors)
    worst = float(orders[np.argmax(np.abs(orders - 2.0))])
    return OracleResult("eigenvalue order", worst, 0.2, bool(np.all(np.abs(orders - 2.0) <= 0.2)),
                        "orders " + ", ".join(f"{o:.4f}" for o in orders))


def check_identity_residual(t_end: float = 1.0) -> OracleResult:
    """Energy-identity residual of the conservative linear beam."""
    traj = run(BeamConfig(), t_end, store_states=False)
    r = float(np.max(np.abs(energy_identity_residual(traj))))
    return OracleResult("energy identity", r, 1e-6, r <= 1e-6, f"T={t_end:g}")


ORACLES: dict[str, Callable[[], OracleResult]] = {
    "conservation": check_conservation,
    "eigenvalue": check_eigenvalue_convergence,
    "identity": check_identity_residual,
}


def run_oracles() -> list[OracleResult]:
    return [check() for check in ORACLES.values()]
