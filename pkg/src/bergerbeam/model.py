"""Clamped-clamped Berger beam with a piston-theory flow load.

The semi-discrete system solved everywhere in the package is

    u' = v
    v' = -D4 u - k v - lambda * (b - b0 * |u_x|^2) D2 u + p - mu * U * D1 u

on the interior nodes of a uniform grid. Positive ``b`` is in-axis
compression (destabilizing); negative ``b`` is tension.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .banded import BandedMatrix, combine

MIN_CELLS = 8

PRESETS = ("parabolic-velocity", "zero", "explicit")


class BlowUpError(FloatingPointError):
    """Raised when the state picks up non-finite entries."""

    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


def _as_tuple(values) -> tuple[float, ...] | None:
    if values is None:
        return None
    return tuple(float(x) for x in np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class InitialData:
    """Initial displacement/velocity.

    ``preset="parabolic-velocity"`` gives ``u0 = 0`` and ``u1 = a x (ell - x)``.
    ``preset="explicit"`` uses ``u0``/``u1`` sampled at the interior nodes (or at
    all ``N + 1`` nodes, in which case the boundary entries are dropped).
    """

    preset: str = "parabolic-velocity"
    amplitude: float = 10.0
    u0: tuple[float, ...] | None = None
    u1: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"init: unknown preset {self.preset!r}; expected one of {PRESETS}")
        object.__setattr__(self, "u0", _as_tuple(self.u0))
        object.__setattr__(self, "u1", _as_tuple(self.u1))
        if self.preset == "explicit" and self.u0 is None and self.u1 is None:
            raise ValueError("init: explicit initial data needs u0 and/or u1")

    @classmethod
    def explicit(cls, u0=None, u1=None) -> "InitialData":
        return cls(preset="explicit", amplitude=0.0, u0=u0, u1=u1)


Pressure = Union[float, tuple]


@dataclass(frozen=True)
class BeamConfig:
    """Physical parameters of one beam model instance.

    Parameters
    ----------
    ell : float
        Beam length.
    k : float
        Total damping coefficient, structural plus the flow share ``mu``.
    mu : float
        Strength of the flow-beam coupling.
    U : float
        Flow velocity.
    lambda_flag : int
        1 switches the Berger nonlinearity on, 0 gives the linear beam.
    b : float
        In-axis load; ``b > 0`` compresses.
    b0 : float
        Stretching stiffness of the Berger term.
    pressure : float or tuple of float
        Static pressure. A scalar is uniform; a tuple holds samples at
        equally spaced points on ``[0, ell]`` (linearly interpolated).
    init : InitialData
    """

    ell: float = 1.0
    k: float = 0.0
    mu: float = 1.0
    U: float = 0.0
    lambda_flag: int = 0
    b: float = 0.0
    b0: float = 1.0
    pressure: Pressure = 0.0
    init: InitialData = field(default_factory=InitialData)

    def __post_init__(self):
        if not np.isscalar(self.pressure):
            object.__setattr__(self, "pressure", _as_tuple(self.pressure))
        checks = {
            "ell": self.ell > 0,
            "k": self.k >= 0,
            "mu": self.mu >= 0,
            "U": self.U >= 0,
            "b0": self.b0 >= 0,
            "lambda_flag": self.lambda_flag in (0, 1),
        }
        for name, ok in checks.items():
            if not ok:
                raise ValueError(f"{name}: invalid value {getattr(self, name)!r}")
        for name in ("ell", "k", "mu", "U", "b", "b0"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name}: must be finite")

    def with_(self, **changes) -> "BeamConfig":
        return replace(self, **changes)

    @property
    def is_linear(self) -> bool:
        return self.lambda_flag == 0 or (self.b0 == 0.0)


@dataclass(frozen=True)
class Mesh:
    ell: float
    n_cells: int

    @property
    def dx(self) -> float:
        return self.ell / self.n_cells

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx

    @property
    def x(self) -> np.ndarray:
        """Interior node coordinates."""
        return self.nodes[1:-1]

    @property
    def mid_index(self) -> int:
        """Interior index of the node nearest ``ell / 2``."""
        return int(round(self.n_cells / 2)) - 1


def build_mesh(ell: float, n_cells: int) -> Mesh:
    if not ell > 0:
        raise ValueError(f"ell: must be positive, got {ell!r}")
    if int(n_cells) != n_cells or n_cells < MIN_CELLS:
        raise ValueError(f"n_cells: need an integer >= {MIN_CELLS}, got {n_cells!r}")
    return Mesh(float(ell), int(n_cells))


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Central-difference operators on the interior nodes.

    ``D4`` uses the clamped ghost-node closure ``u_{-1} = u_1``, which makes its
    first and last rows ``(7, -4, 1) / dx^4``.
    """

    D1: BandedMatrix
    D2: BandedMatrix
    D4: BandedMatrix
    ip_weights: np.ndarray

    def inner(self, u: np.ndarray, w: np.ndarray) -> float:
        return float(np.dot(self.ip_weights * u, w))

    def norm_sq(self, u: np.ndarray) -> float:
        return self.inner(u, u)


def build_operators(mesh: Mesh) -> DiscreteOperators:
    n, dx = mesh.n_interior, mesh.dx
    one = np.ones(n)
    D1 = BandedMatrix.from_diagonals({-1: -one[1:] / (2 * dx), 1: one[1:] / (2 * dx)}, n)
    D2 = BandedMatrix.from_diagonals(
        {-1: one[1:] / dx**2, 0: -2 * one / dx**2, 1: one[1:] / dx**2}, n
    )
    main = 6.0 * one
    main[0] = main[-1] = 7.0
    h4 = dx**4
    D4 = BandedMatrix.from_diagonals(
        {-2: one[2:] / h4, -1: -4 * one[1:] / h4, 0: main / h4, 1: -4 * one[1:] / h4, 2: one[2:] / h4},
        n,
    )
    weights = np.full(n, dx)
    weights.setflags(write=False)
    return DiscreteOperators(D1, D2, D4, weights)


def grad_norm_sq(u: np.ndarray, mesh: Mesh) -> float:
    """Discrete ``|u_x|^2`` from forward differences with zero boundary values."""
    padded = np.concatenate(([0.0], u, [0.0]))
    return float(np.sum(np.diff(padded) ** 2) / mesh.dx)


def berger_force(u: np.ndarray, b: float, b0: float, ops: DiscreteOperators, mesh: Mesh) -> np.ndarray:
    """``(b - b0 |u_x|^2) D2 u``."""
    return (b - b0 * grad_norm_sq(u, mesh)) * ops.D2.matvec(u)


def pressure_at_nodes(cfg: BeamConfig, mesh: Mesh) -> np.ndarray:
    if np.isscalar(cfg.pressure):
        return np.full(mesh.n_interior, float(cfg.pressure))
    samples = np.asarray(cfg.pressure, dtype=float)
    if samples.size == 1:
        return np.full(mesh.n_interior, samples[0])
    xs = np.linspace(0.0, mesh.ell, samples.size)
    return np.interp(mesh.x, xs, samples)


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-D arrays of equal length")

    def negated(self) -> "State":
        return State(self.t, -self.u, -self.v)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


def _interior_samples(values, mesh: Mesh, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == mesh.n_cells + 1:
        return arr[1:-1].copy()
    if arr.size == mesh.n_interior:
        return arr.copy()
    raise ValueError(
        f"{name}: expected {mesh.n_interior} interior or {mesh.n_cells + 1} nodal samples, got {arr.size}"
    )


def initial_state(cfg: BeamConfig, mesh: Mesh, t0: float = 0.0) -> State:
    init = cfg.init
    x = mesh.x
    zero = np.zeros(mesh.n_interior)
    if init.preset == "parabolic-velocity":
        return State(t0, zero, init.amplitude * x * (mesh.ell - x))
    if init.preset == "zero":
        return State(t0, zero, zero.copy())
    u = zero if init.u0 is None else _interior_samples(init.u0, mesh, "u0")
    v = zero.copy() if init.u1 is None else _interior_samples(init.u1, mesh, "u1")
    return State(t0, u, v)


class SemiDiscreteSystem:
    """Bundles a configuration with its mesh and operators.

    Holds the pieces needed by the time stepper: the linear part
    ``A = D4 + mu U D1`` (so that ``v' = -A u - k v - lambda g(u) + p``) and
    the nodal pressure.
    """

    def __init__(self, cfg: BeamConfig, mesh: Mesh | None = None, ops: DiscreteOperators | None = None,
                 n_cells: int = 100):
        self.cfg = cfg
        self.mesh = mesh if mesh is not None else build_mesh(cfg.ell, n_cells)
        if abs(self.mesh.ell - cfg.ell) > 1e-12 * cfg.ell:
            raise ValueError("mesh length does not match cfg.ell")
        self.ops = ops if ops is not None else build_operators(self.mesh)
        self.p = pressure_at_nodes(cfg, self.mesh)
        self.flow = cfg.mu * cfg.U
        self.nonlinear = cfg.lambda_flag == 1
        terms = [(1.0, self.ops.D4)] + ([(self.flow, self.ops.D1)] if self.flow != 0.0 else [])
        self.A = combine(self.n, 0.0, terms)

    @property
    def n(self) -> int:
        return self.mesh.n_interior

    def stretch(self, u: np.ndarray) -> float:
        """Effective axial coefficient ``b - b0 |u_x|^2`` (0 for the linear beam)."""
        if not self.nonlinear:
            return 0.0
        return self.cfg.b - self.cfg.b0 * grad_norm_sq(u, self.mesh)

    def internal_force(self, u: np.ndarray) -> tuple[np.ndarray, float, np.ndarray | None]:
        """Return ``(A u + lambda s D2 u, s, D2 u)`` with ``s = b - b0 |u_x|^2``.

        ``|u_x|^2`` is taken as ``-(u, D2 u)_h``, equal to the forward-difference
        form, so the ``D2 u`` product is shared.
        """
        f = self.A.matvec(u)
        if not self.nonlinear:
            return f, 0.0, None
        z = self.ops.D2.matvec(u)
        s = self.cfg.b + self.cfg.b0 * self.mesh.dx * float(u @ z)
        f += s * z
        return f, s, z

    def acceleration(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        f, _, _ = self.internal_force(u)
        return self.p - f - self.cfg.k * v

    def static_residual(self, u: np.ndarray) -> np.ndarray:
        """``G(u) = -D4 u - lambda f_B(u) + p - mu U D1 u`` (steady-state residual)."""
        return self.acceleration(u, np.zeros_like(u))


def rhs(state: State, cfg: BeamConfig, ops: DiscreteOperators, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side ``(du, dv)`` of the first-order semi-discrete system."""
    if not state.is_finite():
        raise BlowUpError(state.t)
    system = SemiDiscreteSystem(cfg, mesh, ops)
    return state.v.copy(), system.acceleration(state.u, state.v)


def node_values(u: np.ndarray) -> np.ndarray:
    """Interior vector padded with the clamped boundary zeros."""
    return np.concatenate(([0.0], u, [0.0]))


def sample(fn, mesh: Mesh) -> np.ndarray:
    """Evaluate ``fn`` at the interior nodes."""
    return np.asarray(fn(mesh.x), dtype=float)


__all__: Sequence[str] = (
    "BeamConfig", "InitialData", "Mesh", "DiscreteOperators", "State", "BlowUpError",
    "SemiDiscreteSystem", "build_mesh", "build_operators", "grad_norm_sq", "berger_force",
    "rhs", "initial_state", "pressure_at_nodes", "node_values", "sample",
)
