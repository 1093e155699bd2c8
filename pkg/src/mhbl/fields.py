"""Core value types: physical parameters, grids, outflow traces, states.

The solver works on a rectangle (xi, eta) in T x [0, eta_max], xi periodic
with period 2*pi, eta the stream-function coordinate normal to the wall.
The evolved unknown is v = (u1, theta, q) with q = h1^2 / 2, where h1 is the
tangential magnetic field.  All containers here are immutable value objects:
arrays are copied on construction and frozen, and mutation happens only by
constructing new instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from numpy.typing import NDArray

from .errors import GridSizingError, MissingTimeLevelError, PositivityError

FloatArray = NDArray[np.float64]

#: Hard floor used by coefficient evaluations before dividing.
DENOM_GUARD = 1e-12


def _frozen(a: object, dtype=np.float64) -> FloatArray:
    """Copy to a C-contiguous float array and make it read-only."""
    out = np.array(a, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Params:
    """Physical constants.

    mu, kappa, nu are the viscosity, heat-conduction and magnetic-diffusion
    coefficients; R is the gas constant and cV the specific heat.  The derived
    ratio a = R / (cV + R) lies in (0, 1).  delta is the admissibility margin:
    states must keep theta >= delta and delta <= q <= P - delta.
    """

    mu: float = 1.0
    kappa: float = 1.0
    nu: float = 1.0
    R: float = 1.0
    cV: float = 1.0
    delta: float = 0.05
    a: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("mu", "kappa", "nu", "R", "cV", "delta"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0.0:
                raise PositivityError(f"parameter {name} must be positive, got {val}")
        object.__setattr__(self, "a", self.R / (self.cV + self.R))


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on T x [0, eta_max] with fixed time step.

    nx nodes in xi (periodic, spacing 2*pi/nx, no duplicated endpoint) and
    neta nodes in eta including both boundaries (spacing eta_max/(neta-1)).
    Time levels are k*dt for k = 0..nsteps with nsteps = round(t_end/dt).
    """

    nx: int
    neta: int
    eta_max: float
    dt: float
    t_end: float

    def __post_init__(self) -> None:
        if self.nx < 4:
            raise GridSizingError(f"nx must be >= 4, got {self.nx}")
        if self.neta < 8:
            raise GridSizingError(f"neta must be >= 8, got {self.neta}")
        if self.eta_max <= 0.0:
            raise GridSizingError(f"eta_max must be positive, got {self.eta_max}")
        if self.dt <= 0.0:
            raise GridSizingError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise GridSizingError(
                f"t_end must be at least one step: t_end={self.t_end}, dt={self.dt}"
            )

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.nx

    @property
    def deta(self) -> float:
        return self.eta_max / (self.neta - 1)

    @property
    def nsteps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def xi(self) -> FloatArray:
        return np.arange(self.nx) * self.dxi

    @property
    def eta(self) -> FloatArray:
        return np.arange(self.neta) * self.deta

    @property
    def times(self) -> FloatArray:
        return np.arange(self.nsteps + 1) * self.dt

    def eta_weights(self) -> FloatArray:
        """Trapezoid quadrature weights in eta (the xi weight is just dxi)."""
        w = np.full(self.neta, self.deta)
        w[0] = 0.5 * self.deta
        w[-1] = 0.5 * self.deta
        return w


def make_grid(nx: int, neta: int, eta_max: float, dt: float, t_end: float) -> Grid:
    """Validate sizes and build a Grid; rejects degenerate requests."""
    return Grid(nx=int(nx), neta=int(neta), eta_max=float(eta_max),
                dt=float(dt), t_end=float(t_end))


TraceFn = Callable[[float, FloatArray], Union[float, FloatArray]]


@dataclass(frozen=True)
class OutflowSpec:
    """Recipe for the far-field traces U, Theta, H, total pressure P and the
    wall temperature theta_star, each a function of (t, xi).

    mode "constant" carries five numbers; mode "functions" carries callables
    f(t, xi_array) -> array, periodic in xi.  Optional analytic derivatives
    P_t, P_xi override the finite-difference sampling of the pressure
    gradient terms.
    """

    mode: str
    U: Union[float, TraceFn]
    Theta: Union[float, TraceFn]
    Hfield: Union[float, TraceFn]
    P: Union[float, TraceFn]
    theta_star: Union[float, TraceFn]
    P_t: Optional[TraceFn] = None
    P_xi: Optional[TraceFn] = None

    def __post_init__(self) -> None:
        if self.mode not in ("constant", "functions"):
            raise PositivityError(f"unknown outflow mode {self.mode!r}")

    @staticmethod
    def constant(U: float = 0.0, Theta: float = 1.0, Hfield: float = 1.0,
                 P: float = 1.0, theta_star: float = 1.0) -> "OutflowSpec":
        return OutflowSpec("constant", float(U), float(Theta), float(Hfield),
                           float(P), float(theta_star))


@dataclass(frozen=True)
class OutflowData:
    """Outflow traces sampled on the (time level, xi node) grid.

    All arrays have shape (nsteps+1, nx).  Theta, Hfield, P and theta_star are
    strictly positive everywhere sampled.  P_t and P_xi hold the pressure
    derivatives used by the zero-order coefficients.
    """

    U: FloatArray
    Theta: FloatArray
    Hfield: FloatArray
    P: FloatArray
    theta_star: FloatArray
    P_t: FloatArray
    P_xi: FloatArray
    times: FloatArray
    xi: FloatArray

    def __post_init__(self) -> None:
        for name in ("U", "Theta", "Hfield", "P", "theta_star", "P_t", "P_xi",
                     "times", "xi"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        shape = self.U.shape
        for name in ("Theta", "Hfield", "P", "theta_star", "P_t", "P_xi"):
            if getattr(self, name).shape != shape:
                raise PositivityError(f"outflow field {name} has shape "
                                      f"{getattr(self, name).shape}, expected {shape}")
        for name in ("Theta", "Hfield", "P", "theta_star"):
            arr = getattr(self, name)
            if not np.all(arr > 0.0):
                raise PositivityError(f"outflow trace {name} must be positive "
                                      f"everywhere; min = {arr.min()}")

    def time_index(self, t: float) -> int:
        """Index of the sampled time level matching t (must be on the grid)."""
        dt = self.times[1] - self.times[0] if self.times.size > 1 else 1.0
        k = int(round(t / dt))
        if k < 0 or k >= self.times.size or abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise MissingTimeLevelError(
                f"time {t} is not a sampled level (have [{self.times[0]}.."
                f"{self.times[-1]}], step {dt})")
        return k

    def vinf(self, k: int) -> FloatArray:
        """Far-field state (U, Theta, H^2/2) at time level k, shape (nx, 3)."""
        return np.stack([self.U[k], self.Theta[k], 0.5 * self.Hfield[k] ** 2], axis=-1)


def _sample_trace(fn: Union[float, TraceFn], times: FloatArray,
                  xi: FloatArray) -> FloatArray:
    out = np.empty((times.size, xi.size))
    if callable(fn):
        for k, t in enumerate(times):
            out[k] = np.broadcast_to(np.asarray(fn(float(t), xi), dtype=float),
                                     xi.shape)
    else:
        out[:] = float(fn)
    return out


def _ddt_sampled(f: FloatArray, dt: float) -> FloatArray:
    """Time derivative of a sampled trace: centered interior, one-sided
    second-order ends; falls back to first order with only two levels."""
    n = f.shape[0]
    out = np.empty_like(f)
    if n == 1:
        out[:] = 0.0
        return out
    if n == 2:
        out[0] = out[1] = (f[1] - f[0]) / dt
        return out
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dt)
    return out


def _ddxi_periodic(f: FloatArray, dxi: float) -> FloatArray:
    """Centered periodic derivative along the last axis."""
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * dxi)


def sample_outflow(spec: OutflowSpec, grid: Grid) -> OutflowData:
    """Sample the outflow recipe on the space-time grid.

    The pressure derivatives P_t, P_xi come from the analytic callables when
    the spec provides them, otherwise from finite differences of the sampled
    P (centered periodic in xi; centered in t with one-sided ends).  Constant
    mode therefore yields exactly zero derivatives.
    """
    times, xi = grid.times, grid.xi
    U = _sample_trace(spec.U, times, xi)
    Theta = _sample_trace(spec.Theta, times, xi)
    Hfield = _sample_trace(spec.Hfield, times, xi)
    P = _sample_trace(spec.P, times, xi)
    theta_star = _sample_trace(spec.theta_star, times, xi)
    if spec.P_t is not None:
        P_t = _sample_trace(spec.P_t, times, xi)
    elif spec.mode == "constant":
        P_t = np.zeros_like(P)
    else:
        P_t = _ddt_sampled(P, grid.dt)
    if spec.P_xi is not None:
        P_xi = _sample_trace(spec.P_xi, times, xi)
    elif spec.mode == "constant":
        P_xi = np.zeros_like(P)
    else:
        P_xi = _ddxi_periodic(P, grid.dxi)
    return OutflowData(U=U, Theta=Theta, Hfield=Hfield, P=P,
                       theta_star=theta_star, P_t=P_t, P_xi=P_xi,
                       times=times, xi=xi)


@dataclass(frozen=True)
class State:
    """Transformed state v = (u1, theta, q) on the (xi, eta) grid at one time.

    Arrays have shape (nx, neta), eta index fastest in memory.
    """

    u1: FloatArray
    theta: FloatArray
    q: FloatArray
    time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("u1", "theta", "q"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.u1.shape == self.theta.shape == self.q.shape):
            raise GridSizingError("state components must share one shape")
        if self.u1.ndim != 2:
            raise GridSizingError("state components must be 2-d (nx, neta)")

    @property
    def shape(self) -> tuple:
        return self.u1.shape

    def as_array(self) -> FloatArray:
        """Stack components into (nx, neta, 3)."""
        return np.stack([self.u1, self.theta, self.q], axis=-1)

    @staticmethod
    def from_array(v: FloatArray, time: float = 0.0) -> "State":
        return State(u1=v[..., 0], theta=v[..., 1], q=v[..., 2], time=time)

    @staticmethod
    def constant(grid: Grid, u1: float, theta: float, q: float,
                 time: float = 0.0) -> "State":
        shape = (grid.nx, grid.neta)
        return State(u1=np.full(shape, float(u1)),
                     theta=np.full(shape, float(theta)),
                     q=np.full(shape, float(q)), time=time)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Result of checking theta >= delta, delta <= q <= P - delta.

    min_Q reports the minimum of Q = P + (1 - 2a) q, which stays positive on
    admissible states.  first_violation is the (xi index, eta index) of the
    first failing node in row-major order, or None.
    """

    ok: bool
    min_theta: float
    min_q: float
    min_P_minus_q: float
    min_Q: float
    first_violation: Optional[tuple] = None


def validate_admissibility(v: State, outflow: OutflowData,
                           params: Params) -> AdmissibilityReport:
    """Check the admissible-set inequalities for one state.

    P is taken at the outflow time level matching v.time and broadcast over
    eta.  The report carries the minima actually attained so callers can see
    the margin, not just a flag.
    """
    k = outflow.time_index(v.time)
    P = outflow.P[k][:, None]
    d = params.delta
    P_minus_q = P - v.q
    Q = P + (1.0 - 2.0 * params.a) * v.q
    bad = (v.theta < d) | (v.q < d) | (P_minus_q < d)
    ok = not bool(bad.any())
    first = None
    if not ok:
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        first = (int(idx[0]), int(idx[1]))
    return AdmissibilityReport(
        ok=ok,
        min_theta=float(v.theta.min()),
        min_q=float(v.q.min()),
        min_P_minus_q=float(P_minus_q.min()),
        min_Q=float(Q.min()),
        first_violation=first,
    )
