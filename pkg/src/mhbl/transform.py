"""Coordinate change between physical (x, y) and stream-function (xi, eta)
variables, and residual checks of the original boundary-layer system.

The stream function psi solves d_y psi = h1 with psi = 0 on the wall, so
eta = psi(t, x, y) is a valid normal coordinate as long as h1 >= delta > 0.
At t = 0 the map is eta(x, y) = integral_0^y h10(x, s) ds.  Going back, the
physical height of a level set is y = integral_0^eta d eta' / h1_hat, and
the hatted fields pull back by composition with psi.  The normal velocity
and magnetic components are recovered from psi rather than evolved:

    u2 = -(d_t psi + u1 d_x psi - nu d_y^2 psi) / h1,     h2 = -d_x psi,

where d_t psi and d_x psi use the closed-form integrals of d_t h1_hat /
h1_hat^2 and d_xi h1_hat / h1_hat^2, and d_y^2 psi = (h1_hat d_eta h1_hat)
evaluated at psi.  The stored h1 is the discrete d_y of the reconstructed
psi and h2 the discrete -d_x, with the same stencils used by the residual
checks, so the divergence d_x h1 + d_y h2 vanishes to rounding by
construction.  The density follows from the total-pressure constraint:
rho = (2 P - h1^2) / (2 R theta).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import GridSizingError, MissingTimeLevelError, NondegeneracyError
from .fields import FloatArray, Grid, OutflowData, Params, State, _frozen
from .stepper import apply_derivative


@dataclass(frozen=True)
class StreamField:
    """The stream function tabulated on the physical grid: psi[i, j] =
    psi(t, x_i, y_j), strictly increasing in y."""

    psi: FloatArray
    y_nodes: FloatArray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "psi", _frozen(self.psi))
        object.__setattr__(self, "y_nodes", _frozen(self.y_nodes))
        if self.psi.ndim != 2 or self.psi.shape[1] != self.y_nodes.size:
            raise GridSizingError("psi must be (nx, ny) matching y_nodes")


@dataclass(frozen=True)
class PhysicalState:
    """Physical fields on the (x, y) grid at one time.

    rho and theta are positive and h1 >= delta on states produced by the
    pullback of admissible solver output; u2 and h2 are derived from the
    stream function, not evolved.
    """

    rho: FloatArray
    u1: FloatArray
    u2: FloatArray
    theta: FloatArray
    h1: FloatArray
    h2: FloatArray
    y_nodes: FloatArray
    time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rho", "u1", "u2", "theta", "h1", "h2", "y_nodes"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def _dydx_ops(dx: float, y_nodes: FloatArray):
    """Return (d_x, d_y, d_y^2) operators matching apply_derivative's stencils
    on a uniform y grid; h1, h2 and the residual checks share these."""
    dy = y_nodes[1] - y_nodes[0]

    def ddx(f: FloatArray) -> FloatArray:
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * dx)

    def ddy(f: FloatArray) -> FloatArray:
        out = np.empty_like(f)
        out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * dy)
        out[:, 0] = (-3.0 * f[:, 0] + 4.0 * f[:, 1] - f[:, 2]) / (2.0 * dy)
        out[:, -1] = (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / (2.0 * dy)
        return out

    def ddy2(f: FloatArray) -> FloatArray:
        out = np.empty_like(f)
        out[:, 1:-1] = (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / dy ** 2
        out[:, 0] = (2.0 * f[:, 0] - 5.0 * f[:, 1] + 4.0 * f[:, 2] - f[:, 3]) / dy ** 2
        out[:, -1] = (2.0 * f[:, -1] - 5.0 * f[:, -2] + 4.0 * f[:, -3] - f[:, -4]) / dy ** 2
        return out

    return ddx, ddy, ddy2


def _check_uniform(y_nodes: FloatArray) -> None:
    dy = np.diff(y_nodes)
    if y_nodes.size < 4 or dy.size == 0:
        raise GridSizingError("y grid needs at least 4 nodes")
    if abs(y_nodes[0]) > 1e-14 * max(1.0, abs(y_nodes[-1])):
        raise GridSizingError("y grid must start at the wall y = 0")
    if np.max(np.abs(dy - dy[0])) > 1e-9 * dy[0]:
        raise GridSizingError("y grid must be uniform")


def initial_eta_map(u10: FloatArray, theta0: FloatArray, h10: FloatArray,
                    y_nodes: FloatArray, grid: Grid,
                    delta: float) -> Tuple[State, FloatArray]:
    """Transform initial physical profiles to the (xi, eta) grid.

    eta(x, y) = cumulative trapezoid of h10 in y, strictly increasing since
    h10 >= delta is required.  The hatted fields are the physical profiles
    reinterpolated at the uniform eta nodes (monotone piecewise-linear
    inversion); beyond eta(x, y_max) they extend with the last value.
    Returns the initial transformed state (with q = h1^2/2) and the eta
    table of shape (nx, ny).
    """
    u10, theta0, h10 = (np.asarray(a, dtype=float) for a in (u10, theta0, h10))
    y_nodes = np.asarray(y_nodes, dtype=float)
    _check_uniform(y_nodes)
    if h10.min() < delta:
        raise NondegeneracyError(
            f"initial h1 must stay >= delta = {delta}; min = {h10.min():.6g}")
    if u10.shape != (grid.nx, y_nodes.size) or h10.shape != u10.shape \
            or theta0.shape != u10.shape:
        raise GridSizingError("initial fields must have shape (nx, ny)")
    eta_table = cumulative_trapezoid(h10, y_nodes, axis=1, initial=0.0)
    eta_nodes = grid.eta
    u1_hat = np.empty((grid.nx, grid.neta))
    theta_hat = np.empty_like(u1_hat)
    h1_hat = np.empty_like(u1_hat)
    for i in range(grid.nx):
        u1_hat[i] = np.interp(eta_nodes, eta_table[i], u10[i])
        theta_hat[i] = np.interp(eta_nodes, eta_table[i], theta0[i])
        h1_hat[i] = np.interp(eta_nodes, eta_table[i], h10[i])
    v0 = State(u1=u1_hat, theta=theta_hat, q=0.5 * h1_hat ** 2, time=0.0)
    return v0, eta_table


def stream_from_h1(h1_hat: FloatArray, grid: Grid, y_nodes: FloatArray,
                   delta: float, time: float = 0.0) -> StreamField:
    """Reconstruct psi on the physical grid from the hatted field h1(t, xi, eta).

    The level height y(eta) = cumulative trapezoid of 1/h1_hat is strictly
    increasing, so psi(y) is its inverse; psi vanishes at the wall and values
    of y beyond y(eta_max) clamp to eta_max.  The inverse table is fitted
    with a cubic spline, whose smooth fourth-order error keeps the discrete
    derivatives of psi (h1, h2) at full second order; rows where the spline
    overshoots monotonicity (possible for rough h1_hat) fall back to the
    shape-preserving pchip inverse.  Both fits reproduce linear tables
    exactly, so constant h1_hat rows round-trip to rounding.
    """
    h1_hat = np.asarray(h1_hat, dtype=float)
    y_nodes = np.asarray(y_nodes, dtype=float)
    _check_uniform(y_nodes)
    if h1_hat.shape != (grid.nx, grid.neta):
        raise GridSizingError("h1_hat must have shape (nx, neta)")
    if h1_hat.min() < delta:
        raise NondegeneracyError(
            f"h1 must stay >= delta = {delta}; min = {h1_hat.min():.6g}")
    y_of_eta = cumulative_trapezoid(1.0 / h1_hat, grid.eta, axis=1, initial=0.0)
    psi = np.empty((grid.nx, y_nodes.size))
    eta_nodes = grid.eta
    for i in range(grid.nx):
        inv = CubicSpline(y_of_eta[i], eta_nodes, bc_type="not-a-knot",
                          extrapolate=False)
        row = inv(y_nodes)
        np.copyto(row, grid.eta_max, where=np.isnan(row))  # beyond y(eta_max)
        if np.any(np.diff(row) < 0.0):
            inv = PchipInterpolator(y_of_eta[i], eta_nodes, extrapolate=False)
            row = inv(y_nodes)
            np.copyto(row, grid.eta_max, where=np.isnan(row))
        psi[i] = row
    return StreamField(psi=psi, y_nodes=y_nodes, time=time)


def _interp_at_psi(field_hat: FloatArray, eta_nodes: FloatArray,
                   psi: FloatArray) -> FloatArray:
    out = np.empty_like(psi)
    for i in range(psi.shape[0]):
        out[i] = np.interp(psi[i], eta_nodes, field_hat[i])
    return out


def pullback_physical(v_hat: State, outflow: OutflowData, params: Params,
                      grid: Grid, y_nodes: FloatArray,
                      v_hat_prev: Optional[State] = None) -> PhysicalState:
    """Recover the physical fields from one transformed state.

    v_hat_prev must be the state at an adjacent time level; the time
    derivative of h1_hat uses the difference quotient between the two levels
    (pass the level above for t = 0, the level below otherwise).  For
    genuinely steady data, pass a state with the same fields at a different
    time.  Raises MissingTimeLevelError when absent.
    """
    if v_hat_prev is None:
        raise MissingTimeLevelError(
            "pullback needs an adjacent time level for d_t h1; pass v_hat_prev")
    dt_pair = v_hat.time - v_hat_prev.time
    if abs(dt_pair) < 1e-300:
        raise MissingTimeLevelError("adjacent level must differ in time")
    y_nodes = np.asarray(y_nodes, dtype=float)
    h1_hat = np.sqrt(2.0 * v_hat.q)
    h1_prev = np.sqrt(2.0 * v_hat_prev.q)
    sf = stream_from_h1(h1_hat, grid, y_nodes, params.delta, time=v_hat.time)
    psi = np.asarray(sf.psi)
    eta_nodes = grid.eta

    u1 = _interp_at_psi(v_hat.u1, eta_nodes, psi)
    theta = _interp_at_psi(v_hat.theta, eta_nodes, psi)

    ddx, ddy, _ = _dydx_ops(grid.dxi, y_nodes)
    h1 = ddy(psi)
    h2 = -ddx(psi)

    k = outflow.time_index(v_hat.time)
    P = outflow.P[k][:, None]
    rho = (2.0 * P - h1 ** 2) / (2.0 * params.R * theta)

    # closed-form stream-function derivatives, evaluated on the eta grid and
    # composed with psi
    dth1 = (h1_hat - h1_prev) / dt_pair
    I_t = cumulative_trapezoid(dth1 / h1_hat ** 2, eta_nodes, axis=1, initial=0.0)
    dxh1 = apply_derivative(h1_hat, grid, axis="xi", order=1)
    I_x = cumulative_trapezoid(dxh1 / h1_hat ** 2, eta_nodes, axis=1, initial=0.0)
    h1_at_psi = _interp_at_psi(h1_hat, eta_nodes, psi)
    dt_psi = h1_at_psi * _interp_at_psi(I_t, eta_nodes, psi)
    dx_psi = h1_at_psi * _interp_at_psi(I_x, eta_nodes, psi)
    deta_h1 = apply_derivative(h1_hat, grid, axis="eta", order=1)
    dyy_psi = _interp_at_psi(h1_hat * deta_h1, eta_nodes, psi)

    u2 = -(dt_psi + u1 * dx_psi - params.nu * dyy_psi) / h1_at_psi
    return PhysicalState(rho=rho, u1=u1, u2=u2, theta=theta, h1=h1, h2=h2,
                         y_nodes=y_nodes, time=v_hat.time)


def check_physical_constraints(ps: PhysicalState, outflow: OutflowData,
                               params: Params) -> Tuple[float, float]:
    """Max-norm residuals of the two built-in constraints on a physical state:
    divergence d_x h1 + d_y h2 and total pressure R rho theta + h1^2/2 - P."""
    ddx, ddy, _ = _dydx_ops(2.0 * np.pi / ps.h1.shape[0], ps.y_nodes)
    div = ddx(ps.h1) + ddy(ps.h2)
    k = outflow.time_index(ps.time)
    P = outflow.P[k][:, None]
    press = params.R * ps.rho * ps.theta + 0.5 * ps.h1 ** 2 - P
    return float(np.max(np.abs(div))), float(np.max(np.abs(press)))


def residual_original(states: Sequence[PhysicalState], outflow: OutflowData,
                      params: Params) -> "PhysicalResidualReport":
    """Discrete residuals of the original system on three consecutive states.

    states must be (t - dt, t, t + dt); all derivatives are second order
    (centered in t and x, one-sided at the y ends) and the residuals are
    evaluated at the middle time on interior y rows.  Returns max and L2
    norms for the five evolution/constraint equations:

      0: tangential momentum      1: temperature      2: tangential field
      3: velocity divergence      4: magnetic divergence
    """
    if len(states) != 3:
        raise MissingTimeLevelError("residual_original needs three states")
    sm, s0, sp = states
    dt1 = s0.time - sm.time
    dt2 = sp.time - s0.time
    if abs(dt1 - dt2) > 1e-9 * max(dt1, dt2, 1e-30) or dt1 <= 0:
        raise MissingTimeLevelError("states must be equispaced in time")
    y = np.asarray(s0.y_nodes)
    nx, ny = s0.u1.shape
    dx = 2.0 * np.pi / nx
    ddx, ddy, ddy2 = _dydx_ops(dx, y)

    def ddt(name: str) -> FloatArray:
        return (getattr(sp, name) - getattr(sm, name)) / (2.0 * dt1)

    u1, u2, th, h1, h2 = s0.u1, s0.u2, s0.theta, s0.h1, s0.h2
    k = outflow.time_index(s0.time)
    P = outflow.P[k][:, None]
    P_t = outflow.P_t[k][:, None]
    P_x = outflow.P_xi[k][:, None]
    a, R = params.a, params.R
    mu, kappa, nu = params.mu, params.kappa, params.nu

    q = 0.5 * h1 ** 2
    Pmq = P - q
    Q = P + (1.0 - 2.0 * a) * q
    mat_u = u1 * ddx(u1) + u2 * ddy(u1)
    mat_th = u1 * ddx(th) + u2 * ddy(th)
    mat_h = u1 * ddx(h1) + u2 * ddy(h1)
    tang_h = h1 * ddx(h1) + h2 * ddy(h1)
    tang_u = h1 * ddx(u1) + h2 * ddy(u1)
    mat_P = P_t + P_x * u1
    dissip = kappa * ddy2(th) + mu * ddy(u1) ** 2 + nu * ddy(h1) ** 2

    r = np.empty((5, nx, ny))
    r[0] = (ddt("u1") + mat_u - R * th / Pmq * tang_h + R * P_x * th / Pmq
            - mu * R * th / Pmq * ddy2(u1))
    r[1] = (ddt("theta") + mat_th + a * th * h1 / Q * tang_u
            - a * mat_P * th / Q
            - a * th * (P + q) / (Q * Pmq) * dissip
            + a * nu * th * h1 / Q * ddy2(h1))
    r[2] = (ddt("h1") + mat_h - Pmq / Q * tang_u
            - (1.0 - a) * mat_P * h1 / Q
            - nu * Pmq / Q * ddy2(h1)
            + a * h1 / Q * dissip)
    r[3] = (ddx(u1) + ddy(u2)
            - (1.0 - a) * h1 / Q * (tang_u + nu * ddy2(h1))
            + (1.0 - a) * mat_P / Q
            - a / Q * dissip)
    r[4] = ddx(h1) + ddy(h2)

    inner = r[:, :, 1:-1]
    dy = y[1] - y[0]
    max_norm = np.max(np.abs(inner), axis=(1, 2))
    l2_norm = np.sqrt(np.sum(inner ** 2, axis=(1, 2)) * dx * dy)
    return PhysicalResidualReport(max_norm=max_norm, l2_norm=l2_norm,
                                  time=s0.time)


@dataclass(frozen=True)
class PhysicalResidualReport:
    """Residual norms of the original system's five equations at one time."""

    max_norm: FloatArray
    l2_norm: FloatArray
    time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "max_norm", _frozen(self.max_norm))
        object.__setattr__(self, "l2_norm", _frozen(self.l2_norm))
