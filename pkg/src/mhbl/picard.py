"""Frozen-coefficient (Picard) iteration for the nonlinear system.

Each iterate solves the linear problem with coefficients frozen at the
previous iterate; the zeroth iterate is a background profile corrected by a
short Taylor expansion in time so that its initial value and initial time
derivatives match the data.  On a short enough time interval the iteration
contracts with factor <= 1/2 in the trajectory norm, and every iterate stays
in the admissible set theta >= delta, delta <= q <= P - delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import coeffs
from .diagnostics import NormSpec, discrete_norm
from .errors import GridSizingError, PreconditionError
from .fields import FloatArray, Grid, OutflowData, Params, State, _frozen
from .stepper import Trajectory, apply_bcs, apply_derivative, solve_linear_problem


def cutoff_phi(eta) -> FloatArray:
    """Monotone C^2 cutoff: 0 for eta <= 1, 1 for eta >= 2, quintic smoothstep
    6 s^5 - 15 s^4 + 10 s^3 (s = eta - 1) in between.  Rejects negative eta."""
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr < 0.0):
        raise ValueError("cutoff is defined for eta >= 0 only")
    s = np.clip(eta_arr - 1.0, 0.0, 1.0)
    out = s ** 3 * (10.0 + s * (-15.0 + 6.0 * s))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Background:
    """Background trajectory vbar interpolating wall and outflow data:

        vbar = (phi U, phi Theta + (1 - phi) theta_star, H^2 / 2),

    sampled at every grid time level; vbar has shape (nsteps+1, nx, neta, 3).
    """

    vbar: FloatArray
    phi: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vbar", _frozen(self.vbar))
        object.__setattr__(self, "phi", _frozen(self.phi))


def build_background(outflow: OutflowData, grid: Grid) -> Background:
    phi = np.asarray(cutoff_phi(grid.eta))
    nt = grid.nsteps
    vbar = np.empty((nt + 1, grid.nx, grid.neta, 3))
    for k in range(nt + 1):
        vbar[k, :, :, 0] = outflow.U[k][:, None] * phi[None, :]
        vbar[k, :, :, 1] = (outflow.Theta[k][:, None] * phi[None, :]
                            + outflow.theta_star[k][:, None] * (1.0 - phi[None, :]))
        vbar[k, :, :, 2] = 0.5 * outflow.Hfield[k][:, None] ** 2
    return Background(vbar=vbar, phi=phi)


@dataclass(frozen=True)
class CompatibilitySet:
    """Initial time derivatives v0_j = d_tau^j v(0) for j = 0..order.

    v0_list[j] has shape (nx, neta, 3); entry 0 is the initial data itself
    and entry 1, when present, is read off the equation at t = 0.
    """

    v0_list: List[FloatArray]

    @property
    def order(self) -> int:
        return len(self.v0_list) - 1


def compatibility_derivatives(v0: State, outflow: OutflowData, params: Params,
                              grid: Grid, order: int = 1) -> CompatibilitySet:
    """Compute v0_j for j <= order (only orders 0 and 1 are supported).

    The first derivative comes from the equation itself,

        v0_1 = -A(v0) d_xi v0 - f(v0, d_eta v0) - g(v0) + B(v0) d_eta^2 v0,

    with the discrete operators of the stepper.  The wall and far rows are
    overwritten with the time derivatives of the boundary data (zero for u1,
    d_tau theta_star for theta, the Neumann closure for q, and d_tau of the
    outflow state at the far edge), which is what the continuous
    compatibility conditions prescribe there.
    """
    if order not in (0, 1):
        raise GridSizingError(f"compatibility order must be 0 or 1, got {order}")
    arr = v0.as_array()
    out = [arr]
    if order == 1:
        P = outflow.P[0][:, None]
        P_t = outflow.P_t[0][:, None]
        P_xi = outflow.P_xi[0][:, None]
        dxv = apply_derivative(arr, grid, axis="xi", order=1)
        dev = apply_derivative(arr, grid, axis="eta", order=1)
        d2ev = apply_derivative(arr, grid, axis="eta", order=2)
        A = coeffs.eval_advection(arr, P, params)
        B = coeffs.eval_diffusion(arr, P, params)
        f, _, g, _ = coeffs.eval_lower_order(arr, dev, P, P_t, P_xi, params)
        v1 = (-np.einsum("xeij,xej->xei", A, dxv) - f - g
              + np.einsum("xeij,xej->xei", B, d2ev))
        # boundary rows follow the data, not the interior stencils
        dth_star = _ddt0(outflow.theta_star, grid.dt)
        v1[:, 0, 0] = 0.0
        v1[:, 0, 1] = dth_star
        v1[:, 0, 2] = (4.0 * v1[:, 1, 2] - v1[:, 2, 2]) / 3.0
        v1[:, -1, 0] = _ddt0(outflow.U, grid.dt)
        v1[:, -1, 1] = _ddt0(outflow.Theta, grid.dt)
        v1[:, -1, 2] = _ddt0(0.5 * outflow.Hfield ** 2, grid.dt)
        out.append(v1)
    return CompatibilitySet(v0_list=out)


def _ddt0(trace: FloatArray, dt: float) -> FloatArray:
    """One-sided time derivative of a sampled (nt+1, nx) trace at t = 0."""
    if trace.shape[0] >= 3:
        return (-3.0 * trace[0] + 4.0 * trace[1] - trace[2]) / (2.0 * dt)
    if trace.shape[0] == 2:
        return (trace[1] - trace[0]) / dt
    return np.zeros_like(trace[0])


def build_zeroth_approx(background: Background, compat: CompatibilitySet,
                        grid: Grid) -> Trajectory:
    """Zeroth Picard iterate: the background plus the Taylor correction

        v0(tau) = vbar(tau) + sum_j tau^j / j! (v0_j - d_tau^j vbar(0)),

    so that d_tau^j v0(0) = v0_j for j <= order while the far-field behavior
    of vbar is kept.  d_tau vbar(0) is a one-sided difference of the sampled
    background.
    """
    nt = grid.nsteps
    vbar = background.vbar
    data = np.array(vbar)
    dvbar0 = [vbar[0]]
    if compat.order >= 1:
        if nt >= 2:
            dvbar0.append((-3.0 * vbar[0] + 4.0 * vbar[1] - vbar[2]) / (2.0 * grid.dt))
        else:
            dvbar0.append((vbar[1] - vbar[0]) / grid.dt)
    for k in range(nt + 1):
        tau = grid.times[k]
        for j in range(compat.order + 1):
            data[k] += tau ** j / math.factorial(j) * (compat.v0_list[j] - dvbar0[j])
    return Trajectory(data=data, times=grid.times.copy())


@dataclass(frozen=True)
class IterationReport:
    """Convergence record of one Picard run.

    distances[n] is the trajectory distance sup_k || v^{n+1} - v^n ||_L2
    after iterate n+1; ratios are successive quotients.  admissible[n] flags
    iterate n (entry 0 is the zeroth approximation).  norm_history tracks
    sup_k || v^n - vbar ||_{H^k} for the report's norm order.
    """

    converged: bool
    iterations: int
    distances: List[float]
    ratios: List[float]
    admissible: List[bool]
    norm_history: List[float]
    aborted: bool = False
    message: str = ""


def _traj_admissible(traj: Trajectory, outflow: OutflowData,
                     params: Params) -> bool:
    d = params.delta
    theta = traj.data[..., 1]
    q = traj.data[..., 2]
    P = outflow.P[:, :, None]
    return bool((theta >= d).all() and (q >= d).all() and ((P - q) >= d).all())


def _traj_distance(a: Trajectory, b: Trajectory, grid: Grid) -> float:
    w = grid.eta_weights()
    diff2 = (a.data - b.data) ** 2
    per_level = np.sqrt(np.sum(diff2 * w[None, None, :, None], axis=(1, 2, 3))
                        * grid.dxi)
    return float(np.max(per_level))


def _traj_norm(traj: Trajectory, background: Background, grid: Grid,
               k: int) -> float:
    spec = NormSpec(k=k)
    best = 0.0
    for lvl in range(traj.nlevels):
        w = traj.data[lvl] - background.vbar[lvl]
        total = 0.0
        for c in range(3):
            total += discrete_norm(w[..., c], spec, grid) ** 2
        best = max(best, math.sqrt(total))
    return best


def picard_solve(v0: State, outflow: OutflowData, params: Params, grid: Grid,
                 tol: float = 1e-8, max_iter: int = 30,
                 compat_order: int = 1,
                 on_admissibility_loss: str = "abort",
                 source: Optional[FloatArray] = None,
                 norm_order: int = 1):
    """Run the frozen-coefficient iteration to tolerance.

    Preconditions: v0 admissible with margin 2*delta (theta >= 2 delta,
    2 delta <= q <= P - 2 delta at t = 0).  Iterates solve the linear
    problem against the previous trajectory; the loop stops when the
    trajectory distance drops to tol or max_iter is hit.  Admissibility of
    every iterate is recorded; losing it either aborts with a report
    (default) or, with on_admissibility_loss="continue", clamps coefficient
    evaluations and keeps going with the iterate flagged.

    Returns (trajectory, IterationReport).
    """
    if on_admissibility_loss not in ("abort", "continue"):
        raise GridSizingError(
            f"on_admissibility_loss must be 'abort' or 'continue', "
            f"got {on_admissibility_loss!r}")
    d = params.delta
    P0 = outflow.P[0][:, None]
    margin_bad = (v0.theta.min() < 2.0 * d or v0.q.min() < 2.0 * d
                  or (P0 - v0.q).min() < 2.0 * d)
    if margin_bad:
        raise PreconditionError(
            "initial data must satisfy theta >= 2 delta and "
            f"2 delta <= q <= P - 2 delta (delta = {d}); got min theta = "
            f"{v0.theta.min():.6g}, min q = {v0.q.min():.6g}, "
            f"min (P - q) = {float((P0 - v0.q).min()):.6g}")

    background = build_background(outflow, grid)
    compat = compatibility_derivatives(v0, outflow, params, grid,
                                       order=compat_order)
    prev = build_zeroth_approx(background, compat, grid)

    admissible = [_traj_admissible(prev, outflow, params)]
    distances: List[float] = []
    ratios: List[float] = []
    norms: List[float] = [_traj_norm(prev, background, grid, norm_order)]
    clamp = False
    if not admissible[0]:
        if on_admissibility_loss == "abort":
            return prev, IterationReport(
                converged=False, iterations=0, distances=[], ratios=[],
                admissible=admissible, norm_history=norms, aborted=True,
                message="zeroth approximation left the admissible set; "
                        "shorten t_end or fix the data")
        clamp = True

    traj = prev
    converged = False
    message = ""
    n_done = 0
    for n in range(1, max_iter + 1):
        traj = solve_linear_problem(prev, v0, outflow, params, grid,
                                    source=source, clamp=clamp)
        n_done = n
        distances.append(_traj_distance(traj, prev, grid))
        if len(distances) >= 2 and distances[-2] > 0.0:
            ratios.append(distances[-1] / distances[-2])
        ok = _traj_admissible(traj, outflow, params)
        admissible.append(ok)
        norms.append(_traj_norm(traj, background, grid, norm_order))
        if not ok:
            if on_admissibility_loss == "abort":
                return traj, IterationReport(
                    converged=False, iterations=n, distances=distances,
                    ratios=ratios, admissible=admissible, norm_history=norms,
                    aborted=True,
                    message=f"iterate {n} left the admissible set")
            clamp = True
        if distances[-1] <= tol:
            converged = True
            break
        prev = traj
    if not converged:
        message = (f"no convergence after {n_done} iterations; "
                   f"last distance {distances[-1]:.3e} > tol {tol:g}")
    return traj, IterationReport(
        converged=converged, iterations=n_done, distances=distances,
        ratios=ratios, admissible=admissible, norm_history=norms,
        aborted=False, message=message)
