"""Coordinate transform, pullback and physical-side residuals.

Closed-form oracles:
  * h10 = 1 + y gives eta(y) = y + y^2/2 exactly (trapezoid is exact on
    linear integrands),
  * h1_hat = 1 + eta gives psi(y) = e^y - 1,
  * constant h10 = H makes the whole round trip exact when the eta and y
    grids have the same node count,
  * the divergence and pressure constraints vanish identically on any
    pullback output by construction.
"""

import numpy as np
import pytest

from mhbl import (
    GridSizingError,
    MissingTimeLevelError,
    NondegeneracyError,
    OutflowSpec,
    Params,
    State,
    make_grid,
    sample_outflow,
)
from mhbl.transform import (
    PhysicalState,
    check_physical_constraints,
    initial_eta_map,
    pullback_physical,
    residual_original,
    stream_from_h1,
)

PARAMS = Params(mu=1.0, kappa=1.0, nu=1.0, R=1.0, cV=1.0, delta=0.05)


# ---------------------------------------------------------------------------
# forward map

def test_eta_table_exact_for_linear_h1():
    # eta(y) = integral of (1 + s) ds = y + y^2/2, node-exact under trapezoid
    y = np.linspace(0.0, 2.0, 41)
    nx = 4
    grid = make_grid(nx, 16, 4.0, 0.1, 0.5)
    h10 = np.broadcast_to(1.0 + y, (nx, y.size)).copy()
    u10 = np.zeros_like(h10)
    th0 = np.ones_like(h10)
    v0, eta_table = initial_eta_map(u10, th0, h10, y, grid, delta=0.05)
    np.testing.assert_allclose(
        eta_table, np.broadcast_to(y + 0.5 * y ** 2, h10.shape),
        rtol=0, atol=1e-14)
    assert v0.time == 0.0
    # q = h1^2/2 and h1 is sampled off the same table
    np.testing.assert_allclose(v0.q, 0.5 * (2.0 * v0.q) , atol=0)  # tautology guard
    assert v0.q.min() >= 0.5 * 1.0 ** 2 - 1e-12


def test_initial_map_exact_for_constant_h1():
    # h10 = 2: eta = 2y; with neta = ny the node images coincide and the
    # hatted fields are exact samples u10(eta/2)
    y = np.linspace(0.0, 3.0, 25)
    nx = 6
    grid = make_grid(nx, 25, 6.0, 0.1, 0.5)
    x = 2.0 * np.pi * np.arange(nx) / nx
    u10 = np.sin(x)[:, None] * (y * np.exp(-y))[None, :]
    th0 = 1.0 + 0.1 * (y ** 2 / (1 + y ** 2))[None, :] * np.ones((nx, 1))
    h10 = np.full((nx, y.size), 2.0)
    v0, eta_table = initial_eta_map(u10, th0, h10, y, grid, delta=0.05)
    np.testing.assert_allclose(eta_table, np.broadcast_to(2.0 * y, (nx, y.size)),
                               atol=1e-14)
    np.testing.assert_allclose(v0.u1, u10, rtol=0, atol=1e-13)
    np.testing.assert_allclose(v0.theta, th0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(v0.q, 2.0, rtol=0, atol=1e-13)


def test_initial_map_rejects_degenerate_h1():
    y = np.linspace(0.0, 2.0, 21)
    grid = make_grid(4, 16, 4.0, 0.1, 0.5)
    h10 = np.full((4, 21), 0.01)   # below delta
    z = np.zeros_like(h10)
    with pytest.raises(NondegeneracyError):
        initial_eta_map(z, 1.0 + z, h10, y, grid, delta=0.05)


def test_initial_map_validates_grid():
    grid = make_grid(4, 16, 4.0, 0.1, 0.5)
    y_bad = np.array([0.0, 0.1, 0.3, 0.35, 0.6])   # non-uniform
    z = np.zeros((4, 5))
    with pytest.raises(GridSizingError):
        initial_eta_map(z, 1.0 + z, 1.0 + z, y_bad, grid, delta=0.05)
    y_off = np.linspace(1.0, 2.0, 5)               # does not start at the wall
    with pytest.raises(GridSizingError):
        initial_eta_map(z, 1.0 + z, 1.0 + z, y_off, grid, delta=0.05)
    y = np.linspace(0.0, 2.0, 9)
    with pytest.raises(GridSizingError):
        initial_eta_map(np.zeros((4, 5)), np.ones((4, 5)), np.ones((4, 5)),
                        y, grid, delta=0.05)       # shape mismatch


# ---------------------------------------------------------------------------
# stream function

def test_stream_function_exponential_oracle():
    # d_y psi = 1 + psi with psi(0) = 0 has the solution psi = e^y - 1
    errs = []
    for neta, ny in ((129, 81), (257, 161)):
        grid = make_grid(4, neta, 8.0, 0.1, 0.5)
        h1_hat = np.broadcast_to(1.0 + grid.eta, (4, neta)).copy()
        y = np.linspace(0.0, 2.0, ny)
        sf = stream_from_h1(h1_hat, grid, y, delta=0.05)
        errs.append(np.max(np.abs(sf.psi - (np.exp(y) - 1.0)[None, :])))
    assert errs[0] < 3e-3
    assert errs[0] / errs[1] > 3.0       # second-order drop under refinement


def test_stream_function_constant_h1_exact_and_monotone():
    grid = make_grid(4, 33, 6.0, 0.1, 0.5)
    h1_hat = np.full((4, 33), 2.0)
    y = np.linspace(0.0, 3.0, 33)
    sf = stream_from_h1(h1_hat, grid, y, delta=0.05)
    np.testing.assert_allclose(sf.psi, np.broadcast_to(2.0 * y, (4, 33)),
                               rtol=0, atol=1e-13)
    assert np.all(np.diff(sf.psi, axis=1) >= 0.0)
    assert np.max(np.abs(sf.psi[:, 0])) == 0.0   # wall value pinned


def test_stream_function_monotone_for_rough_h1():
    # a strongly alternating (but admissible) h1 makes the plain spline
    # inverse overshoot; the shape-preserving fallback must keep psi monotone
    from scipy.integrate import cumulative_trapezoid
    from scipy.interpolate import CubicSpline

    grid = make_grid(4, 17, 8.0, 0.01, 0.02)
    h1row = np.where(np.sin(3.0 * grid.eta) > 0, 10.0, 0.06)
    h1_hat = np.broadcast_to(h1row, (4, 17)).copy()
    table = cumulative_trapezoid(1.0 / h1row, grid.eta, initial=0.0)
    y = np.linspace(0.0, table[-1], 60)
    raw = CubicSpline(table, grid.eta, bc_type="not-a-knot")(y)
    assert np.min(np.diff(raw)) < 0.0            # the trigger is real

    sf = stream_from_h1(h1_hat, grid, y, delta=0.05)
    assert np.all(np.diff(sf.psi, axis=1) >= 0.0)
    assert np.max(np.abs(sf.psi[:, 0])) == 0.0
    assert np.max(sf.psi) <= grid.eta_max + 1e-12


def test_stream_function_rejects_degenerate_h1():
    grid = make_grid(4, 16, 4.0, 0.1, 0.5)
    y = np.linspace(0.0, 2.0, 9)
    with pytest.raises(NondegeneracyError):
        stream_from_h1(np.full((4, 16), 1e-4), grid, y, delta=0.05)
    with pytest.raises(GridSizingError):
        stream_from_h1(np.ones((4, 7)), grid, y, delta=0.05)


# ---------------------------------------------------------------------------
# pullback

def outflow_on(grid, P=1.5, **kw):
    return sample_outflow(OutflowSpec.constant(P=P, **kw), grid)


def test_pullback_requires_adjacent_level():
    grid = make_grid(4, 16, 4.0, 0.1, 0.5)
    data = outflow_on(grid)
    y = np.linspace(0.0, 2.0, 17)
    v = State.constant(grid, 0.0, 1.0, 0.5)
    with pytest.raises(MissingTimeLevelError):
        pullback_physical(v, data, PARAMS, grid, y)
    with pytest.raises(MissingTimeLevelError):
        pullback_physical(v, data, PARAMS, grid, y, v_hat_prev=v)  # same time


def test_pullback_constant_state_is_exact():
    # H = 1: psi = y, h1 = 1, h2 = 0, rho = (2P - 1)/(2 R Theta), u2 = 0
    grid = make_grid(8, 33, 6.0, 0.01, 0.05)
    data = outflow_on(grid, P=1.0, U=0.0, Theta=1.0, Hfield=1.0, theta_star=1.0)
    y = np.linspace(0.0, 4.0, 33)
    v = State.constant(grid, 0.0, 1.0, 0.5, time=0.0)
    v_next = State.constant(grid, 0.0, 1.0, 0.5, time=grid.dt)
    ps = pullback_physical(v, data, PARAMS, grid, y, v_hat_prev=v_next)
    np.testing.assert_allclose(ps.h1, 1.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(ps.h2, 0.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(ps.u1, 0.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(ps.u2, 0.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(ps.theta, 1.0, rtol=0, atol=1e-13)
    # rho from the pressure constraint: (2 - 1) / 2 = 1/2
    np.testing.assert_allclose(ps.rho, 0.5, rtol=0, atol=1e-13)
    div, press = check_physical_constraints(ps, data, PARAMS)
    assert div <= 1e-13 and press <= 1e-13


def test_pullback_constraints_hold_for_generic_state():
    # the divergence and pressure identities are structural: they hold to
    # rounding for any admissible input, not just constants
    grid = make_grid(16, 48, 6.0, 0.01, 0.05)
    data = outflow_on(grid, P=1.5)
    y = np.linspace(0.0, 4.0, 49)
    xi = grid.xi[:, None]
    eta = grid.eta[None, :]
    u1 = 0.2 * np.sin(xi) * eta * np.exp(-eta)
    th = 1.0 + 0.1 * np.cos(xi) * np.exp(-eta)
    q = 0.5 + 0.1 * np.sin(xi) * np.exp(-(eta - 1.0) ** 2)
    v = State(u1=u1, theta=th, q=q, time=grid.dt)
    v_prev = State(u1=u1, theta=th, q=q * 1.01, time=0.0)
    ps = pullback_physical(v, data, PARAMS, grid, y, v_hat_prev=v_prev)
    assert ps.rho.min() > 0.0
    div, press = check_physical_constraints(ps, data, PARAMS)
    assert div <= 1e-12
    assert press <= 1e-12


def test_round_trip_second_order_for_tanh_profile():
    # physical -> hatted -> psi -> physical, L_inf error drops ~4x per halving
    def run(ny):
        y = np.linspace(0.0, 6.0, ny)
        nx = 8
        h10_1d = 1.0 + 0.5 * np.tanh(y)
        eta_top = np.trapezoid(h10_1d, y)
        grid = make_grid(nx, ny, eta_top, 0.01, 0.02)
        x = grid.xi
        u10 = 0.3 * np.sin(x)[:, None] * (y * np.exp(-y))[None, :]
        th0 = 1.0 + 0.2 * (np.exp(-y))[None, :] * np.ones((nx, 1))
        h10 = np.broadcast_to(h10_1d, (nx, ny)).copy()
        data = outflow_on(grid, P=4.0)
        v0, _ = initial_eta_map(u10, th0, h10, y, grid, delta=0.05)
        v0 = State(u1=v0.u1, theta=v0.theta, q=v0.q, time=0.0)
        v_next = State(u1=v0.u1, theta=v0.theta, q=v0.q, time=grid.dt)
        ps = pullback_physical(v0, data, PARAMS, grid, y, v_hat_prev=v_next)
        return max(np.max(np.abs(ps.u1 - u10)),
                   np.max(np.abs(ps.theta - th0)),
                   np.max(np.abs(ps.h1 - h10)))

    e1, e2 = run(65), run(129)
    assert e1 / e2 > 3.0
    assert e2 < 5e-3


# ---------------------------------------------------------------------------
# residuals of the original equations

def constant_physical(grid, y, t, u1=0.3, theta=1.0, h1=1.0, P=1.5):
    shape = (grid.nx, y.size)
    rho = (2.0 * P - h1 ** 2) / (2.0 * PARAMS.R * theta)
    return PhysicalState(rho=np.full(shape, rho), u1=np.full(shape, u1),
                         u2=np.zeros(shape), theta=np.full(shape, theta),
                         h1=np.full(shape, h1), h2=np.zeros(shape),
                         y_nodes=y, time=t)


def test_residual_original_vanishes_on_constants():
    grid = make_grid(8, 16, 4.0, 0.01, 0.05)
    data = outflow_on(grid, P=1.5)
    y = np.linspace(0.0, 3.0, 25)
    states = [constant_physical(grid, y, k * grid.dt) for k in range(3)]
    rep = residual_original(states, data, PARAMS)
    assert rep.time == pytest.approx(grid.dt)
    assert np.all(rep.max_norm <= 1e-12)
    assert np.all(rep.l2_norm <= 1e-12)
    assert rep.max_norm.shape == (5,)


def test_residual_original_validates_time_levels():
    grid = make_grid(8, 16, 4.0, 0.01, 0.05)
    data = outflow_on(grid)
    y = np.linspace(0.0, 3.0, 25)
    s = [constant_physical(grid, y, t) for t in (0.0, grid.dt, 3 * grid.dt)]
    with pytest.raises(MissingTimeLevelError):
        residual_original(s, data, PARAMS)          # not equispaced
    with pytest.raises(MissingTimeLevelError):
        residual_original(s[:2], data, PARAMS)      # needs three states


def test_residual_original_flags_wrong_field():
    # breaking the magnetic divergence must show up in the r[4] channel
    grid = make_grid(8, 16, 4.0, 0.01, 0.05)
    data = outflow_on(grid, P=2.0)
    y = np.linspace(0.0, 3.0, 25)
    states = []
    for k in range(3):
        base = constant_physical(grid, y, k * grid.dt, P=2.0)
        h2 = 0.1 * y[None, :] * np.ones((grid.nx, 1))   # d_y h2 = 0.1 != 0
        states.append(PhysicalState(rho=base.rho, u1=base.u1, u2=base.u2,
                                    theta=base.theta, h1=base.h1, h2=h2,
                                    y_nodes=y, time=base.time))
    rep = residual_original(states, data, PARAMS)
    assert rep.max_norm[4] == pytest.approx(0.1, rel=1e-10)
