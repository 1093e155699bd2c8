"""Coefficient matrices: frozen hand values, algebraic identities, guards.

The closed forms of S, S A, S B and S F are coded independently of A, B, F,
so multiplying and comparing is a real cross-check of the algebra, not a
tautology.
"""

import numpy as np
import pytest

from mhbl import DegenerateStateError, Params
from mhbl.coeffs import (
    advection_radius,
    eval_advection,
    eval_diffusion,
    eval_lower_order,
    eval_symmetrizer,
)

# reference point used throughout: v = (0, 1, 1/2), P = 1, all physical
# constants 1, so a = 1/2, P - q = 1/2, Q = 1.
V0 = np.array([0.0, 1.0, 0.5])
P0 = 1.0
PARAMS1 = Params(mu=1.0, kappa=1.0, nu=1.0, R=1.0, cV=1.0, delta=0.05)


# ---------------------------------------------------------------------------
# frozen hand values

def test_advection_matrix_hand_value():
    A = eval_advection(V0, P0, PARAMS1)
    expected = np.array([
        [0.0, 0.0, -2.0],
        [0.5, 0.0, 0.0],
        [-0.5, 0.0, 0.0],
    ])
    np.testing.assert_allclose(A, expected, rtol=0, atol=1e-15)


def test_advection_eigenvalues_hand_value():
    # eigenvalues u1 and u1 +- sqrt(2 R theta q / Q) = 0, +-1 at V0
    lam = np.sort(np.linalg.eigvals(eval_advection(V0, P0, PARAMS1)).real)
    np.testing.assert_allclose(lam, [-1.0, 0.0, 1.0], atol=1e-14)
    assert advection_radius(V0, P0, PARAMS1) == pytest.approx(1.0, abs=1e-15)


def test_diffusion_matrix_hand_value():
    B = eval_diffusion(V0, P0, PARAMS1)
    expected = np.array([
        [2.0, 0.0, 0.0],
        [0.0, 1.5, -0.5],
        [0.0, -0.5, 0.5],
    ])
    np.testing.assert_allclose(B, expected, rtol=0, atol=1e-15)


def test_symmetrizer_hand_value():
    S, _, SB, _ = eval_symmetrizer(V0, np.zeros(3), P0, PARAMS1)
    expected = np.array([
        [0.5, 0.0, 0.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, 3.0],   # theta^2 (P + q) / (2 q (P - q)) = 1.5 / 0.5
    ])
    np.testing.assert_allclose(S, expected, rtol=0, atol=1e-15)
    # S B collapses to the diagonal dissipation weights (all ones here)
    np.testing.assert_allclose(SB, np.eye(3), rtol=0, atol=1e-15)


def test_symmetrizer_product_oracle_at_reference_point():
    # multiply the independently coded factors and compare entry by entry
    dv = np.array([0.3, -0.2, 0.1])
    A = eval_advection(V0, P0, PARAMS1)
    B = eval_diffusion(V0, P0, PARAMS1)
    f, F, g, G = eval_lower_order(V0, dv, P0, 0.0, 0.0, PARAMS1)
    S, SA, SB, SF = eval_symmetrizer(V0, dv, P0, PARAMS1)
    np.testing.assert_allclose(S @ A, SA, atol=1e-14)
    np.testing.assert_allclose(S @ B, SB, atol=1e-14)
    np.testing.assert_allclose(S @ F, SF, atol=1e-14)
    np.testing.assert_allclose(F @ dv, f, atol=1e-14)
    np.testing.assert_allclose(G @ V0, g, atol=1e-14)


# ---------------------------------------------------------------------------
# randomized identity suite

def random_admissible(rng, n, delta=0.05):
    """Random states, pressures, gradients and parameters on the admissible set."""
    P = rng.uniform(0.5, 5.0, size=n)
    theta = rng.uniform(delta, 5.0, size=n)
    q = rng.uniform(delta, P - delta)
    u1 = rng.uniform(-2.0, 2.0, size=n)
    v = np.stack([u1, theta, q], axis=-1)
    dv = rng.normal(size=(n, 3))
    P_t = rng.normal(size=n)
    P_xi = rng.normal(size=n)
    params = Params(mu=rng.uniform(0.1, 10.0), kappa=rng.uniform(0.1, 10.0),
                    nu=rng.uniform(0.1, 10.0), R=rng.uniform(0.1, 10.0),
                    cV=rng.uniform(0.1, 10.0), delta=delta)
    return v, dv, P, P_t, P_xi, params


def rel_err(got, want):
    scale = max(np.max(np.abs(want)), 1.0)
    return np.max(np.abs(got - want)) / scale


def test_identity_suite_random_samples():
    rng = np.random.default_rng(2024)
    for _ in range(8):   # 8 parameter draws x 250 states = 2000 samples
        v, dv, P, P_t, P_xi, params = random_admissible(rng, 250)
        A = eval_advection(v, P, params)
        B = eval_diffusion(v, P, params)
        f, F, g, G = eval_lower_order(v, dv, P, P_t, P_xi, params)
        S, SA, SB, SF = eval_symmetrizer(v, dv, P, params)

        assert rel_err(S, np.swapaxes(S, -1, -2)) == 0.0
        np.linalg.cholesky(S)   # positive definite on the admissible set
        SAm = S @ A
        assert rel_err(SAm, np.swapaxes(SAm, -1, -2)) < 1e-12
        assert rel_err(SAm, SA) < 1e-12
        assert rel_err(S @ B, SB) < 1e-12
        # SB is the diagonal dissipation form
        theta, q = v[..., 1], v[..., 2]
        want = np.zeros_like(SB)
        want[..., 0, 0] = 2.0 * params.mu * theta ** 2 * q
        want[..., 1, 1] = 2.0 * params.kappa * theta * q
        want[..., 2, 2] = params.nu * theta ** 2
        assert rel_err(SB, want) < 1e-12
        assert rel_err(S @ F, SF) < 1e-12
        assert rel_err(np.einsum("nij,nj->ni", F, dv), f) < 1e-12
        assert rel_err(np.einsum("nij,nj->ni", G, v), g) < 1e-12


def test_advection_radius_matches_eigenvalue_oracle():
    rng = np.random.default_rng(11)
    v, dv, P, P_t, P_xi, params = random_admissible(rng, 300)
    A = eval_advection(v, P, params)
    lam = np.max(np.abs(np.linalg.eigvals(A)), axis=-1)
    closed = advection_radius(v, P, params)
    np.testing.assert_allclose(closed, lam, rtol=1e-12, atol=1e-12)


def test_broadcasting_over_grids():
    # (nx, neta) states against an (nx, 1) pressure row
    rng = np.random.default_rng(3)
    v = np.stack([rng.uniform(-1, 1, (4, 6)),
                  rng.uniform(0.5, 1.5, (4, 6)),
                  rng.uniform(0.2, 0.4, (4, 6))], axis=-1)
    P = rng.uniform(1.0, 2.0, (4, 1))
    A = eval_advection(v, P, PARAMS1)
    assert A.shape == (4, 6, 3, 3)
    for i in range(4):
        for j in range(6):
            np.testing.assert_allclose(
                A[i, j], eval_advection(v[i, j], P[i, 0], PARAMS1), atol=1e-15)


# ---------------------------------------------------------------------------
# degeneracy guards

@pytest.mark.parametrize("v,P", [
    (np.array([0.0, 0.0, 0.5]), 1.0),     # theta at zero
    (np.array([0.0, 1.0, 0.0]), 1.0),     # q at zero
    (np.array([0.0, 1.0, 1.0]), 1.0),     # P - q at zero
])
def test_degenerate_states_raise(v, P):
    with pytest.raises(DegenerateStateError):
        eval_advection(v, P, PARAMS1)
    with pytest.raises(DegenerateStateError):
        eval_diffusion(v, P, PARAMS1)
    with pytest.raises(DegenerateStateError):
        eval_lower_order(v, np.zeros(3), P, 0.0, 0.0, PARAMS1)
    with pytest.raises(DegenerateStateError):
        eval_symmetrizer(v, np.zeros(3), P, PARAMS1)


def test_degenerate_Q_raises():
    # a > 1/2 makes Q = P + (1 - 2a) q vanish when q = P / (2a - 1)
    params = Params(mu=1, kappa=1, nu=1, R=3.0, cV=1.0)   # a = 0.75
    v = np.array([0.0, 1.0, 2.0])
    with pytest.raises(DegenerateStateError):
        eval_advection(v, 2.0 + 1e-15, params)


def test_bad_state_shape_raises():
    with pytest.raises(DegenerateStateError):
        eval_advection(np.zeros(4), 1.0, PARAMS1)
