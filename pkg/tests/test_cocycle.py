import math

import numpy as np
import pytest

from blockloc import ConfigError, bernoulli_anderson, difference_model, sample_realization
from blockloc.cocycle import (
    angle_rate,
    check_c1_monotonicity,
    lyapunov_estimate,
    lyapunov_sweep,
    opnorm,
    perturbation_bound_check,
    product,
    product_with_derivative,
    step_inverse,
    step_matrix,
    window_norm_sup,
)


def _direct_product(v, E):
    T = np.eye(2)
    for vj in v:
        T = np.array([[E - vj, -1.0], [1.0, 0.0]]) @ T
    return T


# ---------------------------------------------------------------------------
# single steps


def test_step_matrix_entries():
    assert np.array_equal(step_matrix(0.0, 0.0), np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert np.array_equal(step_matrix(1.0, 3.0), np.array([[2.0, -1.0], [1.0, 0.0]]))


def test_step_matrix_unimodular_and_inverse():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v, E = rng.normal(size=2)
        M = step_matrix(v, E)
        assert abs(np.linalg.det(M) - 1.0) < 1e-14
        assert np.allclose(M @ step_inverse(v, E), np.eye(2), atol=1e-14)


def test_step_matrix_rejects_nonfinite():
    with pytest.raises(ConfigError):
        step_matrix(float("nan"), 0.0)


def test_opnorm_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(100):
        M = rng.normal(size=(2, 2))
        assert abs(opnorm(M) - np.linalg.norm(M, 2)) < 1e-12
    C = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    assert abs(opnorm(C) - np.linalg.norm(C, 2)) < 1e-12


# ---------------------------------------------------------------------------
# renormalized products


def test_product_empty_word_is_identity():
    p = product(np.array([]), E=1.5)
    assert np.allclose(p.full_matrix(), np.eye(2), atol=1e-15)
    assert p.steps == 0
    assert abs(p.log_operator_norm) < 1e-12


def test_product_zero_potential_rotation_power():
    # step at v = 0, E = 0 is a quarter turn; its 4th power is the identity
    p = product(np.zeros(4), E=0.0)
    assert np.allclose(p.full_matrix(), np.eye(2), atol=1e-12)


def test_product_matches_direct_for_short_words():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = rng.integers(1, 51)
        v = rng.normal(size=n)
        E = rng.normal()
        exact = _direct_product(v, E)
        p = product(v, E)
        assert np.allclose(p.full_matrix(), exact,
                           rtol=1e-8, atol=1e-8 * opnorm(exact))


def test_product_constant_energy_three():
    # exact oracle: ||A^100|| for the constant matrix A = [[3, -1], [1, 0]]
    A = np.array([[3.0, -1.0], [1.0, 0.0]])
    exact = np.linalg.matrix_power(A, 100)
    p = product(np.zeros(100), E=3.0)
    assert abs(p.log_operator_norm - math.log(np.linalg.norm(exact, 2))) < 1e-8
    # growth rate approaches log of the spectral radius (3 + sqrt 5)/2
    p2 = product(np.zeros(1000), E=3.0)
    assert abs(p2.log_operator_norm / 1000 - math.log((3 + math.sqrt(5)) / 2)) < 1e-3


def test_det_preserved_absolute_form():
    # hyperbolic growth: det(unit) must match exp(-2 log_norm) absolutely
    # (the rescaled form cancels below machine precision once log_norm > ~8)
    rng = np.random.default_rng(3)
    v = rng.normal(size=2000)
    p = product(v, E=0.7)
    det_unit = float(np.linalg.det(p.matrix))
    assert abs(det_unit - math.exp(-2.0 * p.log_norm)) < 1e-12


def test_rescaled_det_is_one_in_bounded_regime():
    # elliptic word: norms stay O(1) for 10^5 steps, so the rescaled
    # determinant is float-meaningful and must be 1
    p = product(np.zeros(100000), E=0.5)
    assert abs(p.rescaled_det - 1.0) < 1e-9


def test_cocycle_identity_split_products():
    rng = np.random.default_rng(4)
    v = rng.normal(size=1000)
    E = 0.3
    whole = product(v, E)
    for j in (1, 137, 500, 999):
        left = product(v[:j], E)
        right = product(v[j:], E)
        M = right.matrix @ left.matrix
        s = math.sqrt(float(np.sum(M * M)))
        combined_log = right.log_norm + left.log_norm + math.log(s)
        assert abs(combined_log - whole.log_norm) < 1e-8
        assert np.allclose(M / s, whole.matrix, atol=1e-8) or \
            np.allclose(M / s, -whole.matrix, atol=1e-8)


def test_backward_is_inverse_of_forward():
    rng = np.random.default_rng(5)
    v = rng.normal(size=200)
    E = -0.4
    fwd = product(v, E)
    bwd = product(v, E, direction="backward")
    assert abs(fwd.log_norm - bwd.log_norm) < 1e-8  # ||T|| = ||T^-1|| for det 1
    # unit-scaled inverse of the forward product is its adjugate (2x2, det 1,
    # and the adjugate preserves the Frobenius norm exactly)
    adj = np.array([[fwd.matrix[1, 1], -fwd.matrix[0, 1]],
                    [-fwd.matrix[1, 0], fwd.matrix[0, 0]]])
    assert np.allclose(bwd.matrix, adj, atol=1e-8) or \
        np.allclose(bwd.matrix, -adj, atol=1e-8)


def test_log_operator_norm_nonnegative():
    rng = np.random.default_rng(6)
    for _ in range(20):
        v = rng.normal(size=rng.integers(1, 300))
        p = product(v, rng.normal())
        assert p.log_operator_norm >= -1e-12


# ---------------------------------------------------------------------------
# energy derivative


def test_derivative_single_step():
    _, comp = product_with_derivative(np.array([0.7]), E=0.1)
    prod, _ = product_with_derivative(np.array([0.7]), E=0.1)
    scale = math.exp(prod.log_norm)
    assert np.allclose(scale * comp.matrix, np.array([[1.0, 0.0], [0.0, 0.0]]),
                       atol=1e-12)


def test_derivative_two_steps_hand_computed():
    # T_2(E) = step(E)^2 at v = 0: [[E^2-1, -E], [E, -1]], dT_2 = [[2E, -1], [1, 0]]
    prod, comp = product_with_derivative(np.zeros(2), E=0.0)
    scale = math.exp(prod.log_norm)
    assert np.allclose(scale * comp.matrix, np.array([[0.0, -1.0], [1.0, 0.0]]),
                       atol=1e-12)


def test_derivative_matches_central_differences():
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(100):
        n = rng.integers(2, 40)
        v = rng.normal(size=n)
        E = rng.normal()
        prod, comp = product_with_derivative(v, E)
        dT = math.exp(prod.log_norm) * comp.matrix
        fd = (_direct_product(v, E + h) - _direct_product(v, E - h)) / (2 * h)
        assert np.allclose(dT, fd, rtol=1e-6, atol=1e-6 * max(1.0, opnorm(fd)))


def test_derivative_ratio_test_second_order():
    # central-difference error shrinks by >= 3.5x when h halves
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = rng.integers(2, 20)
        v = rng.normal(size=n)
        E = rng.normal()
        prod, comp = product_with_derivative(v, E)
        dT = math.exp(prod.log_norm) * comp.matrix

        def err(h):
            fd = (_direct_product(v, E + h) - _direct_product(v, E - h)) / (2 * h)
            return opnorm(fd - dT)

        e1, e2 = err(1e-3), err(5e-4)
        if e1 > 1e-9 * opnorm(dT):  # skip cancellation-dominated cases
            assert e1 / e2 >= 3.5


def test_derivative_phase_identity():
    # <(Tv)^perp, dT v> = -sum of squared first components of the partial orbit
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = rng.integers(1, 30)
        v = rng.normal(size=n)
        E = rng.normal()
        w = rng.normal(size=2)
        prod, comp = product_with_derivative(v, E)
        scale = math.exp(prod.log_norm)
        Tv = scale * prod.matrix @ w
        dTv = scale * comp.matrix @ w
        lhs = Tv[0] * dTv[1] - Tv[1] * dTv[0]
        cur = w.copy()
        acc = 0.0
        for vj in v:
            acc += cur[0] ** 2
            cur = step_matrix(float(vj), E) @ cur
        assert abs(lhs + acc) < 1e-7 * max(1.0, acc)


# ---------------------------------------------------------------------------
# Lyapunov estimation


def test_lyapunov_zero_potential_inside_spectrum():
    model = bernoulli_anderson(0.0)
    est = lyapunov_estimate(model, E=0.0, n=4000, realizations=3, seed=1)
    assert abs(est.mean) < 1e-3


def test_lyapunov_zero_potential_outside_spectrum():
    model = bernoulli_anderson(0.0)
    est = lyapunov_estimate(model, E=3.0, n=1000, realizations=2, seed=1)
    assert abs(est.mean - math.log((3 + math.sqrt(5)) / 2)) < 1e-3


def test_lyapunov_bulk_matches_scalar_path():
    # the vectorized sweep must agree with a direct product over the same xi
    model = difference_model()
    est = lyapunov_estimate(model, E=0.5, n=200, realizations=4, seed=3)
    from blockloc.rng import derive_key
    from blockloc.model import potential_chunk
    logs = []
    for r in range(4):
        key = derive_key(3, 0x117A9, 0, r)
        v = potential_chunk(model, key, 1, 200)
        logs.append(product(v, 0.5).log_operator_norm / 200)
    assert abs(est.mean - np.mean(logs)) < 1e-10


def test_lyapunov_sweep_deterministic_and_worker_independent():
    model = difference_model()
    grid = np.linspace(-1, 1, 5)
    a = lyapunov_sweep(model, grid, n=300, realizations=5, seed=9, workers=1)
    b = lyapunov_sweep(model, grid, n=300, realizations=5, seed=9, workers=4)
    for x, y in zip(a, b):
        assert x.mean == y.mean and x.stderr == y.stderr and x.energy == y.energy


def test_lyapunov_guards():
    with pytest.raises(ConfigError):
        lyapunov_estimate(difference_model(), 0.0, n=0, realizations=1, seed=1)


# ---------------------------------------------------------------------------
# smoothness / monotonicity report


def test_single_step_angle_rates():
    # the one-step block has one stationary direction (0, 1); clockwise rates
    # are nonnegative for every tested energy and direction
    for E in (-2.0, -0.5, 0.0, 1.0, 3.0):
        prod, comp = product_with_derivative(np.zeros(1), E)
        dirs = np.vstack([np.cos(np.linspace(0, np.pi, 33)),
                          np.sin(np.linspace(0, np.pi, 33))])
        rates = angle_rate(prod.matrix, comp.matrix, dirs)
        assert np.all(rates >= -1e-12)
        vertical = angle_rate(prod.matrix, comp.matrix,
                              np.array([[0.0], [1.0]]))
        assert abs(vertical[0]) < 1e-12


def test_multi_step_blocks_strictly_monotone():
    report = check_c1_monotonicity(difference_model(), J=(-0.5, 0.5),
                                   samples=8, seed=12)
    assert report.delta_hat > 0.0
    assert math.isfinite(report.m_hat) and report.m_hat > 1.0
    assert report.block_length == 20


def test_m_hat_grows_with_interval():
    small = check_c1_monotonicity(difference_model(), J=(-0.5, 0.5),
                                  samples=4, seed=13)
    large = check_c1_monotonicity(difference_model(), J=(-3.0, 3.0),
                                  samples=4, seed=13)
    assert large.m_hat >= small.m_hat


def test_empty_block_rejected():
    with pytest.raises(ConfigError):
        check_c1_monotonicity(difference_model(), J=(0.0, 1.0), samples=1,
                              seed=1, block_length=0)


# ---------------------------------------------------------------------------
# perturbation bound


def test_window_sup_contains_all_plain_windows():
    model = bernoulli_anderson(1.0)
    real = sample_realization(model, 21, (-12, 12))
    log_K, _, _ = window_norm_sup(real, E=0.3, N=10)
    for n in range(-10, 11):
        v = [real.v_at(j) for j in (range(1, n + 1) if n >= 0 else [])]
        if n >= 0:
            direct = product(np.array(v), 0.3)
        else:
            vneg = [real.v_at(j) for j in range(n + 1, 1)]
            direct = _direct_product(vneg, 0.3)
            direct = np.linalg.inv(direct)
            assert math.log(opnorm(direct)) <= log_K + 1e-9
            continue
        assert direct.log_operator_norm <= log_K + 1e-9


def test_perturbation_delta_zero():
    model = bernoulli_anderson(1.0)
    real = sample_realization(model, 30, (-12, 12))
    rep = perturbation_bound_check(real, E=0.5, N=10, delta=0.0)
    assert rep.holds
    assert rep.lhs <= rep.K_N * (1 + 1e-9)


def test_perturbation_small_real_delta():
    model = bernoulli_anderson(0.0)
    real = sample_realization(model, 31, (-12, 12))
    rep = perturbation_bound_check(real, E=0.0, N=10, delta=0.1)
    assert rep.holds and rep.rhs >= rep.lhs


def test_perturbation_complex_delta():
    model = difference_model()
    real = sample_realization(model, 32, (-110, 110))
    rep = perturbation_bound_check(real, E=0.0, N=100, delta=0.01 + 0.01j)
    assert rep.holds
