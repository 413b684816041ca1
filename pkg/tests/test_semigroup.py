import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from attrforge.metric import FinitePointSet
from attrforge.semigroup import (
    BlowUpError,
    find_absorbing_ball,
    finite_difference_jacobian,
    flow_sample,
    get_threads,
    iterate,
    jacobian,
    omega_limit_sample,
    set_threads,
    step,
    surviving_probes,
)
from attrforge.systems import make_system


@pytest.fixture
def threads():
    before = get_threads()
    yield set_threads
    set_threads(before)


def test_rk4_linear_decay_matches_amplification_factor():
    sys = make_system("linear_decay")
    h = 0.01
    factor = (1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24) ** 100
    x = step(sys, np.array([[1.0]]), 1.0).points[0, 0]
    assert x == pytest.approx(factor, rel=1e-13)
    assert x == pytest.approx(math.exp(-1), rel=1e-9)


def test_lorenz_against_adaptive_reference():
    sys = make_system("lorenz63_timeT")
    x0 = np.array([1.0, 2.0, 20.0])
    ref = solve_ivp(
        lambda t, u: [10 * (u[1] - u[0]), u[0] * (28 - u[2]) - u[1], u[0] * u[1] - 8 / 3 * u[2]],
        (0, 0.5), x0, rtol=1e-12, atol=1e-12,
    ).y[:, -1]
    coarse = step(sys, x0[None], 0.5).points[0]
    fine = step(make_system("lorenz63_timeT", step=0.001), x0[None], 0.5).points[0]
    assert np.max(np.abs(coarse - ref)) < 1e-3
    # fourth order: ten times smaller steps cut the error by far more than 1000
    assert np.max(np.abs(fine - ref)) < 1e-3 * np.max(np.abs(coarse - ref))


def test_semigroup_law_is_bit_exact_on_step_multiples():
    sys = make_system("lorenz63_timeT")
    X = np.random.default_rng(0).uniform(-5, 5, (10, 3))
    once = step(sys, X, 0.2).points
    twice = step(sys, step(sys, X, 0.1), 0.1).points
    assert np.array_equal(once, twice)


def test_flow_rejects_off_grid_times():
    sys = make_system("linear_decay")
    with pytest.raises(ValueError):
        step(sys, np.zeros((1, 1)), 0.005)
    with pytest.raises(ValueError):
        step(sys, np.zeros((1, 1)), -1.0)


def test_discrete_map_needs_integer_time():
    with pytest.raises(ValueError):
        step(make_system("henon"), np.zeros((1, 2)), 0.5)


def test_iterate_and_dimension_check():
    sys = make_system("affine_contraction")
    imgs = iterate(sys, np.array([[1.0]]), 1, 3)
    assert [g.points[0, 0] for g in imgs] == [1.0, 0.5, 0.25, 0.125]
    with pytest.raises(ValueError):
        step(sys, np.zeros((1, 2)), 1)


def test_flow_sample_matches_step():
    sys = make_system("linear_decay")
    x = np.array([0.7])
    frames = flow_sample(sys, x, [0.0, 0.3, 1.0])
    assert frames[0][0] == 0.7
    assert np.array_equal(frames[1], step(sys, x[None], 0.3).points[0])


def test_blow_up_reports_offending_point():
    sys = make_system("henon")
    X = np.array([[0.0, 0.0], [10.0, 10.0]])
    with pytest.raises(BlowUpError) as err:
        for _ in range(20):
            X = step(sys, X, 1).points
    assert err.value.index == 1
    keep = surviving_probes(sys, FinitePointSet(np.array([[0.0, 0.0], [10.0, 10.0]])), 1, 20)
    assert keep.tolist() == [0]


@pytest.mark.parametrize("n", [1, 4])
def test_thread_count_does_not_change_results(threads, n):
    sys = make_system("chafee_infante_galerkin", n_modes=8)
    X = np.random.default_rng(1).uniform(-2, 2, (37, 8))
    threads(1)
    ref = step(sys, X, 0.5).points
    threads(n)
    assert np.array_equal(step(sys, X, 0.5).points, ref)


def test_absorbing_ball_for_contraction():
    sys = make_system("affine_contraction", c=1.0)
    probes = np.linspace(-1, 1, 21)[:, None]
    est = find_absorbing_ball(sys, probes, 60)
    # fixed point is 2; the centroid candidate sits on it
    assert abs(est.center[0] - 2.0) < 1e-9
    assert est.radius < 1e-6
    assert est.positively_invariant_checked


def test_absorbing_ball_origin_radius_on_grid():
    sys = make_system("diag_linear")
    est = find_absorbing_ball(sys, np.random.default_rng(0).uniform(-1, 1, (30, 2)), 200)
    assert est.center == (0.0, 0.0)
    j = 4 * math.log2(est.radius)
    assert j == pytest.approx(round(j))


def test_absorbing_ball_fails_for_escaping_orbits():
    sys = make_system("linear_map", matrix=[[1.05]])
    with pytest.raises(RuntimeError, match="no absorbing ball found"):
        find_absorbing_ball(sys, np.array([[1.0], [-1.0]]), 50)


def test_absorbing_ball_spec_examples():
    sys = make_system("affine_contraction", c=1.0)
    est = find_absorbing_ball(sys, np.array([[-10.0], [10.0]]), 60)
    assert abs(est.center[0] - 2.0) < 1e-6 and est.radius <= 1 and est.entry_time <= 40
    est = find_absorbing_ball(make_system("affine_contraction"), np.array([[1.0]]), 10)
    assert est.center == (0.0,)
    # smallest grid value 2^(j/4) holding 2^-5, the tail of {2^-k : k >= 5}
    assert est.radius == 2.0**-5


def test_henon_absorbing_ball_from_wide_probes():
    sys = make_system("henon")
    probes = FinitePointSet(np.random.default_rng(0).uniform(-2, 2, (100, 2)))
    est = find_absorbing_ball(sys, probes, 10_000, drop_escaping=True)
    # long-orbit max-norm scan of the attractor: |(x, y)| stays below 1.42
    assert est.center == (0.0, 0.0) and est.radius <= 3


def test_omega_limit_sample_lands_on_fixed_point():
    sys = make_system("affine_contraction")
    G = omega_limit_sample(sys, np.array([[1.0]]), 1100, 5)
    assert np.all(np.abs(G.points) < 1e-300)


def test_henon_jacobian_finite_difference_agrees():
    sys = make_system("henon")
    for x in np.random.default_rng(2).uniform(-1, 1, (20, 2)):
        Ja, src = jacobian(sys, x, 3)
        assert src == "analytic"
        Jf = finite_difference_jacobian(sys, x, 3)
        assert np.max(np.abs(Ja - Jf)) / np.max(np.abs(Ja)) < 1e-5


def test_flow_jacobian_falls_back_to_differences():
    sys = make_system("linear_decay")
    J, src = jacobian(sys, np.array([0.3]), 1.0)
    assert src == "finite-difference"
    assert J[0, 0] == pytest.approx(math.exp(-1), rel=1e-7)
