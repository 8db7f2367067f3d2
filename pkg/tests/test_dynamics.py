import numpy as np
import pytest

from clfsyn.dynamics import (BENCHMARK_NAMES, lie_decompose, load_benchmark,
                             quadratic_basis)
from clfsyn.poly import Polynomial


def test_vector_field_double_integrator():
    prob = load_benchmark("double_integrator")
    f = prob.system.vector_field([1.0, 2.0], [3.0])
    assert np.allclose(f, [2.0, 3.0])


def test_tora_equilibrium():
    prob = load_benchmark("tora")
    assert np.allclose(prob.system.vector_field(np.zeros(4), [0.0]), 0.0)


def test_tora_sin_approximation():
    eps = 0.1
    prob = load_benchmark("tora")
    x3 = 1.3
    f = prob.system.vector_field([0.0, 0.0, x3, 0.0], [0.0])
    assert f[1] == pytest.approx(eps * (x3 - x3 ** 3 / 6.0), rel=1e-12)


def test_benchmark_dimensions():
    dims = {"double_integrator": (2, 1), "tora": (4, 1),
            "bicycle": (4, 2), "inverted_pendulum": (4, 1)}
    for name, (n, m) in dims.items():
        prob = load_benchmark(name)
        assert (prob.system.n, prob.system.m) == (n, m)


def test_bicycle_input_box():
    prob = load_benchmark("bicycle")
    assert np.allclose(prob.U.interval[0], [-10.0, -10.0])
    assert np.allclose(prob.U.interval[1], [10.0, 10.0])


def test_pendulum_input_box():
    prob = load_benchmark("inverted_pendulum")
    assert np.allclose(prob.U.interval[0], [-20.0])
    assert np.allclose(prob.U.interval[1], [20.0])


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        load_benchmark("segway")


def test_all_benchmarks_have_controlled_equilibrium():
    for name in BENCHMARK_NAMES:
        prob = load_benchmark(name)
        f = prob.system.vector_field(np.zeros(prob.system.n),
                                     np.zeros(prob.system.m))
        assert np.allclose(f, 0.0, atol=1e-9), name


def test_basis_vanishes_at_origin():
    for name in BENCHMARK_NAMES:
        prob = load_benchmark(name)
        origin = np.zeros(prob.system.n)
        for g in prob.basis:
            assert g.eval(origin) == 0.0
        # hence every candidate V has V(0) = 0
        rng = np.random.default_rng(1)
        V = prob.candidate(rng.normal(size=prob.r))
        assert V.eval(origin) == 0.0


def test_quadratic_basis_size():
    assert len(quadratic_basis(2)) == 3
    assert len(quadratic_basis(4)) == 10


def test_lie_decompose_pure_integrator():
    # xdot = u, V = x^2 -> a = 0, b = (2x)
    from clfsyn.dynamics import ControlAffineSystem

    zero = Polynomial.zero(1)
    one = Polynomial.constant(1.0, 1)
    sys = ControlAffineSystem([zero], [[one]])
    V = Polynomial.from_exp_dict({(2,): 1.0}, 1)
    dec = lie_decompose(V, sys)
    assert dec.a.is_zero()
    assert dec.b[0] == Polynomial.from_exp_dict({(1,): 2.0}, 1)


def test_lie_decompose_double_integrator():
    prob = load_benchmark("double_integrator")
    V = Polynomial.from_exp_dict({(2, 0): 1.0, (0, 2): 1.0}, 2)
    dec = lie_decompose(V, prob.system)
    assert dec.a == Polynomial.from_exp_dict({(1, 1): 2.0}, 2)
    assert dec.b[0] == Polynomial.from_exp_dict({(0, 1): 2.0}, 2)


def test_lie_decompose_tora_finite_difference():
    prob = load_benchmark("tora")
    rng = np.random.default_rng(42)
    V = prob.candidate(rng.normal(size=prob.r))
    dec = lie_decompose(V, prob.system)
    h = 1e-6
    for _ in range(100):
        x = rng.uniform(prob.S_box.lower, prob.S_box.upper)
        u = rng.uniform(-1.5, 1.5, size=1)
        f = prob.system.vector_field(x, u)
        fd = (V.eval(x + h * f) - V.eval(x - h * f)) / (2 * h)
        exact = dec.eval(x, u)
        assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6)


def test_lie_reconstruction_identity():
    prob = load_benchmark("bicycle")
    rng = np.random.default_rng(9)
    V = prob.candidate(rng.normal(size=prob.r))
    dec = lie_decompose(V, prob.system)
    gV = V.grad()
    for _ in range(50):
        x = rng.uniform(prob.S_box.lower, prob.S_box.upper)
        u = rng.uniform(-10, 10, size=2)
        f = prob.system.vector_field(x, u)
        direct = float(np.dot([g.eval(x) for g in gV], f))
        assert dec.eval(x, u) == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_pendulum_fit_residuals_recorded():
    prob = load_benchmark("inverted_pendulum")
    res = prob.metadata["fit_residuals"]
    assert set(res) == {"tan", "sin_cos", "rational", "cos"}
    assert all(0 <= v < 0.2 for v in res.values())


def test_stage_eval_consistency():
    prob = load_benchmark("tora")
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(prob.S_box.lower, prob.S_box.upper)
        u = rng.uniform(-1.5, 1.5, size=1)
        f, A, B = prob.system.stage_eval(x, u)
        assert np.allclose(f, prob.system.vector_field(x, u))
        assert np.allclose(A, prob.system.state_jacobian(x, u))
        assert np.allclose(B, prob.system.input_matrix(x))
