import numpy as np
import pytest

from clfsyn.dynamics import ControlAffineSystem, load_benchmark
from clfsyn.feedback import FeedbackLaw
from clfsyn.poly import Polynomial
from clfsyn.simulator import Trajectory, beta_star, rk4_step, simulate


def decay_system():
    # xdot = -x, no inputs
    return ControlAffineSystem([Polynomial.from_exp_dict({(1,): -1.0}, 1)], [])


def test_rk4_against_exponential():
    sys = decay_system()
    x1 = rk4_step(sys, np.array([1.0]), np.zeros(0), 0.1)
    assert abs(x1[0] - np.exp(-0.1)) < 1e-7


def test_rk4_zero_field_identity():
    sys = ControlAffineSystem([Polynomial.zero(1)], [])
    x = np.array([0.37])
    assert np.array_equal(rk4_step(sys, x, np.zeros(0), 0.5), x)


def test_rk4_exact_for_constant_field():
    # xdot = u with constant u: RK4 integrates exactly
    sys = ControlAffineSystem([Polynomial.zero(1)],
                              [[Polynomial.constant(1.0, 1)]])
    x1 = rk4_step(sys, np.array([0.25]), np.array([1.0]), 0.5)
    assert x1[0] == pytest.approx(0.75, abs=0.0)


def test_rk4_order():
    # halving h shrinks the one-step error by ~2^5 (local order); the
    # acceptance bound 2^4 * 0.9 is comfortably met
    sys = decay_system()
    errs = []
    for h in (0.2, 0.1):
        x1 = rk4_step(sys, np.array([1.0]), np.zeros(0), h)
        errs.append(abs(x1[0] - np.exp(-h)))
    assert errs[0] / errs[1] >= 16 * 0.9


def test_simulate_decay():
    sys = decay_system()
    traj = simulate(sys, lambda x: np.zeros(0), [1.0], t_end=1.0, h=0.001)
    assert abs(traj.states[-1, 0] - np.exp(-1.0)) < 1e-6
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.inputs) == len(traj.times) - 1


def test_simulate_origin_fixed_point():
    prob = load_benchmark("double_integrator")
    V = prob.candidate(np.array([0.3, 1.0, 1.0]))
    law = FeedbackLaw(V=V, sys=prob.system, mode="min_norm", U=prob.U)
    traj = simulate(prob.system, law, np.zeros(2), t_end=1.0, h=0.01, V=V)
    assert np.all(np.linalg.norm(traj.states, axis=1) <= 1e-6)


def test_simulate_stops_on_exit():
    # xdot = +x leaves S = [-1, 1] quickly from 0.5
    sys = ControlAffineSystem([Polynomial.from_exp_dict({(1,): 1.0}, 1)], [])
    from clfsyn.sets import Box, box_to_semialgebraic

    S = box_to_semialgebraic(Box([-1.0], [1.0]))
    traj = simulate(sys, lambda x: np.zeros(0), [0.5], t_end=10.0, h=0.01, S=S)
    assert traj.exited
    assert traj.times[-1] < 10.0


def test_simulate_stops_on_target():
    sys = decay_system()
    traj = simulate(sys, lambda x: np.zeros(0), [1.0], t_end=100.0, h=0.01,
                    target_radius=0.5)
    assert traj.converged
    assert np.linalg.norm(traj.states[-1]) <= 0.5


def test_closed_loop_decrease_and_invariance():
    prob = load_benchmark("double_integrator")
    V = prob.candidate(np.array([0.3, 1.0, 1.0]))
    law = FeedbackLaw(V=V, sys=prob.system, mode="min_norm", U=prob.U, sigma=0.1)
    beta = beta_star(V, prob)
    rng = np.random.default_rng(0)
    starts = []
    while len(starts) < 5:
        x = rng.uniform(-1, 1, 2)
        if V.eval(x) < beta and np.linalg.norm(x) > 0.1:
            starts.append(x)
    for x0 in starts:
        traj = simulate(prob.system, law, x0, t_end=10.0, h=0.01,
                        S=prob.S, V=V)
        assert not traj.exited
        for k in range(len(traj.V_values) - 1):
            if np.linalg.norm(traj.states[k]) > prob.rho:
                assert traj.V_values[k + 1] < traj.V_values[k] + \
                    1e-9 * abs(traj.V_values[k])


def test_beta_star_scalar():
    # V = x^2 on S = [-1, 1]: boundary value 1, reported 0.95
    from clfsyn.dynamics import ProblemInstance
    from clfsyn.sets import Box, box_to_semialgebraic, interval_input_polytope

    zero = Polynomial.zero(1)
    one = Polynomial.constant(1.0, 1)
    sys = ControlAffineSystem([zero], [[one]])
    box = Box([-1.0], [1.0])
    prob = ProblemInstance(system=sys, S=box_to_semialgebraic(box), S_box=box,
                           U=interval_input_polytope([-1.0], [1.0]),
                           basis=(Polynomial.from_exp_dict({(2,): 1.0}, 1),),
                           C0=Box([-100.0], [100.0]), rho=0.01)
    V = Polynomial.from_exp_dict({(2,): 1.0}, 1)
    assert beta_star(V, prob) == pytest.approx(0.95, rel=1e-3)


def test_beta_star_unit_box_sphere():
    prob = load_benchmark("double_integrator")
    V = prob.candidate(np.array([1.0, 0.0, 1.0]))  # x1^2 + x2^2
    est = beta_star(V, prob, samples=8192)
    assert est == pytest.approx(0.95, rel=2e-2)


def test_beta_star_scales_homogeneously():
    prob = load_benchmark("double_integrator")
    V = prob.candidate(np.array([0.3, 1.0, 1.0]))
    b1 = beta_star(V, prob)
    b2 = beta_star(2.0 * V, prob)
    assert b2 == pytest.approx(2 * b1, rel=1e-9)


def test_beta_star_sublevel_set_inside_S():
    prob = load_benchmark("double_integrator")
    V = prob.candidate(np.array([0.3, 1.0, 1.0]))
    beta = beta_star(V, prob)
    rng = np.random.default_rng(123)
    count = 0
    while count < 10000:
        x = rng.uniform(-2, 2, 2)
        if V.eval(x) <= beta:
            count += 1
            assert prob.S.contains(x, tol=1e-9)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 1.0]), states=np.zeros((3, 1)),
                   inputs=np.zeros((1, 1)), V_values=None,
                   exited=False, converged=False)
