import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clfsyn.poly import Polynomial
from clfsyn.sets import (Ball, Box, InputPolytope, SemialgebraicSet,
                         box_to_semialgebraic, interval_input_polytope)


def test_box_contains_center():
    box = Box([-1.0, -1.0], [1.0, 1.0])
    assert box.contains([0.0, 0.0])
    assert not box.contains([1.5, 0.0])


def test_semialgebraic_membership():
    # {x | x^2 - 1 <= 0}
    s = SemialgebraicSet((Polynomial.from_exp_dict({(2,): 1.0, (0,): -1.0}, 1),), 1)
    assert s.contains([0.5])
    assert not s.contains([1.5])


def test_interval_polytope_boundary_point():
    U = interval_input_polytope([-1.5], [1.5])
    assert U.contains([1.5], tol=0.0)
    assert not U.contains([1.5001], tol=0.0)


def test_box_to_semialgebraic_1d():
    s = box_to_semialgebraic(Box([-1.0], [1.0]))
    assert len(s.constraints) == 2
    assert s.contains([0.99]) and not s.contains([1.01])


def test_box_to_semialgebraic_membership_agrees():
    box = Box([0.0, -1.0], [2.0, 1.0])
    s = box_to_semialgebraic(box)
    assert len(s.constraints) == 4
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.5, 3.0, size=(100, 2))
    for x in pts:
        assert s.contains(x, tol=0.0) == box.contains(x, tol=0.0)


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.0, 0.0])


def test_interval_polytope_shapes():
    U = interval_input_polytope([-1.0], [1.0])
    assert U.A.shape == (2, 1)
    assert np.array_equal(U.A, np.array([[1.0], [-1.0]]))
    assert np.array_equal(U.b, np.array([-1.0, -1.0]))

    U2 = interval_input_polytope([-10.0, -10.0], [10.0, 10.0])
    assert U2.A.shape == (4, 2)
    assert U2.b.shape == (4,)


def test_interval_polytope_classifies_points():
    U = interval_input_polytope([-2.0, 0.5], [3.0, 4.0])
    rng = np.random.default_rng(5)
    pts = rng.uniform(-4, 6, size=(200, 2))
    for u in pts:
        inside = (-2.0 <= u[0] <= 3.0) and (0.5 <= u[1] <= 4.0)
        assert U.contains(u, tol=0.0) == inside


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        interval_input_polytope([1.0], [1.0])


def test_unbounded_polytope_rejected():
    # single halfspace u >= 0 is unbounded
    with pytest.raises(ValueError):
        InputPolytope(np.array([[1.0]]), np.array([0.0]))


def test_empty_polytope_rejected():
    # u >= 1 and -u >= 0 is empty
    with pytest.raises(ValueError):
        InputPolytope(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))


def test_polytope_projection_interval():
    U = interval_input_polytope([-1.0, -2.0], [1.0, 2.0])
    u = U.project([3.0, -5.0])
    assert np.allclose(u, [1.0, -2.0])


def test_polytope_projection_general():
    # triangle u1 >= 0, u2 >= 0, u1 + u2 <= 1
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    b = np.array([0.0, 0.0, -1.0])
    U = InputPolytope(A, b)
    u = U.project([1.0, 1.0])
    assert np.allclose(u, [0.5, 0.5], atol=1e-6)
    inside = np.array([0.2, 0.3])
    assert np.allclose(U.project(inside), inside, atol=1e-9)


def test_vertices_interval():
    U = interval_input_polytope([-1.0, 0.0], [1.0, 2.0])
    verts = U.vertices()
    assert verts.shape == (4, 2)
    assert {tuple(v) for v in verts} == {(-1.0, 0.0), (-1.0, 2.0),
                                         (1.0, 0.0), (1.0, 2.0)}


def test_ball_membership():
    ball = Ball(np.zeros(2), 1.0)
    assert ball.contains([0.5, 0.5])
    assert not ball.contains([1.0, 0.5])
    with pytest.raises(ValueError):
        Ball(np.zeros(2), 0.0)


@given(st.floats(-3, 3), st.floats(-3, 3),
       st.floats(1e-9, 0.5), st.floats(0.5, 2.0))
@settings(max_examples=100, deadline=None)
def test_contains_monotone_in_tol(x1, x2, t_small, t_big):
    s = box_to_semialgebraic(Box([-1.0, -1.0], [1.0, 1.0]))
    x = np.array([x1, x2])
    if s.contains(x, tol=t_small):
        assert s.contains(x, tol=t_big)
