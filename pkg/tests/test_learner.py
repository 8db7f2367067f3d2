import math

import numpy as np
import pytest

from clfsyn.dynamics import load_benchmark
from clfsyn.learner import (Candidate, CandidateRegion, ConstraintRow,
                            Converged, Empty, LearnerConfig,
                            WitnessConstraintPair, add_witness,
                            ellipsoid_logvol, ellipsoid_step, find_candidate,
                            iteration_bound, mve, witness_rows)
from clfsyn.sets import Box


CFG = LearnerConfig()


def test_witness_rows_hand_example_right():
    # double integrator, basis {x1^2, x1x2, x2^2}, x = (1, 0), u = (-1):
    # positivity -c1 <= 0 ; decrease -c2 <= 0 (both unit-norm)
    prob = load_benchmark("double_integrator")
    pair = witness_rows(prob, [1.0, 0.0], [-1.0])
    pos, dec = pair.rows
    assert np.allclose(pos.a, [-1.0, 0.0, 0.0])
    assert pos.b == 0.0
    assert np.allclose(dec.a, [0.0, -1.0, 0.0])
    assert dec.b == 0.0


def test_witness_rows_hand_example_up():
    # x = (0, 1), u = (0): positivity -c3 <= 0 ; decrease +c2 <= 0
    prob = load_benchmark("double_integrator")
    pair = witness_rows(prob, [0.0, 1.0], [0.0])
    pos, dec = pair.rows
    assert np.allclose(pos.a, [0.0, 0.0, -1.0])
    assert np.allclose(dec.a, [0.0, 1.0, 0.0])


def test_witness_rows_unit_norm():
    prob = load_benchmark("tora")
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(prob.S_box.lower, prob.S_box.upper)
        u = rng.uniform(-1.5, 1.5, 1)
        for row in witness_rows(prob, x, u).rows:
            assert np.linalg.norm(row.a) == pytest.approx(1.0, rel=1e-12)


def test_witness_rows_rejects_origin():
    prob = load_benchmark("double_integrator")
    with pytest.raises(ValueError):
        witness_rows(prob, [0.0, 0.0], [0.0])


def test_mve_unit_box():
    box = Box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])
    d, B, logdet = mve([], box)
    assert np.allclose(d, 0.0, atol=1e-6)
    assert np.allclose(B, np.eye(3), atol=1e-5)


def test_mve_asymmetric_box():
    box = Box([0.0, -3.0], [2.0, 3.0])
    d, B, logdet = mve([], box)
    assert np.allclose(d, [1.0, 0.0], atol=1e-6)
    assert np.allclose(np.sort(np.linalg.eigvalsh(B)), [1.0, 3.0], atol=1e-4)


def test_mve_cut_box():
    # [-1,1]^2 with c1 >= 0.5: MVE of [0.5, 1] x [-1, 1]
    box = Box([-1.0, -1.0], [1.0, 1.0])
    rows = [ConstraintRow.normalized([-1.0, 0.0], -0.5, "cut")]
    d, B, logdet = mve(rows, box)
    assert np.allclose(d, [0.75, 0.0], atol=1e-5)


def test_mve_center_against_monte_carlo():
    # Monte-Carlo inscribed-ellipsoid search as an independent oracle
    rng = np.random.default_rng(12)
    box = Box([-1.0, -1.0], [1.0, 1.0])
    rows = [ConstraintRow.normalized([-1.0, 0.0], -0.5, "cut")]
    d, B, _ = mve(rows, box)

    def inside(c):
        return (c[0] >= 0.5 and np.all(np.abs(c) <= 1.0))

    best_vol, best_center = -np.inf, None
    for _ in range(4000):
        center = rng.uniform([0.5, -1.0], [1.0, 1.0])
        # largest axis-aligned ellipse at this center (axis-aligned is
        # optimal for an axis-aligned box region)
        rx = min(center[0] - 0.5, 1.0 - center[0])
        ry = 1.0 - abs(center[1])
        if rx <= 0 or ry <= 0:
            continue
        vol = rx * ry
        if vol > best_vol:
            best_vol, best_center = vol, center
    assert np.linalg.norm(d - best_center) <= 0.05


def test_mve_ellipsoid_inside_polytope():
    rng = np.random.default_rng(5)
    box = Box([-1.0, -1.0], [1.0, 1.0])
    rows = [ConstraintRow.normalized(rng.normal(size=2), rng.uniform(0.2, 1.0), "r")
            for _ in range(4)]
    d, B, _ = mve(rows, box)
    thetas = rng.uniform(0, 2 * np.pi, 10000)
    pts = d[None, :] + (B @ np.stack([np.cos(thetas), np.sin(thetas)])).T
    for row in rows:
        assert np.all(pts @ row.a <= row.b + 1e-8)
    assert np.all(np.abs(pts) <= 1.0 + 1e-8)


def test_find_candidate_empty_rows_center():
    region = CandidateRegion(Box([-1.0] * 3, [1.0] * 3))
    out = find_candidate(region, CFG)
    assert isinstance(out, Candidate)
    assert np.allclose(out.c, 0.0, atol=1e-6)


def test_find_candidate_contradictory_rows():
    region = CandidateRegion(Box([-1.0] * 2, [1.0] * 2))
    a = np.array([1.0, 0.0])
    add_witness(region, WitnessConstraintPair(rows=(
        ConstraintRow.normalized(a, -1.0, "r1"),
        ConstraintRow.normalized(-a, -1.0, "r2"))))
    assert isinstance(find_candidate(region, CFG), Empty)


def test_find_candidate_converged_when_tiny():
    box = Box([-1e-5, -1e-5], [1e-5, 1e-5])
    region = CandidateRegion(box)
    cfg = LearnerConfig(delta=1e-3, box_halfwidth=1.0)
    out = find_candidate(region, cfg)
    assert isinstance(out, Converged)
    assert out.radius < 1e-3


def test_redundant_cut_keeps_center():
    region = CandidateRegion(Box([-1.0] * 2, [1.0] * 2))
    out1 = find_candidate(region, CFG)
    add_witness(region, WitnessConstraintPair(rows=(
        ConstraintRow.normalized([1.0, 0.0], 5.0, "redundant"),)))
    out2 = find_candidate(region, CFG)
    assert np.linalg.norm(out1.c - out2.c) <= 1e-5


def test_candidate_eliminated_by_own_counterexample_rows():
    prob = load_benchmark("double_integrator")
    region = CandidateRegion(prob.C0)
    cfg = LearnerConfig()
    out = find_candidate(region, cfg)
    c = out.c
    # center of the default box is the origin: V = 0 fails positivity at
    # any state; emulate a counterexample at x = (1, 0), u = -1
    pair = witness_rows(prob, [1.0, 0.0], [-1.0])
    add_witness(region, pair)
    assert not region.feasible(c, margin=cfg.margin)


def test_region_monotonicity():
    prob = load_benchmark("double_integrator")
    region = CandidateRegion(prob.C0)
    rng = np.random.default_rng(3)
    pts = rng.uniform(prob.C0.lower, prob.C0.upper, size=(200, 3))
    inside_before = np.array([region.feasible(p) for p in pts])
    add_witness(region, witness_rows(prob, [0.5, 0.5], [-1.0]))
    inside_after = np.array([region.feasible(p) for p in pts])
    assert np.all(inside_after <= inside_before)


def test_ellipsoid_step_unit_ball_cut():
    for r in (2, 3, 5):
        x = np.zeros(r)
        P = np.eye(r)
        a = np.zeros(r)
        a[0] = 1.0
        x2, P2 = ellipsoid_step((x, P), ConstraintRow(a, 0.0, "cut"))
        expected = np.zeros(r)
        expected[0] = -1.0 / (r + 1)
        assert np.allclose(x2, expected, atol=1e-12)


def test_ellipsoid_volume_law_random_cuts():
    rng = np.random.default_rng(17)
    for r in (2, 5, 10):
        x = np.zeros(r)
        P = np.eye(r)
        lv = ellipsoid_logvol(P)
        for _ in range(50):
            a = rng.normal(size=r)
            a /= np.linalg.norm(a)
            x, P = ellipsoid_step((x, P), ConstraintRow(a, float(a @ x), "cut"))
            lv_new = ellipsoid_logvol(P)
            assert lv_new - lv <= -1.0 / (2 * r) + 1e-9
            lv = lv_new


def test_ellipsoid_repeated_parallel_cuts_shrink():
    r = 3
    x, P = np.zeros(r), np.eye(r)
    a = np.array([1.0, 0.0, 0.0])
    lv = ellipsoid_logvol(P)
    for _ in range(5):
        x, P = ellipsoid_step((x, P), ConstraintRow(a, float(a @ x), "cut"))
        lv_new = ellipsoid_logvol(P)
        assert lv_new < lv
        lv = lv_new


def test_iteration_bound_values():
    # r = 2, Delta = 1, delta = e^-1: ceil(2 / ln 2) = 3
    assert iteration_bound(2, 1.0, math.exp(-1)) == 3
    assert iteration_bound(3, 1e-9 * (1 + 1e-12) * 1e9, 1.0) == 1


def test_iteration_bound_near_equal():
    assert iteration_bound(4, 1.0 * (1 + 1e-12), 1.0) == 1


def test_iteration_bound_r1_convention():
    assert iteration_bound(1, math.e, 1.0) == 1
    assert iteration_bound(1, math.e ** 3, 1.0) == 3


def test_iteration_bound_quadratic_growth():
    for r in (8, 16, 32):
        b1 = iteration_bound(r, 100.0, 1e-3)
        b2 = iteration_bound(2 * r, 100.0, 1e-3)
        assert 3.5 <= b2 / b1 <= 4.5


def test_ellipsoid_strategy_finds_candidate():
    prob = load_benchmark("double_integrator")
    region = CandidateRegion(prob.C0)
    cfg = LearnerConfig(strategy="ellipsoid")
    out = find_candidate(region, cfg)
    assert isinstance(out, Candidate)
    assert region.feasible(out.c)


def test_invalid_learner_config():
    with pytest.raises(ValueError):
        LearnerConfig(strategy="simplex")
    with pytest.raises(ValueError):
        LearnerConfig(delta=0.0)
    with pytest.raises(ValueError):
        LearnerConfig(delta=5.0, box_halfwidth=1.0)
