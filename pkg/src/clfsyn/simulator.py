"""Closed-loop integration, trajectory records, and sublevel-set sizing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import ControlAffineSystem, ProblemInstance
from .poly import Polynomial

__all__ = ["Trajectory", "rk4_step", "simulate", "beta_star"]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    V_values: Optional[np.ndarray]
    exited: bool
    converged: bool

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise ValueError("states and times length mismatch")
        if len(self.inputs) != max(len(self.times) - 1, 0):
            raise ValueError("inputs must have one entry per step")


def rk4_step(sys: ControlAffineSystem, x: np.ndarray, u: np.ndarray,
             h: float) -> np.ndarray:
    """Classical RK4 with the input held constant over the step."""
    if h <= 0:
        raise ValueError("step size must be positive")
    k1 = sys.vector_field(x, u)
    k2 = sys.vector_field(x + 0.5 * h * k1, u)
    k3 = sys.vector_field(x + 0.5 * h * k2, u)
    k4 = sys.vector_field(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(sys: ControlAffineSystem, law: Callable[[np.ndarray], np.ndarray],
             x0: Sequence[float], t_end: float, h: float = 0.01,
             S=None, V: Optional[Polynomial] = None,
             target_radius: Optional[float] = None) -> Trajectory:
    """Integrate xdot = f(x, law(x)) until t_end, S-exit, or entry into the
    target ball, recording V along the way when given."""
    x = np.asarray(x0, dtype=float).copy()
    times = [0.0]
    states = [x.copy()]
    inputs = []
    vvals = [V.eval(x)] if V is not None else None
    exited = False
    converged = False
    t = 0.0
    nsteps = int(round(t_end / h))
    for _ in range(nsteps):
        u = np.atleast_1d(np.asarray(law(x), dtype=float))
        x = rk4_step(sys, x, u, h)
        t += h
        times.append(t)
        states.append(x.copy())
        inputs.append(u)
        if vvals is not None:
            vvals.append(V.eval(x))
        if S is not None and not S.contains(x, tol=1e-9):
            exited = True
            break
        if target_radius is not None and np.linalg.norm(x) <= target_radius:
            converged = True
            break
    return Trajectory(
        times=np.array(times), states=np.array(states),
        inputs=np.array(inputs) if inputs else np.zeros((0, sys.m)),
        V_values=np.array(vvals) if vvals is not None else None,
        exited=exited, converged=converged)


def beta_star(V: Polynomial, problem: ProblemInstance, samples: int = 4096,
              safety: float = 0.95, seed: int = 0) -> float:
    """Estimate the largest beta with {V <= beta} inside S: cast rays from
    the origin, bisect to the S boundary, take the minimum of V there and
    apply a safety factor."""
    n = problem.system.n
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    def max_constraint_many(X):
        vals = np.full(len(X), -np.inf)
        for r in problem.S.constraints:
            vals = np.maximum(vals, r.eval_many(X))
        return vals

    # scale that certainly leaves S: past the box corner diameter
    t_hi0 = 2.0 * float(np.linalg.norm(
        np.maximum(np.abs(problem.S_box.lower), np.abs(problem.S_box.upper))))
    keep = max_constraint_many(t_hi0 * dirs) > 0
    dirs = dirs[keep]
    if len(dirs) == 0:
        raise RuntimeError("boundary sampling failed: no ray left S")
    lo_t = np.zeros(len(dirs))
    hi_t = np.full(len(dirs), t_hi0)
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        inside = max_constraint_many(mid[:, None] * dirs) <= 0
        lo_t = np.where(inside, mid, lo_t)
        hi_t = np.where(inside, hi_t, mid)
    boundary = (0.5 * (lo_t + hi_t))[:, None] * dirs
    return safety * float(V.eval_many(boundary).min())
