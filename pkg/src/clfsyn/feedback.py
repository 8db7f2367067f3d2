"""Closed-form feedback laws extracted from a verified CLF: the universal
(Sontag) formula for unconstrained inputs and a min-norm QP that respects
the input polytope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .dynamics import ControlAffineSystem, lie_decompose
from .poly import Polynomial
from .sets import InputPolytope

__all__ = ["FeedbackLaw", "sontag", "min_norm", "InfeasibleFeedback"]


class InfeasibleFeedback(RuntimeError):
    """min-norm QP infeasible even with the decrease rate relaxed to zero:
    the candidate is not a CLF at the queried state."""


def sontag(V: Polynomial, sys: ControlAffineSystem,
           x: Sequence[float]) -> np.ndarray:
    """Universal-formula feedback
    u = -b (a + sqrt(a^2 + (b^T b)^2)) / (b^T b), with u = 0 on the locus
    where the input gain vanishes."""
    dec = lie_decompose(V, sys)
    x = np.asarray(x, dtype=float)
    a = dec.a.eval(x)
    b = np.array([bi.eval(x) for bi in dec.b])
    bb = float(b @ b)
    if bb <= 1e-12:
        return np.zeros(sys.m)
    return -b * (a + np.sqrt(a * a + bb * bb)) / bb


def _min_norm_box(rhs: float, b_vec: np.ndarray, lo: np.ndarray,
                  hi: np.ndarray) -> Optional[np.ndarray]:
    """Exact solution of min ||u||^2 s.t. b^T u <= rhs, lo <= u <= hi via
    dual bisection: u(mu) = clip(-mu b / 2, lo, hi) with b^T u(mu)
    nonincreasing in mu."""
    if float(b_vec @ np.clip(np.zeros_like(b_vec), lo, hi)) <= rhs:
        return np.clip(np.zeros_like(b_vec), lo, hi)
    floor = float(np.minimum(b_vec * lo, b_vec * hi).sum())
    if floor > rhs + 1e-12 * (1 + abs(rhs)):
        return None
    mu_hi = 1.0
    for _ in range(200):
        u = np.clip(-mu_hi * b_vec / 2.0, lo, hi)
        if b_vec @ u <= rhs:
            break
        mu_hi *= 2.0
    mu_lo = 0.0
    for _ in range(200):
        mu = 0.5 * (mu_lo + mu_hi)
        u = np.clip(-mu * b_vec / 2.0, lo, hi)
        if b_vec @ u <= rhs:
            mu_hi = mu
        else:
            mu_lo = mu
    return np.clip(-mu_hi * b_vec / 2.0, lo, hi)


def _solve_min_norm_qp(a_val: float, b_vec: np.ndarray, bound: float,
                       U: InputPolytope) -> Optional[np.ndarray]:
    """minimize ||u||^2 s.t. a + b^T u <= bound, A u >= b; None if infeasible."""
    m = U.m
    if m == 0:
        return np.zeros(0) if a_val <= bound else None
    if U.interval is not None:
        return _min_norm_box(bound - a_val, b_vec, U.interval[0], U.interval[1])
    import cvxpy as cp

    u = cp.Variable(m)
    cons = [U.A @ u >= U.b, a_val + b_vec @ u <= bound]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(u)), cons)
    try:
        prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                   tol_feas=1e-12)
    except cp.error.SolverError:
        prob.solve(solver="OSQP", eps_abs=1e-10, eps_rel=1e-10)
    if prob.status in ("optimal", "optimal_inaccurate"):
        return np.asarray(u.value).reshape(m)
    return None


def min_norm(V: Polynomial, sys: ControlAffineSystem, U: InputPolytope,
             sigma: float, x: Sequence[float],
             return_info: bool = False):
    """Smallest input that enforces grad(V) . f(x, u) <= -sigma V(x) inside
    the input polytope; halves sigma on infeasibility down to zero and
    reports whether the rate was relaxed."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    dec = lie_decompose(V, sys)
    x = np.asarray(x, dtype=float)
    a_val = dec.a.eval(x)
    b_vec = np.array([bi.eval(x) for bi in dec.b])
    vx = V.eval(x)
    relaxed = False
    sig = sigma
    for _ in range(40):
        u = _solve_min_norm_qp(a_val, b_vec, -sig * vx, U)
        if u is not None:
            if return_info:
                return u, sig, relaxed
            return u
        relaxed = True
        if sig == 0.0:
            break
        sig = sig / 2.0 if sig > 1e-8 * max(sigma, 1.0) else 0.0
    raise InfeasibleFeedback(
        f"no admissible input decreases V at x = {x.tolist()}")


@dataclass
class FeedbackLaw:
    """Callable state -> input wrapper around a fixed CLF and mode; the Lie
    decomposition is computed once at construction."""

    V: Polynomial
    sys: ControlAffineSystem
    mode: str = "min_norm"                 # "sontag" | "min_norm"
    U: Optional[InputPolytope] = None
    sigma: float = 0.1

    def __post_init__(self):
        if self.mode not in ("sontag", "min_norm"):
            raise ValueError(f"unknown feedback mode {self.mode!r}")
        if self.mode == "min_norm" and self.U is None:
            raise ValueError("min_norm mode needs the input polytope")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        from .dynamics import _PackedPolys

        dec = lie_decompose(self.V, self.sys)
        self._packed = _PackedPolys([dec.a, *dec.b], self.sys.n)

    def _lie_values(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        vals = self._packed.eval(np.asarray(x, dtype=float))
        return float(vals[0]), vals[1:]

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        a_val, b_vec = self._lie_values(np.asarray(x, dtype=float))
        if self.mode == "sontag":
            bb = float(b_vec @ b_vec)
            if bb <= 1e-12:
                return np.zeros(self.sys.m)
            return -b_vec * (a_val + np.sqrt(a_val * a_val + bb * bb)) / bb
        vx = self.V.eval(np.asarray(x, dtype=float))
        sig = self.sigma
        relaxed_floor = 0.0
        for _ in range(40):
            u = _solve_min_norm_qp(a_val, b_vec, -sig * vx, self.U)
            if u is not None:
                return u
            if sig == 0.0:
                break
            sig = sig / 2.0 if sig > 1e-8 * max(self.sigma, 1.0) else relaxed_floor
        raise InfeasibleFeedback(
            f"no admissible input decreases V at x = {np.asarray(x).tolist()}")
