"""Geometric vocabulary: semialgebraic safe sets, input polytopes, boxes
and balls, with membership tests under a shared tolerance convention.

Input polytopes use the A u >= b convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .poly import Polynomial

__all__ = [
    "SemialgebraicSet",
    "InputPolytope",
    "Box",
    "Ball",
    "box_to_semialgebraic",
    "interval_input_polytope",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SemialgebraicSet:
    """{x | r_i(x) <= 0 for all i}."""

    constraints: tuple[Polynomial, ...]
    nvars: int

    def __post_init__(self):
        for r in self.constraints:
            if r.nvars != self.nvars:
                raise ValueError("constraint nvars mismatch")

    def contains(self, x: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.nvars},)")
        return all(r.eval(x) <= tol for r in self.constraints)

    def contains_many(self, X: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        mask = np.ones(len(X), dtype=bool)
        for r in self.constraints:
            mask &= r.eval_many(X) <= tol
        return mask


class InputPolytope:
    """{u in R^m | A u >= b}; must be nonempty with an interior point and
    bounded (verified by LPs at construction).

    Interval polytopes remember their bounds so projections can clamp
    exactly instead of iterating.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray,
                 interval: Optional[tuple[np.ndarray, np.ndarray]] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.size == 0:
            A = A.reshape(len(b), max(A.shape[1] if A.ndim == 2 else 0, 0))
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
        self.A = A
        self.b = b
        self.m = A.shape[1]
        self.interval = None
        if interval is not None:
            self.interval = (np.asarray(interval[0], float), np.asarray(interval[1], float))
        if self.m > 0:
            self.interior_point = self._find_interior()
            self._check_bounded()
        else:
            self.interior_point = np.zeros(0)

    def _find_interior(self) -> np.ndarray:
        # max t s.t. A u - t*||A_i|| >= b: slack-maximization LP
        norms = np.linalg.norm(self.A, axis=1)
        norms[norms == 0] = 1.0
        c = np.zeros(self.m + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-self.A, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=-self.b,
                      bounds=[(None, None)] * self.m + [(None, None)],
                      method="highs")
        if not res.success or res.x[-1] <= 0:
            raise ValueError("input polytope is empty or has no interior")
        return res.x[:-1]

    def _check_bounded(self):
        for i in range(self.m):
            for sign in (1.0, -1.0):
                c = np.zeros(self.m)
                c[i] = sign
                res = linprog(c, A_ub=-self.A, b_ub=-self.b,
                              bounds=[(None, None)] * self.m, method="highs")
                if res.status == 3:
                    raise ValueError(f"input polytope unbounded in coordinate {i}")

    def contains(self, u: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ValueError(f"input has shape {u.shape}, expected ({self.m},)")
        if self.m == 0:
            return True
        return bool(np.all(self.A @ u >= self.b - tol))

    def project(self, u: Sequence[float], max_iter: int = 200,
                tol: float = 1e-12) -> np.ndarray:
        """Euclidean projection onto the polytope: exact clamp for interval
        polytopes, Dykstra's alternating halfspace projection otherwise."""
        u = np.asarray(u, dtype=float)
        if self.m == 0:
            return np.zeros(0)
        if self.interval is not None:
            return np.clip(u, self.interval[0], self.interval[1])
        x = u.copy()
        corrections = np.zeros((len(self.b), self.m))
        for _ in range(max_iter):
            x_prev = x.copy()
            for i in range(len(self.b)):
                z = x + corrections[i]
                a = self.A[i]
                viol = self.b[i] - a @ z
                if viol > 0:
                    xn = z + a * (viol / (a @ a))
                else:
                    xn = z
                corrections[i] = z - xn
                x = xn
            if np.linalg.norm(x - x_prev) < tol:
                break
        return x

    def vertices(self) -> np.ndarray:
        """Enumerate vertices (small polytopes only): solve all m-subsets of
        active constraints and keep feasible solutions."""
        if self.m == 0:
            return np.zeros((1, 0))
        if self.interval is not None:
            lo, hi = self.interval
            grids = np.meshgrid(*[(lo[i], hi[i]) for i in range(self.m)], indexing="ij")
            return np.stack([g.ravel() for g in grids], axis=1)
        from itertools import combinations

        verts = []
        l = len(self.b)
        for rows in combinations(range(l), self.m):
            Asub = self.A[list(rows)]
            if abs(np.linalg.det(Asub)) < 1e-12:
                continue
            v = np.linalg.solve(Asub, self.b[list(rows)])
            if self.contains(v, tol=1e-8):
                verts.append(v)
        if not verts:
            raise ValueError("vertex enumeration found nothing; polytope degenerate?")
        out = np.unique(np.round(np.array(verts), 10), axis=0)
        return out

    def __repr__(self):
        return f"InputPolytope(m={self.m}, rows={len(self.b)})"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with strictly ordered bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("bound shape mismatch")
        if not np.all(lo < hi):
            raise ValueError("box requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def half_widths(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    def contains(self, x: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clamp(self, x: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def grid(self, density: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, density) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.center.shape:
            raise ValueError("dimension mismatch")
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)


def box_to_semialgebraic(box: Box) -> SemialgebraicSet:
    """2n linear constraints x_i - hi <= 0 and lo - x_i <= 0."""
    n = box.dim
    cons = []
    for i in range(n):
        xi = Polynomial.variable(i, n)
        cons.append(xi - box.upper[i])
        cons.append(box.lower[i] - xi)
    return SemialgebraicSet(tuple(cons), n)


def interval_input_polytope(lo: Sequence[float], hi: Sequence[float]) -> InputPolytope:
    """Box input set as A = [I; -I], b = [lo; -hi] under A u >= b."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape:
        raise ValueError("interval bound shape mismatch")
    m = len(lo)
    if m == 0:
        return InputPolytope(np.zeros((0, 0)), np.zeros(0))
    if not np.all(lo < hi):
        raise ValueError("empty input interval")
    A = np.vstack([np.eye(m), -np.eye(m)])
    b = np.concatenate([lo, -hi])
    return InputPolytope(A, b, interval=(lo, hi))
