"""Candidate-region maintenance and center selection.

The region over CLF coefficients starts as a box and shrinks by unit-norm
halfspace cuts derived from witnesses. The default proposal point is the
center of the maximum-volume inscribed ellipsoid, which guarantees a
per-cut volume contraction of (1 - 1/r); a textbook central-cut ellipsoid
method is available as the alternate strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize

from .dynamics import ProblemInstance, lie_decompose
from .sets import Box

__all__ = [
    "ConstraintRow",
    "WitnessConstraintPair",
    "CandidateRegion",
    "LearnerConfig",
    "Candidate",
    "Empty",
    "Converged",
    "witness_rows",
    "add_witness",
    "find_candidate",
    "mve",
    "ellipsoid_step",
    "iteration_bound",
]


@dataclass(frozen=True)
class ConstraintRow:
    """Unit-norm halfspace a^T c <= b over coefficient space; feasibility is
    always tested with the strictness margin of the learner config."""

    a: np.ndarray
    b: float
    kind: str = "generic"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)

    @staticmethod
    def normalized(a: Sequence[float], b: float, kind: str) -> "ConstraintRow":
        a = np.asarray(a, dtype=float)
        nrm = float(np.linalg.norm(a))
        if nrm < 1e-12:
            # degenerate direction: an unsatisfiable marker row (0 <= b < margin
            # fails the strict test) unless b is safely positive
            return ConstraintRow(np.zeros_like(a), float(b), kind)
        return ConstraintRow(a / nrm, float(b) / nrm, kind)


@dataclass(frozen=True)
class WitnessConstraintPair:
    """The cut family one witness generates: positivity and decrease rows,
    plus optional reach-while-stay rows."""

    rows: tuple[ConstraintRow, ...]
    witness_id: int = -1


@dataclass
class LearnerConfig:
    strategy: str = "mve"          # "mve" | "ellipsoid"
    delta: float = 1e-3            # robustness radius: termination surrogate
    margin: float = 1e-6           # strict-inequality margin epsilon_w
    box_halfwidth: float = 100.0

    def __post_init__(self):
        if self.strategy not in ("mve", "ellipsoid"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not (self.delta > 0 and self.margin > 0):
            raise ValueError("delta and margin must be positive")
        if self.box_halfwidth <= self.delta:
            raise ValueError("box halfwidth must exceed delta")


@dataclass(frozen=True)
class Candidate:
    c: np.ndarray


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Converged:
    radius: float


class CandidateRegion:
    """Box plus accumulated rows; caches the MVE until the next cut."""

    def __init__(self, box: Box, rows: Optional[list[ConstraintRow]] = None):
        self.box = box
        self.rows: list[ConstraintRow] = list(rows or [])
        self._mve_cache = None
        # ellipsoid-strategy state: (center, shape P) with E = {c : (c-d)^T P^-1 (c-d) <= 1}
        r = box.dim
        self.ellipsoid = (box.center.copy(),
                          np.diag((box.half_widths ** 2) * r))

    def copy(self) -> "CandidateRegion":
        dup = CandidateRegion(self.box, self.rows)
        dup.ellipsoid = (self.ellipsoid[0].copy(), self.ellipsoid[1].copy())
        return dup

    @property
    def dim(self) -> int:
        return self.box.dim

    def row_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if self.rows:
            A = np.array([row.a for row in self.rows])
            b = np.array([row.b for row in self.rows])
        else:
            A = np.zeros((0, self.dim))
            b = np.zeros(0)
        return A, b

    def feasible(self, c: np.ndarray, margin: float = 0.0) -> bool:
        if not self.box.contains(c, tol=1e-12):
            return False
        A, b = self.row_matrix()
        if len(b) == 0:
            return True
        return bool(np.all(A @ c <= b - margin))

    def min_slack(self, c: np.ndarray) -> float:
        """Smallest of b_i - a_i^T c over stored rows (inf when no rows)."""
        A, b = self.row_matrix()
        if len(b) == 0:
            return math.inf
        return float(np.min(b - A @ c))

    def invalidate(self):
        self._mve_cache = None


def witness_rows(problem: ProblemInstance, x: Sequence[float],
                 u: Sequence[float], margin_norm: bool = True
                 ) -> WitnessConstraintPair:
    """Rows pinning a state/input witness: V_c(x) > 0 and
    grad(V_c) . f(x, u) < 0, both linear in c."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.linalg.norm(x) == 0.0:
        raise ValueError("witness state must be nonzero")
    gvals = np.array([g.eval(x) for g in problem.basis])
    f = problem.system.vector_field(x, u)
    lie_vals = np.array([np.dot([gg.eval(x) for gg in g.grad()], f)
                         for g in problem.basis])
    rows = (
        ConstraintRow.normalized(-gvals, 0.0, "positivity"),
        ConstraintRow.normalized(lie_vals, 0.0, "decrease"),
    )
    return WitnessConstraintPair(rows=rows)


def add_witness(region: CandidateRegion, pair: WitnessConstraintPair) -> None:
    region.rows.extend(pair.rows)
    region.invalidate()


def iteration_bound(r: int, Delta: float, delta: float) -> int:
    """Cuts needed before the region volume certifiably drops below the
    delta-robustness threshold: ceil(r (ln Delta - ln delta) / -ln(1 - 1/r)),
    degenerating to ceil(ln Delta - ln delta) at r = 1."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if not (Delta > delta > 0):
        raise ValueError("need Delta > delta > 0")
    num = math.log(Delta) - math.log(delta)
    if r == 1:
        return max(1, math.ceil(num))
    return max(1, math.ceil(r * num / (-math.log1p(-1.0 / r))))


def mve(rows: Sequence[ConstraintRow], box: Box,
        margin: float = 0.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximum-volume inscribed ellipsoid {d + B v : ||v|| <= 1} of the
    polytope {rows} intersected with the box.

    Maximizes log det B with ||B a_i|| + a_i^T d <= b_i per face; the box
    faces are always included so the program stays bounded. Falls back to
    an analytic-center style solution on solver failure.
    """
    r = box.dim
    B = cp.Variable((r, r), PSD=True)
    d = cp.Variable(r)
    cons = []
    for row in rows:
        if np.linalg.norm(row.a) < 1e-12:
            if row.b < margin:
                raise ValueError("region contains an unsatisfiable row")
            continue
        cons.append(cp.norm(B @ row.a, 2) + row.a @ d <= row.b - margin)
    for i in range(r):
        e = np.zeros(r)
        e[i] = 1.0
        cons.append(cp.norm(B @ e, 2) + d[i] <= box.upper[i])
        cons.append(cp.norm(B @ e, 2) - d[i] <= -box.lower[i])
    prob = cp.Problem(cp.Maximize(cp.log_det(B)), cons)
    try:
        prob.solve(solver="CLARABEL")
    except cp.error.SolverError:
        prob.solve(solver="SCS", max_iters=20000)
    if prob.status not in ("optimal", "optimal_inaccurate") or B.value is None:
        return _analytic_center_fallback(rows, box, margin)
    Bv = np.asarray(B.value)
    Bv = (Bv + Bv.T) / 2.0
    sign, logdet = np.linalg.slogdet(Bv)
    if sign <= 0:
        return _analytic_center_fallback(rows, box, margin)
    return np.asarray(d.value), Bv, float(logdet)


def _analytic_center_fallback(rows, box, margin):
    """Log-barrier center when the MVE solve fails; the shape matrix is a
    crude inverse-Hessian surrogate, flagged by callers via logdet = -inf."""
    r = box.dim
    A_list, b_list = [], []
    for row in rows:
        if np.linalg.norm(row.a) >= 1e-12:
            A_list.append(row.a)
            b_list.append(row.b - margin)
    for i in range(r):
        e = np.zeros(r)
        e[i] = 1.0
        A_list.append(e)
        b_list.append(box.upper[i])
        A_list.append(-e)
        b_list.append(-box.lower[i])
    A = np.array(A_list)
    b = np.array(b_list)

    # strictly feasible start from the slack-max LP
    c_lp = np.zeros(r + 1)
    c_lp[-1] = -1.0
    res = linprog(c_lp, A_ub=np.hstack([A, np.ones((len(b), 1))]), b_ub=b,
                  bounds=[(None, None)] * r + [(0, None)], method="highs")
    if not res.success or res.x[-1] <= 0:
        raise ValueError("region is empty or lower-dimensional")
    x0 = res.x[:r]

    def barrier(c):
        s = b - A @ c
        if np.any(s <= 0):
            return np.inf
        return -np.sum(np.log(s))

    out = minimize(barrier, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    center = out.x if out.success else x0
    s = b - A @ center
    H = (A / s[:, None]).T @ (A / s[:, None])
    Bv = np.linalg.cholesky(np.linalg.inv(H + 1e-12 * np.eye(r)))
    return center, Bv, -np.inf


def find_candidate(region: CandidateRegion, cfg: LearnerConfig
                   ) -> Union[Candidate, Empty, Converged]:
    """Propose the next coefficient vector, or report that the region is
    empty / too small to contain a delta-robust candidate."""
    A, b = region.row_matrix()
    r = region.dim
    # strict-feasibility LP: max t s.t. A c + t <= b, c in box, t >= margin
    c_lp = np.zeros(r + 1)
    c_lp[-1] = -1.0
    if len(b):
        if np.any((np.linalg.norm(A, axis=1) < 1e-12) & (b < cfg.margin)):
            return Empty()
        A_ub = np.hstack([A, np.ones((len(b), 1))])
        res = linprog(c_lp, A_ub=A_ub, b_ub=b,
                      bounds=[(lo, hi) for lo, hi in
                              zip(region.box.lower, region.box.upper)] + [(cfg.margin, None)],
                      method="highs")
        if not res.success:
            return Empty()
    if cfg.strategy == "ellipsoid":
        return _find_candidate_ellipsoid(region, cfg)
    if region._mve_cache is None:
        region._mve_cache = mve(region.rows, region.box, margin=0.0)
    d, B, logdet = region._mve_cache
    radius = float(np.linalg.norm(B, 2))
    if radius < cfg.delta:
        return Converged(radius)
    return Candidate(np.asarray(d))


def _find_candidate_ellipsoid(region: CandidateRegion, cfg: LearnerConfig):
    """Alternate proposal: run central-cut updates on the bounding ellipsoid
    until its center satisfies every stored row."""
    center, P = region.ellipsoid
    r = region.dim
    for _ in range(20000):
        # radius surrogate: largest semi-axis
        radius = float(np.sqrt(np.linalg.eigvalsh(P).max()))
        if radius < cfg.delta:
            return Converged(radius)
        A, b = region.row_matrix()
        viol = None
        if len(b):
            slack = b - A @ center
            worst = int(np.argmin(slack))
            if slack[worst] < cfg.margin:
                viol = region.rows[worst]
        if viol is None:
            for i in range(r):
                e = np.zeros(r)
                e[i] = 1.0
                if center[i] > region.box.upper[i]:
                    viol = ConstraintRow(e, region.box.upper[i], "box")
                    break
                if center[i] < region.box.lower[i]:
                    viol = ConstraintRow(-e, -region.box.lower[i], "box")
                    break
        if viol is None:
            region.ellipsoid = (center, P)
            return Candidate(center.copy())
        center, P = ellipsoid_step((center, P), viol)
    return Empty()


def ellipsoid_step(E: tuple[np.ndarray, np.ndarray],
                   row: ConstraintRow) -> tuple[np.ndarray, np.ndarray]:
    """Central-cut update: shrink E = {c : (c-x)^T P^-1 (c-x) <= 1} against
    the halfspace a^T c <= a^T x through its center. Log-volume drops by at
    least 1/(2r)."""
    x, P = E
    a = row.a
    r = len(x)
    Pa = P @ a
    denom = float(a @ Pa)
    if denom <= 0:
        raise ValueError("shape matrix lost positive definiteness")
    g = Pa / math.sqrt(denom)
    if r == 1:
        x_new = x - 0.5 * g
        P_new = P / 4.0
        return x_new, P_new
    x_new = x - g / (r + 1.0)
    P_new = (r * r / (r * r - 1.0)) * (P - (2.0 / (r + 1.0)) * np.outer(g, g))
    P_new = (P_new + P_new.T) / 2.0
    if np.linalg.eigvalsh(P_new).min() <= 0:
        raise ValueError("shape matrix lost positive definiteness")
    return x_new, P_new


def ellipsoid_logvol(P: np.ndarray) -> float:
    """Log-volume of {x : x^T P^-1 x <= 1} up to the unit-ball constant."""
    sign, logdet = np.linalg.slogdet(P)
    if sign <= 0:
        raise ValueError("shape matrix not positive definite")
    return 0.5 * logdet
