"""CLF verification: Farkas-lemma input elimination, moment/SDP relaxation
with counterexample extraction, and an independent sampling falsifier.

Layout of the moment programs
-----------------------------
All programs work in box-scaled coordinates (the safe-set box mapped into
[-1, 1]^n) for conditioning. A candidate fails the decrease condition at x
iff the Lie derivative stays nonnegative for every input vertex, so the
check decomposes over the vertex regions of the input polytope (sign
orthants of the channel terms for interval inputs). Each region runs two
moment feasibility programs:

* a far program (mass-normalized, states bounded away from the origin) and
* a near program (second-moment-normalized with the origin-exclusion mass
  cap), where violation margins are measured relative to ||x||^2 so that
  the quadratic vanishing of Lie derivatives at the origin does not drown
  the decision in solver tolerance.

Both carry Lasserre localizing matrices for every constraint row plus the
redundant box self-products, which is what makes infeasibility (the Valid
verdict) certifiable at low relaxation orders; orders escalate up to the
configured degree only when a feasible layer needs double-checking.
Witnesses are rescaled back to original coordinates and normalized to
unit mass. The sampling falsifier runs first, so counterexamples are
genuine states whenever one is findable; the SDP layer is the certificate
of validity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize

from .dynamics import ProblemInstance, lie_decompose
from .poly import Monomial, Polynomial, monomial_basis
from .sets import Box, InputPolytope

__all__ = [
    "VerifierConfig",
    "MomentWitness",
    "Valid",
    "Counterexample",
    "Verdict",
    "VerificationError",
    "farkas_feasible",
    "check_positivity",
    "check_decrease",
    "verify",
    "project",
    "grid_falsify",
    "moment_eval",
    "required_degree",
]


class VerificationError(RuntimeError):
    """Raised when no solver produced a conclusive verdict; never silently
    mapped to Valid."""


@dataclass
class VerifierConfig:
    D_V: int
    rho: Optional[float] = None          # defaults to problem.rho
    feas_tol: float = 1e-7               # relative strict-inequality margin
    severity: bool = False               # maximize violation instead of any
    near_radius: float = 0.25            # near/far split in scaled coords
    grid_density: Optional[int] = None   # falsifier density (per axis)
    reach_while_stay: bool = False

    def __post_init__(self):
        if self.D_V < 1:
            raise ValueError("D_V must be >= 1")
        if self.feas_tol <= 0:
            raise ValueError("feas_tol must be positive")


def required_degree(problem: ProblemInstance) -> int:
    """Half the max degree among basis functions and their Lie derivatives."""
    deg = max(g.degree for g in problem.basis)
    for g in problem.basis:
        dec = lie_decompose(g, problem.system)
        deg = max(deg, dec.a.degree, *(b.degree for b in dec.b))
    return (deg + 1) // 2


# ---------------------------------------------------------------------------
# moment vectors and witnesses


class MomentWitness:
    """Pseudo-moment counterexample: vector y over monomials up to twice the
    witness degree (unit mass, moment-structured), the PSD moment matrix Z
    it induces, nonnegative multipliers lam for decrease witnesses, and the
    failure kind."""

    def __init__(self, n: int, degree: int, y: np.ndarray,
                 lam: Optional[np.ndarray], kind: str):
        self.n = n
        self.degree = degree
        self.monomials = monomial_basis(n, 2 * degree)
        y = np.asarray(y, dtype=float)
        if y.shape != (len(self.monomials),):
            raise ValueError(f"moment vector has shape {y.shape}, expected "
                             f"({len(self.monomials)},)")
        if abs(y[0] - 1.0) > 1e-9:
            raise ValueError("moment vector must be normalized to y_0 = 1")
        self.y = y
        self._index = {m: k for k, m in enumerate(self.monomials)}
        self.basis = monomial_basis(n, degree)
        self.lam = None if lam is None else np.asarray(lam, dtype=float)
        self.kind = kind

    @staticmethod
    def rank_one(x: Sequence[float], degree: int, lam=None,
                 kind: str = "decrease") -> "MomentWitness":
        x = np.asarray(x, dtype=float)
        n = len(x)
        monos = monomial_basis(n, 2 * degree)
        y = np.array([m.eval(x) for m in monos])
        return MomentWitness(n, degree, y, lam, kind)

    @property
    def Z(self) -> np.ndarray:
        L = len(self.basis)
        Z = np.empty((L, L))
        for i in range(L):
            for j in range(i, L):
                Z[i, j] = Z[j, i] = self.y[self._index[self.basis[i] * self.basis[j]]]
        return Z

    def linear_moments(self) -> np.ndarray:
        return np.array([self.y[self._index[Monomial(((i, 1),))]]
                         for i in range(self.n)])

    def eval_poly(self, p: Polynomial) -> float:
        """Apply the pseudo-moment functional to a polynomial."""
        out = 0.0
        for m, c in p.terms.items():
            k = self._index.get(m)
            if k is None:
                raise ValueError(f"monomial {m} of degree {m.degree} exceeds "
                                 f"witness degree {2 * self.degree}")
            out += c * self.y[k]
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "degree": self.degree, "kind": self.kind,
                "y": self.y.tolist(),
                "lam": None if self.lam is None else self.lam.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "MomentWitness":
        lam = None if d.get("lam") is None else np.asarray(d["lam"], float)
        return MomentWitness(d["n"], d["degree"], np.asarray(d["y"], float),
                             lam, d["kind"])


def moment_eval(witness: MomentWitness, p: Polynomial) -> float:
    return witness.eval_poly(p)


def project(witness: MomentWitness, box: Box) -> np.ndarray:
    """Degree-1 moment entries clamped into the sampling box."""
    return box.clamp(witness.linear_moments())


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Counterexample:
    witness: MomentWitness

    @property
    def kind(self) -> str:
        return self.witness.kind


Verdict = Union[Valid, Counterexample]


# ---------------------------------------------------------------------------
# Farkas elimination


def farkas_feasible(a0: float, a: Sequence[float], U: InputPolytope):
    """Decide whether a0 + a^T u >= 0 for all u in U, by LP duality:
    feasible iff exists lam >= 0 with A^T lam = a and b^T lam >= -a0.
    Returns ("feasible", lam) or ("infeasible", None)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (U.m,):
        raise ValueError(f"a has shape {a.shape}, expected ({U.m},)")
    if U.m == 0:
        return ("feasible", np.zeros(0)) if a0 >= 0 else ("infeasible", None)
    l = len(U.b)
    res = linprog(-U.b, A_eq=U.A.T, b_eq=a, bounds=[(0, None)] * l,
                  method="highs")
    if res.status == 3:
        # b^T lam unbounded above: some multiplier clears any -a0
        res2 = linprog(np.zeros(l), A_eq=U.A.T, b_eq=a,
                       bounds=[(0, None)] * l, method="highs")
        return ("feasible", res2.x)
    if not res.success:
        if res.status == 2:
            return ("infeasible", None)
        raise VerificationError(f"Farkas LP failed with status {res.status}")
    if -res.fun >= -a0 - 1e-9 * (1 + abs(a0)):
        return ("feasible", res.x)
    return ("infeasible", None)


def _multipliers_for(tbar: np.ndarray, U: InputPolytope) -> np.ndarray:
    """lam >= 0 with A^T lam = tbar and b^T lam maximal (witness bookkeeping)."""
    if U.m == 0:
        return np.zeros(0)
    res = linprog(-U.b, A_eq=U.A.T, b_eq=tbar, bounds=[(0, None)] * len(U.b),
                  method="highs")
    if res.success:
        return res.x
    from scipy.optimize import nnls

    lam, _ = nnls(U.A.T, tbar)
    return lam


# ---------------------------------------------------------------------------
# scaled problem context


class _Scaled:
    """Problem data mapped into near-unit coordinates x = diag(s) * xt."""

    def __init__(self, problem: ProblemInstance):
        self.problem = problem
        n = problem.system.n
        self.n = n
        box = problem.S_box
        self.s = np.maximum(np.abs(box.lower), np.abs(box.upper))
        self.s[self.s == 0] = 1.0
        self.lo = box.lower / self.s
        self.hi = box.upper / self.s
        self.s_rows = [(-r).substitute_scaled(self.s) for r in problem.S.constraints]
        self.box_rows = []
        for i in range(n):
            xi = Polynomial.variable(i, n)
            self.box_rows.append(self.hi[i] - xi)
            self.box_rows.append(xi - self.lo[i])
            self.box_rows.append((self.hi[i] - xi) * (xi - self.lo[i]))
        self.normsq = Polynomial.zero(n)
        for i in range(n):
            self.normsq = self.normsq + Polynomial.variable(i, n) ** 2

    def scale_poly(self, p: Polynomial) -> Polynomial:
        return p.substitute_scaled(self.s)

    def unscale_moments(self, y: np.ndarray, monos: Sequence[Monomial]) -> np.ndarray:
        out = y.copy()
        for k, m in enumerate(monos):
            f = 1.0
            for i, p in m.powers:
                f *= self.s[i] ** p
            out[k] *= f
        return out


# ---------------------------------------------------------------------------
# core moment program


class _MomentProgram:
    """One relaxation layer: moment matrix plus localized constraint rows."""

    def __init__(self, n: int, D: int):
        self.n = n
        self.D = D
        self.monos = monomial_basis(n, 2 * D)
        self.index = {m: k for k, m in enumerate(self.monos)}
        self.K = len(self.monos)
        self.y = cp.Variable(self.K)
        self.cons = []
        self._add_loc(Polynomial.constant(1.0, n), D)

    def lvec(self, p: Polynomial) -> np.ndarray:
        v = np.zeros(self.K)
        for m, c in p.terms.items():
            v[self.index[m]] += c
        return v

    def _add_loc(self, mult: Polynomial, order: int):
        bas = monomial_basis(self.n, order)
        Lb = len(bas)
        M = cp.Variable((Lb, Lb), symmetric=True)
        rows, cols = np.triu_indices(Lb)
        dr, dc, dv = [], [], []
        for t, (i, j) in enumerate(zip(rows, cols)):
            for m, c in mult.terms.items():
                mm = m * bas[i] * bas[j]
                dr.append(t)
                dc.append(self.index[mm])
                dv.append(c)
        G = sp.csr_matrix((dv, (dr, dc)), shape=(len(rows), self.K))
        self.cons.append(M[rows, cols] == G @ self.y)
        self.cons.append(M >> 0)

    def add_row(self, g: Polynomial):
        """Constrain E[g] >= 0 and, when the order allows, M(g y) >= 0."""
        if g.is_zero():
            return
        self.cons.append(self.lvec(g) @ self.y >= 0)
        order = self.D - (g.degree + 1) // 2
        if order >= 1:
            self._add_loc(g, order)

    def solve(self, objective: Optional[np.ndarray] = None,
              maximize: bool = True):
        """-> (status, value, y) with status in {feasible, infeasible, error}."""
        if objective is None:
            obj = cp.Minimize(0)
        else:
            expr = objective @ self.y
            obj = cp.Maximize(expr) if maximize else cp.Minimize(expr)
        prob = cp.Problem(obj, self.cons)
        for solver, opts in (("CLARABEL", {}),
                             ("SCS", {"max_iters": 20000, "eps": 1e-8})):
            try:
                prob.solve(solver=solver, **opts)
            except cp.error.SolverError:
                continue
            if prob.status in ("optimal", "optimal_inaccurate"):
                return "feasible", float(prob.value), np.asarray(self.y.value)
            if prob.status in ("infeasible", "infeasible_inaccurate"):
                return "infeasible", None, None
            if prob.status in ("unbounded", "unbounded_inaccurate"):
                return "feasible", math.inf, None
        return "error", None, None


# ---------------------------------------------------------------------------
# sampling falsifier


def _grid_points(problem: ProblemInstance, density: int) -> np.ndarray:
    X = problem.S_box.grid(density)
    mask = problem.S.contains_many(X, tol=1e-9)
    mask &= (X ** 2).sum(axis=1) >= problem.rho ** 2
    return X[mask]


def _default_density(n: int) -> int:
    return {1: 1001, 2: 201, 3: 41}.get(n, 17)


def _min_lie_many(V: Polynomial, problem: ProblemInstance,
                  X: np.ndarray) -> np.ndarray:
    dec = lie_decompose(V, problem.system)
    a = dec.a.eval_many(X)
    if problem.system.m == 0:
        return a
    bs = np.stack([b.eval_many(X) for b in dec.b], axis=1)
    verts = problem.U.vertices()
    return a + (bs @ verts.T).min(axis=1)


def grid_falsify(V: Polynomial, problem: ProblemInstance,
                 density: Optional[int] = None,
                 pos_tol: float = 0.0, dec_tol: float = 0.0
                 ) -> Optional[np.ndarray]:
    """Scan a uniform grid over S_box intersected with S minus the excluded
    ball; return a state where V(x) <= pos_tol or the vertex-minimized Lie
    derivative is >= dec_tol, else None."""
    density = density or _default_density(problem.system.n)
    X = _grid_points(problem, density)
    if len(X) == 0:
        return None
    v = V.eval_many(X)
    k = int(np.argmin(v))
    if v[k] <= pos_tol:
        return X[k]
    ml = _min_lie_many(V, problem, X)
    k = int(np.argmax(ml))
    if ml[k] >= dec_tol:
        return X[k]
    return None


def _polish(fun, x0: np.ndarray, problem: ProblemInstance) -> np.ndarray:
    """Deterministic local refinement clamped to the box (Nelder-Mead copes
    with the vertex-min kinks)."""
    box = problem.S_box
    out = minimize(lambda x: fun(box.clamp(x)), x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return box.clamp(out.x)


def _admissible(problem, x) -> bool:
    return (problem.S.contains(x, tol=1e-9)
            and np.linalg.norm(x) >= problem.rho)


def _falsify_positivity(V, problem, density) -> Optional[np.ndarray]:
    X = _grid_points(problem, density)
    if len(X) == 0:
        return None
    v = V.eval_many(X)
    best, best_val = None, np.inf
    for s in X[np.argsort(v)[:3]]:
        x = _polish(V.eval, s, problem)
        if _admissible(problem, x) and V.eval(x) < best_val:
            best, best_val = x, V.eval(x)
    if best is not None and best_val <= 0.0:
        return best
    return None


def _falsify_decrease(V, problem, density) -> Optional[np.ndarray]:
    X = _grid_points(problem, density)
    if len(X) == 0:
        return None
    ml = _min_lie_many(V, problem, X)

    def neg_min_lie(x):
        return -_min_lie_many(V, problem, x[None, :])[0]

    best, best_val = None, -np.inf
    for s in X[np.argsort(-ml)[:3]]:
        x = _polish(neg_min_lie, s, problem)
        if _admissible(problem, x) and -neg_min_lie(x) > best_val:
            best, best_val = x, -neg_min_lie(x)
    if best is not None and best_val >= 0.0:
        return best
    return None


# ---------------------------------------------------------------------------
# verdicts


def _witness_from_y(scaled: _Scaled, prog: _MomentProgram, y: np.ndarray,
                    lam, kind: str) -> MomentWitness:
    """Rescale a scaled-coordinate moment vector to original coordinates and
    normalize to unit mass; the witness keeps the relaxation order that
    produced it."""
    y = scaled.unscale_moments(y, prog.monos)
    if y[0] <= 1e-12:
        raise VerificationError("witness mass vanished; cannot normalize")
    return MomentWitness(scaled.n, prog.D, y / y[0], lam, kind)


def _ladder(cfg: VerifierConfig, row_deg: int) -> list[int]:
    start = min(max(2, (row_deg + 1) // 2), max(cfg.D_V, 2))
    top = max(start, cfg.D_V)
    return [start] if top == start else [start, top]


def check_positivity(V: Polynomial, problem: ProblemInstance,
                     cfg: VerifierConfig) -> Verdict:
    """Search for pseudo-moments placing V at or below zero on S off the
    excluded ball; Valid when the relaxed minimum clears the relative
    margin (second moments normalized to 1)."""
    if V.degree > 2 * cfg.D_V:
        raise ValueError(f"deg V = {V.degree} exceeds 2*D_V = {2 * cfg.D_V}")
    rho = cfg.rho if cfg.rho is not None else problem.rho
    density = cfg.grid_density or _default_density(problem.system.n)
    x_direct = _falsify_positivity(V, problem, density)
    if x_direct is not None:
        return Counterexample(MomentWitness.rank_one(x_direct, cfg.D_V,
                                                     kind="positivity"))
    scaled = _Scaled(problem)
    Vs = scaled.scale_poly(V)
    rho_t = rho / float(np.max(scaled.s))
    degrees = _ladder(cfg, V.degree)
    for D in degrees:
        prog = _MomentProgram(scaled.n, D)
        prog.cons.append(prog.lvec(scaled.normsq) @ prog.y == 1.0)
        prog.cons.append(prog.y[0] >= 0)
        prog.cons.append(prog.y[0] <= 1.0 / rho_t ** 2)
        for g in scaled.s_rows + scaled.box_rows:
            prog.add_row(g)
        status, val, y = prog.solve(prog.lvec(Vs), maximize=False)
        if status == "error":
            raise VerificationError("positivity relaxation: no conclusive verdict")
        if status == "infeasible" or (val is not None and val >= cfg.feas_tol):
            return Valid()
        if D == degrees[-1]:
            if y is None:
                raise VerificationError("positivity relaxation: witness missing")
            return Counterexample(_witness_from_y(scaled, prog, y, None,
                                                  "positivity"))
    raise VerificationError("positivity ladder exhausted inconclusively")


def _vertex_regions(U: InputPolytope, b_s: list[Polynomial]):
    """(vertex input, sign/comparison rows over scaled coordinates) pairs
    covering every minimizer of an input-affine function over U."""
    if U.m == 0:
        return [(np.zeros(0), [])]
    if U.interval is not None:
        lo, hi = U.interval
        regions = []
        for signs in itertools.product((1.0, -1.0), repeat=U.m):
            u = np.where(np.array(signs) > 0, lo, hi)
            rows = [float(s) * b for s, b in zip(signs, b_s) if not b.is_zero()]
            regions.append((u, rows))
        return regions
    verts = U.vertices()
    regions = []
    for v in verts:
        rows = []
        for vp in verts:
            if np.allclose(vp, v):
                continue
            row = Polynomial.zero(b_s[0].nvars)
            for dvi, b in zip(vp - v, b_s):
                row = row + float(dvi) * b
            rows.append(row)
        regions.append((v, rows))
    return regions


def check_decrease(V: Polynomial, problem: ProblemInstance,
                   cfg: VerifierConfig) -> Verdict:
    """Search for states where no admissible input makes V decrease with the
    relative margin, via vertex-region near/far moment programs; Valid when
    every region is certified empty."""
    rho = cfg.rho if cfg.rho is not None else problem.rho
    density = cfg.grid_density or _default_density(problem.system.n)
    x_direct = _falsify_decrease(V, problem, density)
    if x_direct is not None:
        dec0 = lie_decompose(V, problem.system)
        tbar = np.array([b.eval(x_direct) for b in dec0.b])
        return Counterexample(MomentWitness.rank_one(
            x_direct, cfg.D_V, lam=_multipliers_for(tbar, problem.U),
            kind="decrease"))
    scaled = _Scaled(problem)
    dec = lie_decompose(V, problem.system)
    a_s = scaled.scale_poly(dec.a)
    b_s = [scaled.scale_poly(b) for b in dec.b]
    rho_t = rho / float(np.max(scaled.s))
    r0 = cfg.near_radius
    eps = cfg.feas_tol

    for u_vert, region_rows in _vertex_regions(problem.U, b_s):
        viol = a_s
        for ui, bi in zip(u_vert, b_s):
            viol = viol + float(ui) * bi
        vm = viol - eps * scaled.normsq
        row_deg = max([vm.degree] + [g.degree for g in region_rows] + [2])
        degrees = _ladder(cfg, row_deg)

        def build(part: str, D: int) -> _MomentProgram:
            prog = _MomentProgram(scaled.n, D)
            if part == "far":
                prog.cons.append(prog.y[0] == 1.0)
                prog.add_row(scaled.normsq - r0 ** 2)
            else:
                prog.cons.append(prog.lvec(scaled.normsq) @ prog.y == 1.0)
                prog.cons.append(prog.y[0] >= 0)
                prog.cons.append(prog.y[0] <= 1.0 / rho_t ** 2)
                prog.add_row(r0 ** 2 - scaled.normsq)
            for g in scaled.s_rows + scaled.box_rows + region_rows:
                prog.add_row(g)
            prog.add_row(vm)
            return prog

        found = None
        for D in degrees:
            prog = build("far", D)
            objective = prog.lvec(vm) if cfg.severity else None
            status, _, y = prog.solve(objective)
            if status == "error":
                raise VerificationError(f"decrease relaxation (far, D={D})")
            if status == "infeasible":
                break
            if D == degrees[-1]:
                if y is None:
                    _, _, y = prog.solve(prog.lvec(vm))
                if y is not None:
                    found = (prog, y)
        if found is None:
            prog = build("near", degrees[0])
            objective = prog.lvec(vm) if cfg.severity else None
            status, _, y = prog.solve(objective)
            if status == "error":
                raise VerificationError("decrease relaxation (near)")
            if status == "feasible":
                if y is None:
                    _, _, y = prog.solve(prog.lvec(vm))
                if y is not None:
                    found = (prog, y)
        if found is not None:
            prog, y = found
            w = _witness_from_y(scaled, prog, y, None, "decrease")
            tbar = np.array([w.eval_poly(b) for b in dec.b])
            w.lam = _multipliers_for(tbar, problem.U)
            return Counterexample(w)
    return Valid()


def _check_boundary(V, problem, cfg) -> Verdict:
    """Reach-while-stay: V must exceed beta on every safe-set boundary face."""
    rws = problem.reach_while_stay
    scaled = _Scaled(problem)
    Vs = scaled.scale_poly(V)
    for rb in rws.boundary:
        rbs = (-rb).substitute_scaled(scaled.s)
        D = max(2, (max(Vs.degree, rbs.degree) + 1) // 2)
        prog = _MomentProgram(scaled.n, D)
        prog.cons.append(prog.y[0] == 1.0)
        for g in scaled.s_rows + scaled.box_rows:
            prog.add_row(g)
        prog.cons.append(prog.lvec(rbs) @ prog.y == 0)  # on the face
        margin = Polynomial.constant(rws.beta - cfg.feas_tol, scaled.n) - Vs
        prog.add_row(margin)
        status, _, y = prog.solve()
        if status == "error":
            raise VerificationError("boundary relaxation: no verdict")
        if status == "feasible":
            if y is None:
                _, _, y = prog.solve(prog.lvec(margin))
            return Counterexample(_witness_from_y(scaled, prog, y, None,
                                                  "boundary"))
    return Valid()


def _check_init(V, problem, cfg) -> Verdict:
    """Reach-while-stay: V must stay below beta on the initial set."""
    rws = problem.reach_while_stay
    scaled = _Scaled(problem)
    Vs = scaled.scale_poly(V)
    rows = [(-q).substitute_scaled(scaled.s) for q in rws.init_set.constraints]
    D = max(2, (max([Vs.degree] + [r.degree for r in rows]) + 1) // 2)
    prog = _MomentProgram(scaled.n, D)
    prog.cons.append(prog.y[0] == 1.0)
    for g in scaled.s_rows + scaled.box_rows + rows:
        prog.add_row(g)
    margin = Vs - Polynomial.constant(rws.beta + cfg.feas_tol, scaled.n)
    prog.add_row(margin)
    status, _, y = prog.solve()
    if status == "error":
        raise VerificationError("init-set relaxation: no verdict")
    if status == "feasible":
        if y is None:
            _, _, y = prog.solve(prog.lvec(margin))
        return Counterexample(_witness_from_y(scaled, prog, y, None, "init"))
    return Valid()


def verify(V: Polynomial, problem: ProblemInstance,
           cfg: VerifierConfig) -> Verdict:
    """Full CLF check: positivity first, then decrease; in reach-while-stay
    mode also the boundary and initial-set level conditions. The first
    counterexample wins."""
    verdict = check_positivity(V, problem, cfg)
    if isinstance(verdict, Counterexample):
        return verdict
    verdict = check_decrease(V, problem, cfg)
    if isinstance(verdict, Counterexample):
        return verdict
    if cfg.reach_while_stay and problem.reach_while_stay is not None:
        verdict = _check_boundary(V, problem, cfg)
        if isinstance(verdict, Counterexample):
            return verdict
        verdict = _check_init(V, problem, cfg)
        if isinstance(verdict, Counterexample):
            return verdict
    return Valid()
