"""Control-affine system models, Lie-derivative decomposition and the
built-in benchmark library.

All benchmarks stabilize the origin: coordinates are shifted so x = 0 is a
controlled equilibrium, and trig/rational terms are replaced by fixed
low-degree polynomial approximations over the safe set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .poly import LieDecomposition, Polynomial, monomial_basis, poly_dot
from .sets import (Box, InputPolytope, SemialgebraicSet, box_to_semialgebraic,
                   interval_input_polytope)

__all__ = [
    "ControlAffineSystem",
    "ReachWhileStay",
    "ProblemInstance",
    "BENCHMARK_NAMES",
    "lie_decompose",
    "load_benchmark",
    "quadratic_basis",
]

BENCHMARK_NAMES = ("double_integrator", "tora", "bicycle", "inverted_pendulum")


class _PackedPolys:
    """Batched evaluator for a fixed list of polynomials sharing the state
    dimension: one exponent matrix, one scatter-add per point."""

    def __init__(self, polys: Sequence[Polynomial], n: int):
        self.count = len(polys)
        exps, coefs, owner = [], [], []
        for k, p in enumerate(polys):
            for mono, c in p.terms.items():
                exps.append(mono.exponents(n))
                coefs.append(c)
                owner.append(k)
        self.exps = np.asarray(exps, dtype=np.int64).reshape(len(coefs), n)
        self.coefs = np.asarray(coefs, dtype=float)
        self.owner = np.asarray(owner, dtype=np.int64)

    def eval(self, x: np.ndarray) -> np.ndarray:
        if len(self.coefs) == 0:
            return np.zeros(self.count)
        vals = self.coefs * np.prod(x[None, :] ** self.exps, axis=1)
        return np.bincount(self.owner, weights=vals, minlength=self.count)


class ControlAffineSystem:
    """xdot = f0(x) + sum_i channels[i](x) * u_i with polynomial fields."""

    def __init__(self, f0: Sequence[Polynomial], channels: Sequence[Sequence[Polynomial]]):
        self.f0 = tuple(f0)
        self.channels = tuple(tuple(ch) for ch in channels)
        self.n = len(self.f0)
        self.m = len(self.channels)
        for p in self.f0:
            if p.nvars != self.n:
                raise ValueError("f0 component nvars mismatch")
        for ch in self.channels:
            if len(ch) != self.n:
                raise ValueError("channel must have n components")
            for p in ch:
                if p.nvars != self.n:
                    raise ValueError("channel component nvars mismatch")
        self._jac_cache = None
        self._packed_vals = None
        self._packed_jac = None

    def _vals(self) -> _PackedPolys:
        if self._packed_vals is None:
            polys = list(self.f0)
            for ch in self.channels:
                polys.extend(ch)
            self._packed_vals = _PackedPolys(polys, self.n)
        return self._packed_vals

    def _jac_vals(self) -> _PackedPolys:
        if self._packed_jac is None:
            jf0, jch = self.jacobians()
            polys = [g for row in jf0 for g in row]
            for jrow in jch:
                polys.extend(g for row in jrow for g in row)
            self._packed_jac = _PackedPolys(polys, self.n)
        return self._packed_jac

    def vector_field(self, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.shape != (self.n,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.n},)")
        if u.shape != (self.m,):
            raise ValueError(f"input has shape {u.shape}, expected ({self.m},)")
        vals = self._vals().eval(x)
        out = vals[:self.n].copy()
        for i in range(self.m):
            ui = u[i]
            if ui != 0.0:
                out += ui * vals[self.n * (i + 1):self.n * (i + 2)]
        return out

    def input_matrix(self, x: Sequence[float]) -> np.ndarray:
        """B(x): n x m matrix of channel evaluations."""
        x = np.asarray(x, dtype=float)
        vals = self._vals().eval(x)
        return vals[self.n:].reshape(self.m, self.n).T if self.m else \
            np.zeros((self.n, 0))

    def jacobians(self):
        """Cached polynomial Jacobians: d f0 / dx and d channel_j / dx."""
        if self._jac_cache is None:
            jf0 = [p.grad() for p in self.f0]
            jch = [[p.grad() for p in ch] for ch in self.channels]
            self._jac_cache = (jf0, jch)
        return self._jac_cache

    def state_jacobian(self, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        """A(x, u) = d/dx [f0(x) + sum u_i f_i(x)]."""
        x = np.asarray(x, dtype=float)
        nn = self.n * self.n
        vals = self._jac_vals().eval(x)
        A = vals[:nn].reshape(self.n, self.n).copy()
        for i, ui in enumerate(np.atleast_1d(u)):
            if ui != 0.0:
                A += ui * vals[nn * (i + 1):nn * (i + 2)].reshape(self.n, self.n)
        return A

    def stage_eval(self, x: np.ndarray, u: np.ndarray):
        """(f, A, B) at one point: field value plus both Jacobians."""
        vals = self._vals().eval(x)
        f = vals[:self.n].copy()
        B = vals[self.n:].reshape(self.m, self.n).T if self.m else \
            np.zeros((self.n, 0))
        if self.m:
            f += B @ u
        nn = self.n * self.n
        jvals = self._jac_vals().eval(x)
        A = jvals[:nn].reshape(self.n, self.n).copy()
        for i in range(self.m):
            ui = u[i]
            if ui != 0.0:
                A += ui * jvals[nn * (i + 1):nn * (i + 2)].reshape(self.n, self.n)
        return f, A, B


def lie_decompose(V: Polynomial, sys: ControlAffineSystem) -> LieDecomposition:
    """Split grad(V) . f(x, u) into drift and per-channel parts."""
    if V.nvars != sys.n:
        raise ValueError(f"V has {V.nvars} variables, system has {sys.n}")
    gV = V.grad()
    a = poly_dot(gV, sys.f0)
    b = tuple(poly_dot(gV, ch) for ch in sys.channels)
    return LieDecomposition(a, b)


@dataclass(frozen=True)
class ReachWhileStay:
    """Optional reach-while-stay data: initial set, safe-set boundary
    polynomials (each r_i = 0 face), and the level beta."""

    init_set: SemialgebraicSet
    boundary: tuple[Polynomial, ...]
    beta: float


@dataclass
class ProblemInstance:
    """A synthesis problem: system, safe set S with enclosing box, input
    polytope U, candidate basis g_1..g_r with box C0 over coefficients, and
    the origin-exclusion radius rho."""

    system: ControlAffineSystem
    S: SemialgebraicSet
    S_box: Box
    U: InputPolytope
    basis: tuple[Polynomial, ...]
    C0: Box
    rho: float
    reach_while_stay: Optional[ReachWhileStay] = None
    name: str = "problem"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.system.n
        if self.S.nvars != n or self.S_box.dim != n:
            raise ValueError("safe set dimension mismatch")
        if self.U.m != self.system.m:
            raise ValueError("input polytope dimension mismatch")
        origin = np.zeros(n)
        for g in self.basis:
            if g.nvars != n:
                raise ValueError("basis nvars mismatch")
            if abs(g.eval(origin)) > 1e-12:
                raise ValueError(f"basis function {g!r} does not vanish at the origin")
        if not self.S.contains(origin, tol=-1e-12):
            raise ValueError("origin must be strictly interior to S")
        if self.C0.dim != len(self.basis):
            raise ValueError("coefficient box dimension must equal basis size")
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    @property
    def r(self) -> int:
        return len(self.basis)

    def candidate(self, c: Sequence[float]) -> Polynomial:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.r,):
            raise ValueError(f"coefficient vector has shape {c.shape}, expected ({self.r},)")
        V = Polynomial.zero(self.system.n)
        for ci, g in zip(c, self.basis):
            V = V + float(ci) * g
        return V


def quadratic_basis(n: int) -> tuple[Polynomial, ...]:
    """All monomials of degree exactly 2, graded-lex ordered; r = n(n+1)/2."""
    return tuple(Polynomial({m: 1.0}, n)
                 for m in monomial_basis(n, 2) if m.degree == 2)


def _default_c0(r: int, halfwidth: float = 100.0) -> Box:
    return Box(-halfwidth * np.ones(r), halfwidth * np.ones(r))


def _default_rho(box: Box) -> float:
    return 0.01 * float(np.min(box.half_widths))


def _odd_fit(fn, degree: int, interval: tuple[float, float], npts: int = 2001):
    """Least-squares fit with odd powers only; returns (coeffs by power, residual)."""
    t = np.linspace(interval[0], interval[1], npts)
    powers = list(range(1, degree + 1, 2))
    Amat = np.stack([t ** p for p in powers], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, fn(t), rcond=None)
    resid = float(np.max(np.abs(Amat @ coef - fn(t))))
    return dict(zip(powers, coef)), resid


def _even_fit(fn, degree: int, interval: tuple[float, float], npts: int = 2001):
    t = np.linspace(interval[0], interval[1], npts)
    powers = list(range(0, degree + 1, 2))
    Amat = np.stack([t ** p for p in powers], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, fn(t), rcond=None)
    resid = float(np.max(np.abs(Amat @ coef - fn(t))))
    return dict(zip(powers, coef)), resid


def _univariate(coeffs: dict[int, float], var: int, n: int) -> Polynomial:
    return Polynomial.from_exp_dict(
        {tuple(p if j == var else 0 for j in range(n)): c for p, c in coeffs.items()}, n)


def _double_integrator() -> ProblemInstance:
    n = 2
    x2 = Polynomial.variable(1, n)
    zero = Polynomial.zero(n)
    one = Polynomial.constant(1.0, n)
    sys = ControlAffineSystem([x2, zero], [[zero, one]])
    box = Box([-1.0, -1.0], [1.0, 1.0])
    basis = quadratic_basis(n)
    return ProblemInstance(
        system=sys, S=box_to_semialgebraic(box), S_box=box,
        U=interval_input_polytope([-1.0], [1.0]),
        basis=basis, C0=_default_c0(len(basis)), rho=_default_rho(box),
        name="double_integrator")


def _tora(eps: float = 0.1) -> ProblemInstance:
    # sin(x3) ~ x3 - x3^3/6 (degree-3 Taylor, accurate on [-2, 2])
    n = 4
    x1, x2, x4 = (Polynomial.variable(i, n) for i in (0, 1, 3))
    sin3 = Polynomial.from_exp_dict({(0, 0, 1, 0): 1.0, (0, 0, 3, 0): -1.0 / 6.0}, n)
    zero = Polynomial.zero(n)
    one = Polynomial.constant(1.0, n)
    sys = ControlAffineSystem(
        [x2, -1.0 * x1 + eps * sin3, x4, zero],
        [[zero, zero, zero, one]])
    box = Box([-1.0, -1.0, -2.0, -1.0], [1.0, 1.0, 2.0, 1.0])
    basis = quadratic_basis(n)
    return ProblemInstance(
        system=sys, S=box_to_semialgebraic(box), S_box=box,
        U=interval_input_polytope([-1.5], [1.5]),
        basis=basis, C0=_default_c0(len(basis)), rho=_default_rho(box),
        name="tora", metadata={"eps": eps, "sin_approx": "x3 - x3^3/6"})


def _bicycle() -> ProblemInstance:
    # states [y, v - 5, theta, sigma]; sin(theta) ~ theta (degree 1);
    # velocity measured as deviation from the target v* = 5 so the origin
    # is the equilibrium
    n = 4
    vstar = 5.0
    v_dev = Polynomial.variable(1, n)
    theta = Polynomial.variable(2, n)
    sigma = Polynomial.variable(3, n)
    zero = Polynomial.zero(n)
    one = Polynomial.constant(1.0, n)
    v_total = v_dev + vstar
    sys = ControlAffineSystem(
        [v_total * theta, zero, v_total * sigma, zero],
        [[zero, one, zero, zero], [zero, zero, zero, one]])
    box = Box([-2.0, -2.0, -1.0, -1.0], [2.0, 2.0, 1.0, 1.0])
    basis = quadratic_basis(n)
    ball = Polynomial.zero(n)
    for i in range(n):
        ball = ball + Polynomial.variable(i, n) ** 2
    rws = ReachWhileStay(
        init_set=SemialgebraicSet((ball - 0.4 ** 2,), n),
        boundary=box_to_semialgebraic(box).constraints,
        beta=1.0)
    return ProblemInstance(
        system=sys, S=box_to_semialgebraic(box), S_box=box,
        U=interval_input_polytope([-10.0, -10.0], [10.0, 10.0]),
        basis=basis, C0=_default_c0(len(basis)), rho=_default_rho(box),
        reach_while_stay=rws,
        name="bicycle",
        metadata={"v_star": vstar, "target_ball": 0.1, "sin_approx": "theta"})


def _inverted_pendulum() -> ProblemInstance:
    # states [x, xdot, theta, thetadot]; m, M, g, l from the benchmark;
    # trig/rational factors fitted by degree-3 polynomials over theta in [-1, 1]
    n = 4
    m, M, g, l = 0.21, 0.815, 9.8, 0.305
    tan_fit, r_tan = _odd_fit(np.tan, 3, (-1.0, 1.0))
    sincos_fit, r_sc = _odd_fit(lambda t: np.sin(t) * np.cos(t), 3, (-1.0, 1.0))
    rat_fit, r_rat = _even_fit(
        lambda t: 1.0 / (4 * (M + m) - 3 * m * np.cos(t) ** 2), 2, (-1.0, 1.0))
    cos_fit, r_cos = _even_fit(np.cos, 2, (-1.0, 1.0))

    theta_var = 2
    tan_p = _univariate(tan_fit, theta_var, n)
    sincos_p = _univariate(sincos_fit, theta_var, n)
    rat_p = _univariate(rat_fit, theta_var, n)
    cos_p = _univariate(cos_fit, theta_var, n)

    drift_acc = (4 * (M + m) * g * tan_p - 3 * m * g * sincos_p) * rat_p
    xdot = Polynomial.variable(1, n)
    thetadot = Polynomial.variable(3, n)
    zero = Polynomial.zero(n)
    sys = ControlAffineSystem(
        [xdot, drift_acc, thetadot, zero],
        [[zero, Polynomial.constant(4.0, n), zero, (-3.0 / l) * cos_p]])
    box = Box([-1.0] * 4, [1.0] * 4)
    basis = quadratic_basis(n)
    ball = Polynomial.zero(n)
    for i in range(n):
        ball = ball + Polynomial.variable(i, n) ** 2
    rws = ReachWhileStay(
        init_set=SemialgebraicSet((ball - 0.1 ** 2,), n),
        boundary=box_to_semialgebraic(box).constraints,
        beta=1.0)
    return ProblemInstance(
        system=sys, S=box_to_semialgebraic(box), S_box=box,
        U=interval_input_polytope([-20.0], [20.0]),
        basis=basis, C0=_default_c0(len(basis)), rho=_default_rho(box),
        reach_while_stay=rws,
        name="inverted_pendulum",
        metadata={"constants": {"m": m, "M": M, "g": g, "l": l},
                  "fit_residuals": {"tan": r_tan, "sin_cos": r_sc,
                                    "rational": r_rat, "cos": r_cos}})


def load_benchmark(name: str, **overrides) -> ProblemInstance:
    """Resolve a benchmark id to a fully populated problem instance.

    Overrides: `eps` (tora coupling), `c0_halfwidth`, `rho`.
    """
    builders = {
        "double_integrator": _double_integrator,
        "tora": lambda: _tora(eps=overrides.get("eps", 0.1)),
        "bicycle": _bicycle,
        "inverted_pendulum": _inverted_pendulum,
    }
    if name not in builders:
        raise KeyError(f"unknown benchmark {name!r}; choose from {BENCHMARK_NAMES}")
    prob = builders[name]()
    if "c0_halfwidth" in overrides:
        prob.C0 = _default_c0(prob.r, float(overrides["c0_halfwidth"]))
    if "rho" in overrides:
        prob.rho = float(overrides["rho"])
    return prob
