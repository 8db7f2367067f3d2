"""Sparse multivariate polynomials with the operations the synthesis
pipeline needs: evaluation, differentiation, Lie-derivative decomposition,
graded-lex monomial bases and symmetric Gram encodings.

Monomials are kept sparse (only nonzero powers stored); polynomials are
term maps with float coefficients. Everything is immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Monomial",
    "Polynomial",
    "GramMatrix",
    "LieDecomposition",
    "monomial_basis",
    "to_gram",
    "gram_to_poly",
]


@dataclass(frozen=True)
class Monomial:
    """Product of variable powers, stored as sorted (index, power) pairs.

    Zero powers are never stored, so the empty tuple is the constant
    monomial 1.
    """

    powers: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        ps = tuple(sorted((int(i), int(p)) for i, p in self.powers if p != 0))
        if any(p < 0 for _, p in ps):
            raise ValueError(f"negative power in monomial: {ps}")
        if any(i < 0 for i, _ in ps):
            raise ValueError(f"negative variable index in monomial: {ps}")
        object.__setattr__(self, "powers", ps)

    @staticmethod
    def from_exponents(exps: Sequence[int]) -> "Monomial":
        return Monomial(tuple((i, int(p)) for i, p in enumerate(exps) if p))

    def exponents(self, nvars: int) -> tuple[int, ...]:
        out = [0] * nvars
        for i, p in self.powers:
            out[i] = p
        return tuple(out)

    @property
    def degree(self) -> int:
        return sum(p for _, p in self.powers)

    def max_var(self) -> int:
        return max((i for i, _ in self.powers), default=-1)

    def __mul__(self, other: "Monomial") -> "Monomial":
        acc = dict(self.powers)
        for i, p in other.powers:
            acc[i] = acc.get(i, 0) + p
        return Monomial(tuple(acc.items()))

    def eval(self, x: Sequence[float]) -> float:
        out = 1.0
        for i, p in self.powers:
            out *= x[i] ** p
        return out

    def grlex_key(self, nvars: int) -> tuple:
        # graded-lex: degree first, then descending exponent tuple so x1
        # precedes x2 inside a degree level
        return (self.degree, tuple(-e for e in self.exponents(nvars)))

    def __repr__(self):
        if not self.powers:
            return "1"
        return "*".join(f"x{i + 1}" + (f"^{p}" if p > 1 else "")
                        for i, p in self.powers)


ONE = Monomial()


class Polynomial:
    """Sparse polynomial: mapping Monomial -> coefficient over nvars variables.

    Coefficients that collect to exactly zero are dropped, so the zero
    polynomial has an empty term map.
    """

    __slots__ = ("terms", "nvars", "_packed")

    def __init__(self, terms: Mapping[Monomial, float], nvars: int):
        clean = {}
        for m, c in terms.items():
            c = float(c)
            if c != 0.0:
                if m.max_var() >= nvars:
                    raise ValueError(f"monomial {m} exceeds nvars={nvars}")
                clean[m] = c
        self.terms: dict[Monomial, float] = clean
        self.nvars = int(nvars)
        self._packed = None

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial({}, nvars)

    @staticmethod
    def constant(c: float, nvars: int) -> "Polynomial":
        return Polynomial({ONE: c}, nvars)

    @staticmethod
    def variable(i: int, nvars: int) -> "Polynomial":
        if not 0 <= i < nvars:
            raise ValueError(f"variable index {i} out of range for nvars={nvars}")
        return Polynomial({Monomial(((i, 1),)): 1.0}, nvars)

    @staticmethod
    def from_exp_dict(d: Mapping[Sequence[int], float], nvars: int) -> "Polynomial":
        return Polynomial({Monomial.from_exponents(e): c for e, c in d.items()}, nvars)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0.0) + c
        return Polynomial(acc, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial({m: c * other for m, c in self.terms.items()}, self.nvars)
        other = self._coerce(other)
        acc: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                acc[m] = acc.get(m, 0.0) + c1 * c2
        return Polynomial(acc, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        out = Polynomial.constant(1.0, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float)):
            return Polynomial.constant(float(other), self.nvars)
        raise TypeError(f"cannot combine Polynomial with {type(other)!r}")

    def __eq__(self, other):
        return (isinstance(other, Polynomial) and self.nvars == other.nvars
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- queries ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def _pack(self):
        # cached (exponent matrix, coefficient vector) for vectorized eval
        if self._packed is None:
            if self.terms:
                exps = np.array([m.exponents(self.nvars) for m in self.terms],
                                dtype=np.int64)
                coef = np.array(list(self.terms.values()), dtype=float)
            else:
                exps = np.zeros((0, self.nvars), dtype=np.int64)
                coef = np.zeros(0)
            self._packed = (exps, coef)
        return self._packed

    def eval(self, x: Sequence[float]) -> float:
        """Evaluate at a point with compensated (fsum) accumulation."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.nvars},)")
        if not self.terms:
            return 0.0
        exps, coef = self._pack()
        vals = coef * np.prod(np.power(x[None, :], exps), axis=1)
        return math.fsum(vals.tolist())

    __call__ = eval

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at an (N, nvars) batch of points."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError(f"batch has shape {X.shape}, expected (N, {self.nvars})")
        exps, coef = self._pack()
        if len(coef) == 0:
            return np.zeros(len(X))
        return np.power(X[:, None, :], exps[None, :, :]).prod(axis=2) @ coef

    def grad(self) -> list["Polynomial"]:
        """Componentwise partial derivatives, one polynomial per variable."""
        out = []
        for i in range(self.nvars):
            acc: dict[Monomial, float] = {}
            for m, c in self.terms.items():
                d = dict(m.powers)
                p = d.get(i, 0)
                if p:
                    d[i] = p - 1
                    dm = Monomial(tuple(d.items()))
                    acc[dm] = acc.get(dm, 0.0) + c * p
            out.append(Polynomial(acc, self.nvars))
        return out

    def substitute_scaled(self, scales: Sequence[float]) -> "Polynomial":
        """Substitute x_i -> scales[i] * x_i."""
        if len(scales) != self.nvars:
            raise ValueError("scales length must equal nvars")
        acc: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            f = c
            for i, p in m.powers:
                f *= scales[i] ** p
            acc[m] = acc.get(m, 0.0) + f
        return Polynomial(acc, self.nvars)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: m.grlex_key(self.nvars)):
            parts.append(f"{self.terms[m]:+g}*{m!r}")
        return " ".join(parts)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric matrix P over a graded-lex monomial basis with
    <P, m(x) m(x)^T> equal to a target polynomial."""

    basis: tuple[Monomial, ...]
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        L = len(self.basis)
        if e.shape != (L, L):
            raise ValueError(f"entries shape {e.shape} does not match basis size {L}")
        if not np.allclose(e, e.T, atol=0.0):
            raise ValueError("Gram matrix must be symmetric")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class LieDecomposition:
    """Input-affine split of a directional derivative:
    grad(V) . f(x, u) = a(x) + sum_i b[i](x) u_i."""

    a: Polynomial
    b: tuple[Polynomial, ...]

    def eval(self, x: Sequence[float], u: Sequence[float]) -> float:
        if len(u) != len(self.b):
            raise ValueError(f"input has length {len(u)}, expected {len(self.b)}")
        return self.a.eval(x) + math.fsum(bi.eval(x) * ui for bi, ui in zip(self.b, u))


def monomial_basis(n: int, D: int) -> list[Monomial]:
    """All monomials in n variables of total degree <= D, graded-lex ordered
    starting from the constant. Length C(n + D, D)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if D < 0:
        raise ValueError("D must be >= 0")
    out: list[Monomial] = []

    def rec(prefix: list[int], remaining: int, var: int):
        if var == n - 1:
            out.append(Monomial.from_exponents(prefix + [remaining]))
            return
        for p in range(remaining, -1, -1):
            rec(prefix + [p], remaining - p, var + 1)

    for d in range(D + 1):
        rec([], d, 0)
    return out


def to_gram(p: Polynomial, D_V: int) -> GramMatrix:
    """Encode p as a symmetric Gram matrix over the degree-D_V basis.

    Each coefficient is placed on the canonical degree-balanced index pair:
    diagonal pairs take the full coefficient, otherwise it is split evenly
    across the graded-lex-least pair (alpha, beta) minimizing
    |deg(alpha) - deg(beta)| and its mirror.
    """
    if p.degree > 2 * D_V:
        raise ValueError(f"degree {p.degree} exceeds 2*D_V = {2 * D_V}")
    basis = monomial_basis(p.nvars, D_V)
    index = {m: k for k, m in enumerate(basis)}
    L = len(basis)
    P = np.zeros((L, L))
    for m, c in p.terms.items():
        best = None
        for k, alpha in enumerate(basis):
            # beta = m / alpha, when it divides
            rem = dict(m.powers)
            ok = True
            for i, pw in alpha.powers:
                r = rem.get(i, 0) - pw
                if r < 0:
                    ok = False
                    break
                rem[i] = r
            if not ok:
                continue
            beta = Monomial(tuple(rem.items()))
            j = index.get(beta)
            if j is None or j < k:
                continue
            key = (abs(alpha.degree - beta.degree), k, j)
            if best is None or key < best[0]:
                best = (key, k, j)
        if best is None:
            raise ValueError(f"monomial {m} not representable in degree-{D_V} basis")
        _, k, j = best
        if k == j:
            P[k, k] += c
        else:
            P[k, j] += c / 2.0
            P[j, k] += c / 2.0
    return GramMatrix(tuple(basis), P)


def gram_to_poly(G: GramMatrix, nvars: int) -> Polynomial:
    """Collapse a Gram matrix back to its polynomial (sums entries over
    alpha + beta = gamma)."""
    acc: dict[Monomial, float] = {}
    L = len(G.basis)
    for k in range(L):
        for j in range(L):
            m = G.basis[k] * G.basis[j]
            acc[m] = acc.get(m, 0.0) + G.entries[k, j]
    return Polynomial(acc, nvars)


def poly_dot(ps: Iterable[Polynomial], qs: Iterable[Polynomial]) -> Polynomial:
    """Sum of elementwise products; the inner product of polynomial vectors."""
    ps, qs = list(ps), list(qs)
    if len(ps) != len(qs):
        raise ValueError("vector length mismatch")
    if not ps:
        raise ValueError("empty polynomial vectors")
    acc = Polynomial.zero(ps[0].nvars)
    for a, b in zip(ps, qs):
        acc = acc + a * b
    return acc
