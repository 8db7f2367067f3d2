"""Problem-file parsing: a small polynomial-expression grammar and the JSON
problem schema (schema_version 1).

Grammar (no division, no function calls; exponents are nonnegative integer
literals):

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' uint)?
    base   := number | ident | '(' expr ')'
"""

from __future__ import annotations

import json
import re
from typing import Optional, Sequence

import numpy as np
from jsonschema import Draft202012Validator

from .dynamics import (ControlAffineSystem, ProblemInstance, ReachWhileStay,
                       quadratic_basis)
from .poly import Polynomial
from .sets import (Box, InputPolytope, SemialgebraicSet, box_to_semialgebraic,
                   interval_input_polytope)

__all__ = ["parse_poly", "format_poly", "load_problem", "problem_to_dict",
           "ParseError", "ProblemFileError", "PROBLEM_SCHEMA"]


class ParseError(ValueError):
    """Syntax or semantic error in a polynomial expression, with position."""

    def __init__(self, message: str, pos: int, src: str):
        super().__init__(f"{message} at position {pos}: {src!r}")
        self.pos = pos


class ProblemFileError(ValueError):
    """Schema or validation failure in a problem file, with a JSON path."""


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
                    r"|(?P<op>[-+*^()]))")


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            if src[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {src[pos]!r}", pos, src)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, var_index: dict[str, int], nvars: int):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0
        self.vars = var_index
        self.nvars = nvars

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos, self.src)
        return self.advance()

    def parse(self) -> Polynomial:
        p = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", pos, self.src)
        return p

    def expr(self) -> Polynomial:
        kind, val, _ = self.peek()
        negate = False
        if kind == "op" and val == "-":
            self.advance()
            negate = True
        p = self.term()
        if negate:
            p = -p
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                q = self.term()
                p = p + q if val == "+" else p - q
            else:
                return p

    def term(self) -> Polynomial:
        p = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.advance()
                p = p * self.factor()
            else:
                return p

    def factor(self) -> Polynomial:
        p = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, pos = self.advance()
            if kind != "num" or val != int(val) or val < 0:
                raise ParseError("exponent must be a nonnegative integer literal",
                                 pos, self.src)
            p = p ** int(val)
        return p

    def base(self) -> Polynomial:
        kind, val, pos = self.advance()
        if kind == "num":
            return Polynomial.constant(val, self.nvars)
        if kind == "ident":
            idx = self.vars.get(val)
            if idx is None:
                raise ParseError(f"unknown variable {val!r}", pos, self.src)
            return Polynomial.variable(idx, self.nvars)
        if kind == "op" and val == "(":
            p = self.expr()
            self.expect_op(")")
            return p
        raise ParseError(f"unexpected token {val!r}", pos, self.src)


def parse_poly(src: str, variables: Sequence[str]) -> Polynomial:
    """Parse an expression string over the named variables."""
    var_index = {name: i for i, name in enumerate(variables)}
    if len(var_index) != len(variables):
        raise ValueError("duplicate variable names")
    return _Parser(src, var_index, len(variables)).parse()


def format_poly(p: Polynomial, variables: Sequence[str]) -> str:
    """Render a polynomial back into the grammar (round-trip safe)."""
    if p.is_zero():
        return "0"
    parts = []
    for m in sorted(p.terms, key=lambda m: m.grlex_key(p.nvars)):
        c = p.terms[m]
        factors = [repr(float(abs(c)))]
        for i, pw in m.powers:
            factors.append(variables[i] + (f"^{pw}" if pw > 1 else ""))
        s = "*".join(factors)
        parts.append(("- " if c < 0 else "+ ") + s)
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else "-" + out[2:]


PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "variables", "dynamics", "safe_set",
                 "s_box", "inputs"],
    "properties": {
        "schema_version": {"const": "1"},
        "name": {"type": "string"},
        "variables": {"type": "array", "items": {"type": "string"},
                      "minItems": 1},
        "dynamics": {
            "type": "object",
            "required": ["f0", "channels"],
            "properties": {
                "f0": {"type": "array", "items": {"type": "string"}},
                "channels": {"type": "array",
                             "items": {"type": "array",
                                       "items": {"type": "string"}}},
            },
        },
        "safe_set": {"type": "array", "items": {"type": "string"}},
        "s_box": {
            "type": "object",
            "required": ["lower", "upper"],
            "properties": {
                "lower": {"type": "array", "items": {"type": "number"}},
                "upper": {"type": "array", "items": {"type": "number"}},
            },
        },
        "inputs": {
            "type": "object",
            "oneOf": [
                {"required": ["lower", "upper"]},
                {"required": ["A", "b"]},
            ],
            "properties": {
                "lower": {"type": "array", "items": {"type": "number"}},
                "upper": {"type": "array", "items": {"type": "number"}},
                "A": {"type": "array",
                      "items": {"type": "array", "items": {"type": "number"}}},
                "b": {"type": "array", "items": {"type": "number"}},
            },
        },
        "basis": {
            "oneOf": [
                {"const": "quadratic"},
                {"type": "array", "items": {"type": "string"}},
            ],
        },
        "c0_halfwidth": {"type": "number", "exclusiveMinimum": 0},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "reach_while_stay": {
            "type": "object",
            "required": ["init_set", "beta"],
            "properties": {
                "init_set": {"type": "array", "items": {"type": "string"}},
                "beta": {"type": "number"},
            },
        },
    },
}

_validator = Draft202012Validator(PROBLEM_SCHEMA)


def problem_from_dict(doc: dict) -> ProblemInstance:
    errors = sorted(_validator.iter_errors(doc), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ProblemFileError(f"{e.json_path}: {e.message}")
    variables = doc["variables"]
    n = len(variables)

    def poly(src: str, where: str) -> Polynomial:
        try:
            return parse_poly(src, variables)
        except ParseError as exc:
            raise ProblemFileError(f"{where}: {exc}") from exc

    f0 = [poly(s, f"$.dynamics.f0[{i}]") for i, s in enumerate(doc["dynamics"]["f0"])]
    if len(f0) != n:
        raise ProblemFileError("$.dynamics.f0: must have one entry per variable")
    channels = []
    for j, ch in enumerate(doc["dynamics"]["channels"]):
        if len(ch) != n:
            raise ProblemFileError(
                f"$.dynamics.channels[{j}]: must have one entry per variable")
        channels.append([poly(s, f"$.dynamics.channels[{j}][{i}]")
                         for i, s in enumerate(ch)])
    system = ControlAffineSystem(f0, channels)

    lower = np.asarray(doc["s_box"]["lower"], float)
    upper = np.asarray(doc["s_box"]["upper"], float)
    if lower.shape != (n,) or upper.shape != (n,):
        raise ProblemFileError("$.s_box: bounds must match the variable count")
    try:
        s_box = Box(lower, upper)
    except ValueError as exc:
        raise ProblemFileError(f"$.s_box: {exc}") from exc

    if doc["safe_set"]:
        S = SemialgebraicSet(tuple(poly(s, f"$.safe_set[{i}]")
                                   for i, s in enumerate(doc["safe_set"])), n)
    else:
        S = box_to_semialgebraic(s_box)

    inp = doc["inputs"]
    try:
        if "lower" in inp:
            U = interval_input_polytope(inp["lower"], inp["upper"])
        else:
            U = InputPolytope(np.asarray(inp["A"], float),
                              np.asarray(inp["b"], float))
    except ValueError as exc:
        raise ProblemFileError(f"$.inputs: {exc}") from exc

    basis_spec = doc.get("basis", "quadratic")
    if basis_spec == "quadratic":
        basis = quadratic_basis(n)
    else:
        basis = tuple(poly(s, f"$.basis[{i}]") for i, s in enumerate(basis_spec))
        for i, g in enumerate(basis):
            if abs(g.eval(np.zeros(n))) > 1e-12:
                raise ProblemFileError(
                    f"$.basis[{i}]: basis function must vanish at the origin")

    halfwidth = float(doc.get("c0_halfwidth", 100.0))
    C0 = Box(-halfwidth * np.ones(len(basis)), halfwidth * np.ones(len(basis)))
    rho = float(doc.get("rho", 0.01 * float(np.min(s_box.half_widths))))

    rws = None
    if "reach_while_stay" in doc:
        rws_doc = doc["reach_while_stay"]
        init = SemialgebraicSet(
            tuple(poly(s, f"$.reach_while_stay.init_set[{i}]")
                  for i, s in enumerate(rws_doc["init_set"])), n)
        rws = ReachWhileStay(init_set=init,
                             boundary=S.constraints,
                             beta=float(rws_doc["beta"]))

    try:
        return ProblemInstance(
            system=system, S=S, S_box=s_box, U=U, basis=basis, C0=C0,
            rho=rho, reach_while_stay=rws,
            name=doc.get("name", "problem"))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc


def load_problem(path: str) -> ProblemInstance:
    """Read and fully validate a problem JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"invalid JSON: {exc}") from exc
    return problem_from_dict(doc)


def problem_to_dict(problem: ProblemInstance,
                    variables: Optional[Sequence[str]] = None) -> dict:
    """Serialize a problem instance back into the file schema."""
    n = problem.system.n
    variables = list(variables or (f"x{i + 1}" for i in range(n)))
    doc = {
        "schema_version": "1",
        "name": problem.name,
        "variables": variables,
        "dynamics": {
            "f0": [format_poly(p, variables) for p in problem.system.f0],
            "channels": [[format_poly(p, variables) for p in ch]
                         for ch in problem.system.channels],
        },
        "safe_set": [format_poly(r, variables) for r in problem.S.constraints],
        "s_box": {"lower": problem.S_box.lower.tolist(),
                  "upper": problem.S_box.upper.tolist()},
        "basis": [format_poly(g, variables) for g in problem.basis],
        "c0_halfwidth": float(problem.C0.upper[0]),
        "rho": problem.rho,
    }
    if problem.U.interval is not None:
        doc["inputs"] = {"lower": problem.U.interval[0].tolist(),
                         "upper": problem.U.interval[1].tolist()}
    else:
        doc["inputs"] = {"A": problem.U.A.tolist(), "b": problem.U.b.tolist()}
    if problem.reach_while_stay is not None:
        rws = problem.reach_while_stay
        doc["reach_while_stay"] = {
            "init_set": [format_poly(q, variables)
                         for q in rws.init_set.constraints],
            "beta": rws.beta,
        }
    return doc
