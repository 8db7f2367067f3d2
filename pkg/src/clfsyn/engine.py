"""The synthesis loop: propose a candidate from the region, verify it, query
the demonstrator on the counterexample, cut the region, repeat.

Every iteration is logged with enough data (moment vectors, demonstrated
inputs, rows) for `replay` to rebuild the region sequence and re-check the
candidate-elimination property offline.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .demonstrator import Demonstration, MpcConfig, demonstrate, default_mpc_config
from .dynamics import ProblemInstance
from .learner import (Candidate, CandidateRegion, ConstraintRow, Converged,
                      Empty, LearnerConfig, WitnessConstraintPair, add_witness,
                      find_candidate, iteration_bound, witness_rows)
from .verifier import (Counterexample, MomentWitness, Valid, VerifierConfig,
                       project, verify)

__all__ = ["SynthesisConfig", "IterationRecord", "SynthesisReport",
           "synthesize", "replay", "relaxed_witness_rows"]

EXIT_SUCCESS = 0
EXIT_NO_CLF = 2
EXIT_BUDGET = 3


@dataclass
class SynthesisConfig:
    learner: LearnerConfig
    verifier: VerifierConfig
    mpc: MpcConfig
    max_iterations: Optional[int] = None   # defaults to iteration_bound
    max_seconds: float = 3600.0

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ValueError("iteration cap must be positive")
        if self.max_seconds <= 0:
            raise ValueError("time cap must be positive")


def default_config(problem: ProblemInstance, D_V: Optional[int] = None,
                   tau: float = 0.25, horizon: float = 5.0,
                   **kw) -> SynthesisConfig:
    from .verifier import required_degree

    D = D_V if D_V is not None else max(2, required_degree(problem))
    return SynthesisConfig(
        learner=LearnerConfig(),
        verifier=VerifierConfig(D_V=D),
        mpc=default_mpc_config(problem.system.n, problem.system.m,
                               tau=tau, horizon=horizon),
        **kw)


@dataclass
class IterationRecord:
    index: int
    candidate: np.ndarray
    verdict_kind: str                     # "valid" | witness kind
    witness: Optional[dict] = None        # MomentWitness.to_dict()
    projected_state: Optional[np.ndarray] = None
    demonstrated_u: Optional[np.ndarray] = None
    demo_converged: Optional[bool] = None
    rows: list = field(default_factory=list)          # [(a list, b, kind)]
    eliminated: Optional[bool] = None
    mve_logdet: Optional[float] = None
    seconds: float = 0.0


@dataclass
class SynthesisReport:
    outcome: str                          # success | empty | converged | budget
    coefficients: Optional[np.ndarray]
    iterations: int
    records: list[IterationRecord]
    total_seconds: float
    problem_name: str
    config_summary: dict

    @property
    def exit_code(self) -> int:
        return {"success": EXIT_SUCCESS, "empty": EXIT_NO_CLF,
                "converged": EXIT_NO_CLF, "budget": EXIT_BUDGET}[self.outcome]

    def to_dict(self) -> dict:
        recs = []
        for r in self.records:
            recs.append({
                "index": r.index,
                "candidate": np.asarray(r.candidate).tolist(),
                "verdict_kind": r.verdict_kind,
                "witness": r.witness,
                "projected_state": None if r.projected_state is None
                else np.asarray(r.projected_state).tolist(),
                "demonstrated_u": None if r.demonstrated_u is None
                else np.asarray(r.demonstrated_u).tolist(),
                "demo_converged": r.demo_converged,
                "rows": [(np.asarray(a).tolist(), float(b), kind)
                         for a, b, kind in r.rows],
                "eliminated": r.eliminated,
                "mve_logdet": r.mve_logdet,
                "seconds": r.seconds,
            })
        return {
            "outcome": self.outcome,
            "coefficients": None if self.coefficients is None
            else np.asarray(self.coefficients).tolist(),
            "iterations": self.iterations,
            "records": recs,
            "total_seconds": self.total_seconds,
            "problem": self.problem_name,
            "config": self.config_summary,
        }

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @staticmethod
    def load(path: str) -> "SynthesisReport":
        with open(path) as fh:
            d = json.load(fh)
        records = []
        for r in d["records"]:
            records.append(IterationRecord(
                index=r["index"],
                candidate=np.asarray(r["candidate"], float),
                verdict_kind=r["verdict_kind"],
                witness=r["witness"],
                projected_state=None if r["projected_state"] is None
                else np.asarray(r["projected_state"], float),
                demonstrated_u=None if r["demonstrated_u"] is None
                else np.asarray(r["demonstrated_u"], float),
                demo_converged=r["demo_converged"],
                rows=[(np.asarray(a, float), float(b), kind)
                      for a, b, kind in r["rows"]],
                eliminated=r["eliminated"],
                mve_logdet=r["mve_logdet"],
                seconds=r["seconds"],
            ))
        return SynthesisReport(
            outcome=d["outcome"],
            coefficients=None if d["coefficients"] is None
            else np.asarray(d["coefficients"], float),
            iterations=d["iterations"], records=records,
            total_seconds=d["total_seconds"], problem_name=d["problem"],
            config_summary=d["config"])


def relaxed_witness_rows(problem: ProblemInstance, witness: MomentWitness,
                         u: np.ndarray) -> WitnessConstraintPair:
    """Cuts from the pseudo-moment functional itself: the relaxed value of
    each basis function and of its Lie derivative under the demonstrated
    input. These eliminate the failed candidate even when the witness does
    not project to a genuine state."""
    from .dynamics import lie_decompose

    u = np.atleast_1d(np.asarray(u, dtype=float))
    gvals = np.array([witness.eval_poly(g) for g in problem.basis])
    lie_vals = []
    for g in problem.basis:
        dec = lie_decompose(g, problem.system)
        val = witness.eval_poly(dec.a)
        for ui, b in zip(u, dec.b):
            val += float(ui) * witness.eval_poly(b)
        lie_vals.append(val)
    lie_vals = np.array(lie_vals)
    rows = []
    if witness.kind in ("positivity", "decrease"):
        rows.append(ConstraintRow.normalized(-gvals, 0.0, "relaxed_positivity"))
        rows.append(ConstraintRow.normalized(lie_vals, 0.0, "relaxed_decrease"))
    elif witness.kind == "boundary":
        beta = problem.reach_while_stay.beta
        rows.append(ConstraintRow.normalized(-gvals, -beta, "relaxed_boundary"))
    elif witness.kind == "init":
        beta = problem.reach_while_stay.beta
        rows.append(ConstraintRow.normalized(gvals, beta, "relaxed_init"))
    return WitnessConstraintPair(rows=tuple(rows))


def _rows_for_iteration(problem: ProblemInstance, witness: MomentWitness,
                        demo: Demonstration, rho: float
                        ) -> list[ConstraintRow]:
    rows = list(relaxed_witness_rows(problem, witness, demo.u).rows)
    x = demo.state
    if (np.linalg.norm(x) >= rho and problem.S.contains(x, tol=1e-9)):
        try:
            rows.extend(witness_rows(problem, x, demo.u).rows)
        except ValueError:
            pass
    return rows


def synthesize(problem: ProblemInstance, config: SynthesisConfig,
               log_path: Optional[str] = None) -> SynthesisReport:
    """Run the learner-verifier-demonstrator loop to completion."""
    lcfg, vcfg, mcfg = config.learner, config.verifier, config.mpc
    region = CandidateRegion(problem.C0)
    r = problem.r
    Delta = float(np.max(problem.C0.half_widths))
    cap = config.max_iterations or iteration_bound(r, Delta, lcfg.delta)
    rho = vcfg.rho if vcfg.rho is not None else problem.rho

    records: list[IterationRecord] = []
    t_start = time.monotonic()
    log_fh = open(log_path, "w") if log_path else None

    def log_line(obj):
        if log_fh:
            log_fh.write(json.dumps(obj) + "\n")
            log_fh.flush()

    outcome, coeffs = "budget", None
    try:
        for it in range(cap):
            if time.monotonic() - t_start > config.max_seconds:
                outcome = "budget"
                break
            t_it = time.monotonic()
            proposal = find_candidate(region, lcfg)
            if isinstance(proposal, Empty):
                outcome = "empty"
                log_line({"iteration": it, "outcome": "empty"})
                break
            if isinstance(proposal, Converged):
                outcome = "converged"
                log_line({"iteration": it, "outcome": "converged",
                          "radius": proposal.radius})
                break
            c = proposal.c
            V = problem.candidate(c)
            verdict = verify(V, problem, vcfg)
            logdet = (region._mve_cache[2]
                      if region._mve_cache is not None else None)
            if isinstance(verdict, Valid):
                outcome, coeffs = "success", c
                records.append(IterationRecord(
                    index=it, candidate=c, verdict_kind="valid",
                    mve_logdet=logdet,
                    seconds=time.monotonic() - t_it))
                log_line({"iteration": it, "outcome": "valid",
                          "center": c.tolist(), "logdet": logdet,
                          "rows": len(region.rows)})
                break
            witness = verdict.witness
            x_star = project(witness, problem.S_box)
            demo = demonstrate(problem, mcfg, x_star)
            rows = _rows_for_iteration(problem, witness, demo, rho)
            # a demonstration that instantly empties the region gets one
            # retry with a larger optimization budget; if the region is
            # still empty the verdict stands (no compatible CLF)
            snapshot = region.copy()
            for row in rows:
                add_witness(region, WitnessConstraintPair(rows=(row,)))
            eliminated = not region.feasible(c, margin=lcfg.margin)
            retried = False
            if isinstance(find_candidate(region, lcfg), Empty) and not retried:
                retried = True
                bigger = MpcConfig(tau=mcfg.tau, horizon=mcfg.horizon,
                                   Q=mcfg.Q, R=mcfg.R, Q_F=mcfg.Q_F,
                                   max_iters=mcfg.max_iters * 2,
                                   grad_tol=mcfg.grad_tol,
                                   shrink=mcfg.shrink,
                                   initial_step=mcfg.initial_step)
                demo2 = demonstrate(problem, bigger, x_star)
                rows2 = _rows_for_iteration(problem, witness, demo2, rho)
                trial = snapshot.copy()
                for row in rows2:
                    add_witness(trial, WitnessConstraintPair(rows=(row,)))
                if not isinstance(find_candidate(trial, lcfg), Empty):
                    region = trial
                    demo, rows = demo2, rows2
                    eliminated = not region.feasible(c, margin=lcfg.margin)
            if not eliminated:
                raise RuntimeError(
                    f"iteration {it}: candidate not eliminated by its own cuts")
            records.append(IterationRecord(
                index=it, candidate=c, verdict_kind=witness.kind,
                witness=witness.to_dict(), projected_state=x_star,
                demonstrated_u=demo.u, demo_converged=demo.converged,
                rows=[(row.a, row.b, row.kind) for row in rows],
                eliminated=eliminated, mve_logdet=logdet,
                seconds=time.monotonic() - t_it))
            log_line({"iteration": it, "outcome": "counterexample",
                      "kind": witness.kind, "center": c.tolist(),
                      "logdet": logdet, "rows": len(region.rows)})
    finally:
        if log_fh:
            log_fh.close()

    return SynthesisReport(
        outcome=outcome, coefficients=coeffs,
        iterations=len(records), records=records,
        total_seconds=time.monotonic() - t_start,
        problem_name=problem.name,
        config_summary={
            "strategy": lcfg.strategy, "delta": lcfg.delta,
            "margin": lcfg.margin, "D_V": vcfg.D_V,
            "tau": mcfg.tau, "horizon": mcfg.horizon,
            "iteration_cap": cap,
        })


def replay(report: SynthesisReport, problem: ProblemInstance,
           config: Optional[SynthesisConfig] = None) -> bool:
    """Rebuild the region sequence from the logged witnesses and confirm
    that every candidate was feasible when proposed, matches the
    recomputed proposal point, and is infeasible after its own cuts."""
    lcfg = config.learner if config else LearnerConfig()
    region = CandidateRegion(problem.C0)
    for rec in report.records:
        proposal = find_candidate(region, lcfg)
        if not isinstance(proposal, Candidate):
            return False
        if np.linalg.norm(proposal.c - rec.candidate) > 1e-6 * (
                1.0 + np.linalg.norm(rec.candidate)):
            return False
        if not region.feasible(rec.candidate, margin=0.0):
            return False
        if rec.verdict_kind == "valid":
            continue
        if rec.witness is None or rec.demonstrated_u is None:
            return False
        witness = MomentWitness.from_dict(rec.witness)
        rho = problem.rho
        demo = Demonstration(state=np.asarray(rec.projected_state, float),
                             u=np.asarray(rec.demonstrated_u, float),
                             planned_inputs=np.zeros((0, problem.system.m)),
                             planned_states=np.zeros((0, problem.system.n)),
                             cost=0.0, converged=bool(rec.demo_converged))
        rows = _rows_for_iteration(problem, witness, demo, rho)
        if len(rows) != len(rec.rows):
            return False
        for row, (a_log, b_log, kind_log) in zip(rows, rec.rows):
            if row.kind != kind_log:
                return False
            if (np.linalg.norm(row.a - np.asarray(a_log, float)) > 1e-9
                    or abs(row.b - b_log) > 1e-9):
                return False
        for row in rows:
            add_witness(region, WitnessConstraintPair(rows=(row,)))
        if region.feasible(rec.candidate, margin=lcfg.margin):
            return False
    return True
