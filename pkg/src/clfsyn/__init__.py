"""clfsyn: control Lyapunov function synthesis for polynomial control-affine
systems, by iterating a cutting-plane learner, a moment-relaxation verifier
and an MPC demonstrator."""

from .dynamics import (BENCHMARK_NAMES, ControlAffineSystem, ProblemInstance,
                       lie_decompose, load_benchmark, quadratic_basis)
from .engine import SynthesisConfig, SynthesisReport, default_config, replay, synthesize
from .feedback import FeedbackLaw, min_norm, sontag
from .learner import (CandidateRegion, LearnerConfig, find_candidate,
                      iteration_bound, mve, witness_rows)
from .demonstrator import MpcConfig, default_mpc_config, demonstrate, mpc_solve
from .poly import GramMatrix, Monomial, Polynomial, monomial_basis, to_gram
from .probio import load_problem, parse_poly
from .sets import Ball, Box, InputPolytope, SemialgebraicSet
from .simulator import Trajectory, beta_star, rk4_step, simulate
from .verifier import (Counterexample, MomentWitness, Valid, VerifierConfig,
                       check_decrease, check_positivity, farkas_feasible,
                       grid_falsify, project, verify)

__version__ = "0.1.0"
