"""Finite-horizon nonlinear MPC used as the black-box demonstrator.

The optimal-control problem is solved by projected gradient descent with a
backtracking line search, starting from the all-zero input sequence, with
gradients from the discrete adjoint of the RK4 rollout. Everything is
deterministic, so repeated queries return identical answers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import ControlAffineSystem, ProblemInstance
from .simulator import rk4_step

__all__ = ["MpcConfig", "Demonstration", "mpc_solve", "demonstrate",
           "demonstrate_witness", "default_mpc_config"]


@dataclass
class MpcConfig:
    tau: float
    horizon: float
    Q: np.ndarray
    R: np.ndarray
    Q_F: np.ndarray
    max_iters: int = 200
    grad_tol: float = 1e-8
    shrink: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.horizon < self.tau:
            raise ValueError("horizon must be at least one step")
        steps = self.horizon / self.tau
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of tau")
        for name in ("Q", "R", "Q_F"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if not np.allclose(M, M.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(M).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
            setattr(self, name, M)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.tau))


def default_mpc_config(n: int, m: int, tau: float, horizon: float,
                       **kw) -> MpcConfig:
    """Q = I, R = I, Q_F = (T/tau) * I."""
    return MpcConfig(tau=tau, horizon=horizon, Q=np.eye(n), R=np.eye(m),
                     Q_F=(horizon / tau) * np.eye(n), **kw)


@dataclass
class Demonstration:
    state: np.ndarray
    u: np.ndarray
    planned_inputs: np.ndarray
    planned_states: np.ndarray
    cost: float
    converged: bool


def _rollout(sys: ControlAffineSystem, x0: np.ndarray, U: np.ndarray,
             tau: float) -> np.ndarray:
    X = np.zeros((len(U) + 1, sys.n))
    X[0] = x0
    for k in range(len(U)):
        X[k + 1] = rk4_step(sys, X[k], U[k], tau)
    return X


def _cost(cfg: MpcConfig, X: np.ndarray, U: np.ndarray) -> float:
    stage = sum(X[k] @ cfg.Q @ X[k] + U[k] @ cfg.R @ U[k] for k in range(len(U)))
    return cfg.tau * stage + X[-1] @ cfg.Q_F @ X[-1]


def _rk4_vjp(sys: ControlAffineSystem, x: np.ndarray, u: np.ndarray,
             tau: float, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian product of one RK4 step: given lam = dJ/dx',
    return (dJ/dx, dJ/du) through the stage evaluations."""
    h = tau
    k1, A1, B1 = sys.stage_eval(x, u)
    s2 = x + 0.5 * h * k1
    k2, A2, B2 = sys.stage_eval(s2, u)
    s3 = x + 0.5 * h * k2
    k3, A3, B3 = sys.stage_eval(s3, u)
    s4 = x + h * k3
    _, A4, B4 = sys.stage_eval(s4, u)

    k4bar = (h / 6.0) * lam
    s4bar = A4.T @ k4bar
    ubar = B4.T @ k4bar

    k3bar = (h / 3.0) * lam + h * s4bar
    s3bar = A3.T @ k3bar
    ubar += B3.T @ k3bar

    k2bar = (h / 3.0) * lam + 0.5 * h * s3bar
    s2bar = A2.T @ k2bar
    ubar += B2.T @ k2bar

    k1bar = (h / 6.0) * lam + 0.5 * h * s2bar
    s1bar = A1.T @ k1bar
    ubar += B1.T @ k1bar

    xbar = lam + s1bar + s2bar + s3bar + s4bar
    return xbar, ubar


def mpc_gradient(sys: ControlAffineSystem, cfg: MpcConfig, x0: np.ndarray,
                 U: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Cost, rollout, and dJ/dU by backward sweep of the discrete adjoint."""
    X = _rollout(sys, x0, U, cfg.tau)
    J = _cost(cfg, X, U)
    N = len(U)
    G = np.zeros_like(U)
    lam = 2.0 * (cfg.Q_F @ X[N])
    for k in range(N - 1, -1, -1):
        xbar, ubar = _rk4_vjp(sys, X[k], U[k], cfg.tau, lam)
        G[k] = 2.0 * cfg.tau * (cfg.R @ U[k]) + ubar
        lam = 2.0 * cfg.tau * (cfg.Q @ X[k]) + xbar
    return G, J, X


def mpc_solve(problem: ProblemInstance, cfg: MpcConfig,
              x0: Sequence[float]) -> tuple[np.ndarray, float, bool]:
    """Minimize the quadratic rollout cost over input sequences in U by
    projected gradient descent from the zero initialization.

    Returns (inputs, cost, converged). The line search only ever accepts
    non-increasing costs.
    """
    x0 = np.asarray(x0, dtype=float)
    if not problem.S_box.contains(x0, tol=1e-9):
        raise ValueError("initial state outside the sampling box")
    sys = problem.system
    N = cfg.steps
    U = np.zeros((N, sys.m))
    if sys.m == 0:
        X = _rollout(sys, x0, U, cfg.tau)
        return U, _cost(cfg, X, U), True

    def project(Useq):
        return np.array([problem.U.project(u) for u in Useq])

    U = project(U)
    G, J, _ = mpc_gradient(sys, cfg, x0, U)
    step = cfg.initial_step
    converged = False
    for _ in range(cfg.max_iters):
        # projected-gradient stationarity measure
        U_trial = project(U - step * G)
        move = U_trial - U
        move_norm = float(np.linalg.norm(move))
        if move_norm / max(step, 1e-300) <= cfg.grad_tol:
            converged = True
            break
        accepted = False
        for _ls in range(40):
            U_try = project(U - step * G)
            d = U_try - U
            X_try = _rollout(sys, x0, U_try, cfg.tau)
            J_try = _cost(cfg, X_try, U_try)
            # Armijo condition on the projection arc
            if J_try <= J - 1e-4 / max(step, 1e-300) * float(np.sum(d * d)):
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            break
        U = U_try
        G, J, _ = mpc_gradient(sys, cfg, x0, U)
        step = min(step / cfg.shrink, 1e6)  # let the step grow back
    return U, J, converged


def demonstrate(problem: ProblemInstance, cfg: MpcConfig,
                x: Sequence[float]) -> Demonstration:
    """Query the MPC at a state; only the first planned input is exposed as
    the demonstration."""
    x = np.asarray(x, dtype=float)
    U, J, conv = mpc_solve(problem, cfg, x)
    X = _rollout(problem.system, x, U, cfg.tau)
    u0 = U[0] if len(U) else np.zeros(problem.system.m)
    return Demonstration(state=x, u=u0, planned_inputs=U, planned_states=X,
                         cost=J, converged=conv)


def demonstrate_witness(problem: ProblemInstance, cfg: MpcConfig,
                        witness) -> Demonstration:
    """Project a moment witness to a state, clamp into the sampling box,
    and demonstrate there."""
    from .verifier import project as project_witness

    x = project_witness(witness, problem.S_box)
    return demonstrate(problem, cfg, x)
