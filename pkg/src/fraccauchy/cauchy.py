"""Pseudo-time Cauchy method for A^alpha v = psi.

With D = A - delta I and B(t) = (t D + delta I) / alpha, the function

    w(t) = delta^alpha (t D + delta I)^-alpha w(0),   w(0) = delta^-alpha psi,

solves B(t) w' + D w = 0 on (0, 1] and w(1) = A^-alpha psi. The schemes
below integrate this problem on a uniform grid t_n = n / N.

All operator equations are multiplied through by the mass matrix M, so
with S = K - delta M every step solves a sparse SPD system and M^-1 K is
never formed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .sparse import SparseMatrix, cg_solve, estimate_lambda_min, estimate_operator_norm, \
    linear_combine, spmv


class Scheme(str, enum.Enum):
    TWO_LEVEL = "two"
    THREE_LEVEL = "three"


class Init(str, enum.Enum):
    SYMMETRIC = "sym"
    EXPLICIT_EULER = "euler"
    CORRECTED_EXPLICIT = "corrected"
    FINE_GRID = "fine"


class InvalidDelta(ValueError):
    def __init__(self, delta, lambda1):
        super().__init__(f"delta = {delta!r} must satisfy 0 < delta < lambda_1 "
                         f"(estimated lambda_1 = {lambda1!r})")
        self.delta = delta
        self.lambda1 = lambda1


class StepTooLarge(ValueError):
    """The corrected explicit start was asked for tau beyond its stability bound."""

    def __init__(self, tau, tau0):
        super().__init__(f"tau = {tau!r} exceeds the stability bound tau0 = {tau0!r}")
        self.tau = tau
        self.tau0 = tau0


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    """Operator pair (K, M), power alpha, shift delta and right-hand side psi.

    ``lambda1`` is the smallest generalized eigenvalue of (K, M); it is
    estimated by inverse iteration when not supplied, and delta must lie
    strictly below it.
    """

    K: SparseMatrix
    M: SparseMatrix
    alpha: float
    delta: float
    psi: np.ndarray
    cg_tol: float = 1e-10
    lambda1: float | None = None
    preconditioner: str | None = None
    S: SparseMatrix = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.K.n != self.M.n:
            raise ValueError("K and M differ in dimension")
        psi = np.array(self.psi, dtype=np.float64)
        if psi.shape != (self.K.n,):
            raise ValueError("psi does not match the matrix dimension")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        lam1 = self.lambda1
        if lam1 is None:
            lam1 = estimate_lambda_min(self.K, self.M)
            object.__setattr__(self, "lambda1", lam1)
        if not 0.0 < self.delta < lam1:
            raise InvalidDelta(self.delta, lam1)
        object.__setattr__(self, "S", linear_combine(self.K, 1.0, self.M, -self.delta))

    @property
    def n(self) -> int:
        return self.K.n

    @cached_property
    def norm_D(self) -> float:
        """||D|| = largest generalized eigenvalue of (S, M)."""
        return estimate_operator_norm(self.S, self.M)

    def tau0(self) -> float:
        return 2.0 * self.delta / ((1.0 + self.alpha) * self.norm_D)

    def m_norm(self, w) -> float:
        return float(np.sqrt(max(self.M.quad(w), 0.0)))

    def d_norm_sq(self, w) -> float:
        return self.S.quad(w)

    def solve(self, A: SparseMatrix, rhs, x0=None):
        return cg_solve(A, rhs, tol=self.cg_tol, x0=x0, preconditioner=self.preconditioner)


@dataclass
class EvolutionTrace:
    w_final: np.ndarray
    l2_norms: list[float]
    energies: list[float] | None
    steps_taken: int
    cg_iterations: int = 0
    states: list[np.ndarray] | None = None


def initial_state(p: CauchyProblem) -> np.ndarray:
    return p.delta ** (-p.alpha) * p.psi


def sigma_opt(alpha: float) -> float:
    """Weight that makes the three-level scheme fourth-order: (2 + alpha) / (6 alpha)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return (2.0 + alpha) / (6.0 * alpha)


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"weight sigma must be finite and non-negative, got {sigma!r}")


def _two_level(p: CauchyProblem, w, t_n, sigma, tau):
    ts = t_n + sigma * tau
    lhs = linear_combine(p.S, ts / tau + p.alpha * sigma, p.M, p.delta / tau)
    Sw = spmv(p.S, w)
    rhs = (ts / tau - p.alpha * (1.0 - sigma)) * Sw + (p.delta / tau) * spmv(p.M, w)
    return p.solve(lhs, rhs, x0=w)


def two_level_step(p: CauchyProblem, w_n, t_n: float, sigma: float, tau: float) -> np.ndarray:
    """One step of (t_{n+sigma} D + delta)(w_{n+1} - w_n)/tau + alpha D w_{n+sigma} = 0."""
    _check_sigma(sigma)
    if t_n < 0 or t_n + tau > 1.0 + 1e-12:
        raise ValueError(f"step [{t_n}, {t_n + tau}] leaves [0, 1]")
    return _two_level(p, np.asarray(w_n, dtype=float), t_n, sigma, tau)[0]


def run_two_level(p: CauchyProblem, sigma: float, N: int, keep_states=False) -> EvolutionTrace:
    _check_sigma(sigma)
    if N < 1:
        raise ValueError("need at least one step")
    tau = 1.0 / N
    w = initial_state(p)
    norms = [p.m_norm(w)]
    states = [w] if keep_states else None
    its = 0
    for n in range(N):
        w, k = _two_level(p, w, n * tau, sigma, tau)
        its += k
        norms.append(p.m_norm(w))
        if keep_states:
            states.append(w)
    return EvolutionTrace(w, norms, None, N, its, states)


def init_symmetric(p: CauchyProblem, tau: float) -> np.ndarray:
    return init_fine_grid(p, tau, 1)


def init_explicit_euler(p: CauchyProblem, tau: float) -> np.ndarray:
    """Forward Euler start using B(0) = delta / alpha."""
    w0 = initial_state(p)
    Dw, _ = p.solve(p.M, spmv(p.S, w0))
    return w0 - tau * (p.alpha / p.delta) * Dw


def init_corrected_explicit(p: CauchyProblem, tau: float, norm_D: float | None = None) -> np.ndarray:
    """w1 = (I - (alpha/delta) tau D + alpha(1+alpha)/(2 delta^2) tau^2 D^2) w0.

    Stable only for tau <= tau0 = 2 delta / ((1 + alpha) ||D||); larger steps
    raise StepTooLarge.
    """
    if norm_D is None:
        norm_D = p.norm_D
    tau0 = np.inf if norm_D == 0 else 2.0 * p.delta / ((1.0 + p.alpha) * norm_D)
    if tau > tau0:
        raise StepTooLarge(tau, tau0)
    a, d = p.alpha, p.delta
    w0 = initial_state(p)
    Dw, _ = p.solve(p.M, spmv(p.S, w0))
    DDw, _ = p.solve(p.M, spmv(p.S, Dw))
    return w0 - (a / d) * tau * Dw + (a * (1.0 + a) / (2.0 * d * d)) * tau * tau * DDw


def _fine_grid(p: CauchyProblem, tau, m):
    if m < 1:
        raise ValueError("fine-grid factor m must be at least 1")
    h = tau / m
    w = initial_state(p)
    norms = [p.m_norm(w)]
    its = 0
    for b in range(m):
        w, k = _two_level(p, w, b * h, 0.5, h)
        its += k
        norms.append(p.m_norm(w))
    return w, norms, its


def init_fine_grid(p: CauchyProblem, tau: float, m: int) -> np.ndarray:
    """m symmetric (sigma = 1/2) sub-steps of size tau/m across [0, tau]."""
    return _fine_grid(p, tau, m)[0]


def energy(p: CauchyProblem, w_n, w_prev, sigma: float) -> float:
    """1/4 |w_n + w_prev|_D^2 + (sigma - 1/4) |w_n - w_prev|_D^2."""
    w_n = np.asarray(w_n, dtype=float)
    w_prev = np.asarray(w_prev, dtype=float)
    return 0.25 * p.d_norm_sq(w_n + w_prev) + (sigma - 0.25) * p.d_norm_sq(w_n - w_prev)


def _three_level(p: CauchyProblem, w_prev, w_curr, t_n, sigma, tau):
    g = 1.0 / (2.0 * p.alpha * tau)
    lhs = linear_combine(p.S, t_n * g + sigma, p.M, p.delta * g)
    rhs = ((t_n * g - sigma) * spmv(p.S, w_prev) + p.delta * g * spmv(p.M, w_prev)
           - (1.0 - 2.0 * sigma) * spmv(p.S, w_curr))
    return p.solve(lhs, rhs, x0=w_curr)


def three_level_step(p: CauchyProblem, w_prev, w_curr, t_n: float, sigma: float,
                     tau: float) -> np.ndarray:
    """Solve B_n (w_{n+1} - w_{n-1})/(2 tau) + D(sigma w_{n+1} + (1-2 sigma) w_n + sigma w_{n-1}) = 0."""
    _check_sigma(sigma)
    return _three_level(p, np.asarray(w_prev, dtype=float), np.asarray(w_curr, dtype=float),
                        t_n, sigma, tau)[0]


def first_layer(p: CauchyProblem, tau: float, init: Init | str, m: int | None = None):
    """Value w1 from the chosen start procedure and the CG iterations spent."""
    init = Init(init)
    if init is Init.SYMMETRIC:
        w, _, its = _fine_grid(p, tau, 1)
        return w, its
    if init is Init.FINE_GRID:
        w, _, its = _fine_grid(p, tau, 1 if m is None else int(m))
        return w, its
    if init is Init.EXPLICIT_EULER:
        return init_explicit_euler(p, tau), 0
    return init_corrected_explicit(p, tau), 0


def run_three_level(p: CauchyProblem, sigma: float, N: int, init: Init | str = Init.FINE_GRID,
                    m: int | None = None, keep_states=False) -> EvolutionTrace:
    """Three-level scheme with N steps; ``m`` defaults to N for the fine-grid start."""
    _check_sigma(sigma)
    if N < 2:
        raise ValueError("the three-level scheme needs N >= 2")
    init = Init(init)
    if init is Init.FINE_GRID and m is None:
        m = N
    tau = 1.0 / N
    w_prev = initial_state(p)
    w_curr, its = first_layer(p, tau, init, m)
    norms = [p.m_norm(w_prev), p.m_norm(w_curr)]
    energies = [energy(p, w_curr, w_prev, sigma)]
    states = [w_prev, w_curr] if keep_states else None
    for n in range(1, N):
        w_next, k = _three_level(p, w_prev, w_curr, n * tau, sigma, tau)
        its += k
        w_prev, w_curr = w_curr, w_next
        norms.append(p.m_norm(w_curr))
        energies.append(energy(p, w_curr, w_prev, sigma))
        if keep_states:
            states.append(w_curr)
    return EvolutionTrace(w_curr, norms, energies, N, its, states)


def run_scheme(p: CauchyProblem, scheme: Scheme | str, sigma: float, N: int,
               init: Init | str = Init.FINE_GRID, m: int | None = None) -> EvolutionTrace:
    if Scheme(scheme) is Scheme.TWO_LEVEL:
        return run_two_level(p, sigma, N)
    return run_three_level(p, sigma, N, init, m)
