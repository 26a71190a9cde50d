"""Small-mesh invariant suite run by ``fraccauchy oracle-check``.

Each check compares the schemes against the dense spectral oracle or
against the stability estimates they are supposed to satisfy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import CauchyProblem, StepTooLarge, init_corrected_explicit, initial_state, \
    run_three_level, run_two_level, sigma_opt
from .harness import RunConfig, build_setup
from .oracle import dense_generalized_eig, exact_evolution, fractional_apply, spectral_truncation

NORM_SLACK = 1e-8
SMOOTH_MODES = 4
ORDER_PAIR = (80, 160)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def corrected_symbol(d, tau, alpha, delta):
    """Scalar factor of R = I - (alpha/delta) tau D + alpha(1+alpha)/(2 delta^2) tau^2 D^2."""
    x = tau * np.asarray(d) / delta
    return 1.0 - alpha * x + 0.5 * alpha * (1.0 + alpha) * x * x


def oracle_error(p: CauchyProblem, w, exact) -> float:
    return p.m_norm(w - exact) / p.m_norm(exact)


def orders(errors) -> list[float]:
    return [float(np.log2(a / b)) for a, b in zip(errors[:-1], errors[1:])]


def run_checks(cfg: RunConfig) -> list[CheckResult]:
    setup = build_setup(cfg)
    p = setup.problem
    K, M = p.K, p.M
    e = dense_generalized_eig(K, M)
    a, delta = p.alpha, p.delta
    out: list[CheckResult] = []

    def add(name, ok, detail):
        out.append(CheckResult(name, bool(ok), detail))

    P = e.phis
    orth = np.abs(P.T @ (M.toarray() @ P) - np.eye(len(e))).max()
    res = np.linalg.norm(K.toarray() @ P - (M.toarray() @ P) * e.lambdas, axis=0)
    add("oracle M-orthonormality", orth <= 1e-10, f"max deviation {orth:.2e}")
    add("oracle residuals", np.all(res <= 1e-8 * np.abs(e.lambdas)),
        f"max relative residual {(res / e.lambdas).max():.2e}")
    add("lambda_1 estimate", abs(p.lambda1 - e.lambdas[0]) <= 1e-6 * e.lambdas[0],
        f"inverse iteration {p.lambda1:.10g}, oracle {e.lambdas[0]:.10g}")

    psi = p.psi
    bound = delta ** (-a) * p.m_norm(psi)
    v = fractional_apply(e, M, -a, psi)
    add("a priori bound |v| <= delta^-alpha |psi|", p.m_norm(v) <= bound + NORM_SLACK,
        f"{p.m_norm(v):.6g} <= {bound:.6g}")
    w0 = initial_state(p)
    ex_norms = [p.m_norm(exact_evolution(e, M, delta, a, t, w0)) for t in np.linspace(0, 1, 41)]
    add("exact evolution norm non-increasing", np.all(np.diff(ex_norms) <= 1e-12),
        f"max increase {np.diff(ex_norms).max():.2e}")

    worst, final_ok = -np.inf, True
    for sigma in (0.5, 0.75, 1.0):
        for N in (10, 100):
            tr = run_two_level(p, sigma, N)
            worst = max(worst, np.diff(tr.l2_norms).max())
            final_ok &= tr.l2_norms[-1] <= bound + NORM_SLACK
    add("two-level norm decay (sigma >= 0.5)", worst <= NORM_SLACK,
        f"max step increase {worst:.2e}")
    add("two-level final bound", final_ok, f"bound {bound:.6g}")

    worst = -np.inf
    for sigma in (0.3, 0.5, sigma_opt(a)):
        for N in (10, 100):
            E = np.array(run_three_level(p, sigma, N, "fine").energies)
            worst = max(worst, (np.diff(E) / E[0]).max())
    add("three-level energy decay (sigma > 0.25)", worst <= NORM_SLACK,
        f"max relative increase {worst:.2e}")

    d = e.lambdas - delta
    norm_D = d.max()
    tau0 = 2.0 * delta / ((1.0 + a) * norm_D)
    taus = np.linspace(0.0, tau0, 201)
    sym = max(np.abs(corrected_symbol(d, t, a, delta)).max() for t in taus)
    add("corrected explicit contraction for tau <= tau0", sym <= 1.0 + 1e-12,
        f"max |symbol| {sym:.15f}, tau0 {tau0:.4e}")
    try:
        init_corrected_explicit(p, 1.01 * p.tau0())
        add("corrected explicit rejects 1.01 tau0", False, "no StepTooLarge raised")
    except StepTooLarge as exc:
        add("corrected explicit rejects 1.01 tau0", True, f"tau0 {exc.tau0:.4e}")

    v_exact = fractional_apply(e, M, -a, psi)
    err = oracle_error(p, run_two_level(p, 0.5, 2000).w_final, v_exact)
    add("two-level sigma=0.5, N=2000 vs oracle", err <= 5e-6, f"relative error {err:.2e}")

    def order_of(prob, exact, runner):
        errs = [oracle_error(prob, runner(N).w_final, exact) for N in ORDER_PAIR]
        return orders(errs)[0]

    o = order_of(p, v_exact, lambda N: run_two_level(p, 0.5, N))
    add("two-level sigma=0.5 order", 1.8 <= o <= 2.2, f"{o:.3f}")
    o = order_of(p, v_exact, lambda N: run_two_level(p, 1.0, N))
    add("two-level sigma=1 order", 0.8 <= o <= 1.2, f"{o:.3f}")

    smooth = spectral_truncation(e, M, psi, SMOOTH_MODES)
    ps = CauchyProblem(K, M, a, delta, smooth, cg_tol=p.cg_tol, lambda1=p.lambda1)
    exact_s = fractional_apply(e, M, -a, smooth)
    s0 = sigma_opt(a)
    o_fine = order_of(ps, exact_s, lambda N: run_three_level(ps, s0, N, "fine"))
    o_sym = order_of(ps, exact_s, lambda N: run_three_level(ps, s0, N, "sym"))
    add(f"three-level sigma_opt fine-grid order ({SMOOTH_MODES}-mode psi)",
        3.5 <= o_fine <= 4.5, f"{o_fine:.3f}")
    add("symmetric start limits the three-level order", o_fine - o_sym >= 0.5,
        f"fine {o_fine:.3f} vs symmetric {o_sym:.3f}")
    return out
