"""Invariant suite behind `qbmap verify`; each check returns one table row."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import baker, classical, qmap, quasifractal


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""


def _row(name, value, tol, detail="", strict=True) -> CheckResult:
    ok = bool(value < tol) if strict else bool(value <= tol)
    return CheckResult(name, ok, float(value), float(tol), detail)


def check_unitarity() -> CheckResult:
    worst = 0.0
    for D in range(2, 9):
        T = baker.build_baker_unitary(baker.QuantumGrid(D)).entries
        I = np.eye(T.shape[0])
        worst = max(worst, np.abs(T @ T.conj().T - I).max(), np.abs(T.conj().T @ T - I).max())
    return _row("Unitarity", worst, 1e-10, "N=4..256, T T^+ and T^+ T")


def check_trace_hermiticity() -> CheckResult:
    rng = np.random.default_rng(0)
    worst = 0.0
    for D in (4, 5):
        T = baker.build_baker_unitary(baker.QuantumGrid(D))
        rho = rng.random(T.N)
        M = baker.baker_step_full(T, rho)
        worst = max(worst, abs(np.trace(M) - rho.sum()), np.abs(M - M.conj().T).max())
    return _row("Trace and Hermiticity preservation", worst, 1e-12, "N=16, 32")


def check_completeness() -> CheckResult:
    worst = 0.0
    for D in (2, 3, 6):
        F = baker.overlap_matrix(baker.QuantumGrid(D))
        worst = max(worst, np.abs(F @ F.conj().T - np.eye(F.shape[0])).max())
    return _row("Completeness", worst, 1e-12, "DFT overlap unitarity")


def check_eigen_decay() -> CheckResult:
    q = np.linspace(0.0, 1.0, 2**12, endpoint=False)
    worst = 0.0
    for a in range(9):
        B = classical.bernoulli_polynomial(a)
        worst = max(worst, np.abs(classical.fp_bernoulli_apply(B)(q) - 2.0**-a * B(q)).max())
    return _row("Eigen-decay", worst, 1e-12, "alpha<=8, 2^12 samples")


def check_biorthogonality() -> CheckResult:
    worst = 0.0
    for a in range(9):
        B = classical.bernoulli_polynomial(a)
        for b in range(9):
            worst = max(worst, abs(classical.left_functional(b, B) - (a == b)))
    return _row("Biorthogonality", worst, 1e-10, "alpha,beta<=8")


def check_exact_reconstruction() -> CheckResult:
    rng = np.random.default_rng(1)
    worst = 0.0
    for d in range(9):
        f = classical.PolynomialRep(rng.uniform(-1, 1, d + 1))
        g = classical.euler_maclaurin_expand(f, max(d, 1)).reassemble()
        n = max(f.coeffs.size, g.coeffs.size)
        worst = max(worst, np.abs(np.pad(f.coeffs, (0, n - f.coeffs.size)) - np.pad(g.coeffs, (0, n - g.coeffs.size))).max())
    return _row("Exact reconstruction", worst, 1e-12, "degree<=8")


def check_projection_commutation() -> CheckResult:
    worst = 0.0
    for N in (16, 64):
        for g in (lambda q: q, lambda q: q**2):
            rho = classical.Density2D(lambda q, p, g=g: g(q) + 0 * p, N)
            lhs = classical.project_to_bernoulli(classical.baker_fp_apply_2d(rho))
            rhs = classical.sample(lambda q, g=g: 0.5 * (g(q / 2) + g((1 + q) / 2)), N)
            worst = max(worst, np.abs(lhs - rhs).max())
    return _row("Projection commutation", worst, 1e-10, "N=16, 64")


def check_adjoint() -> CheckResult:
    from scipy.integrate import simpson

    rng = np.random.default_rng(2)
    q = np.linspace(0, 1, 2**14 + 1)
    worst = 0.0
    for _ in range(5):
        X = classical.PolynomialRep(rng.uniform(-1, 1, 6))
        Y = classical.PolynomialRep(rng.uniform(-1, 1, 6))
        # (U^+ Y)(q) splits at q = 1/2; integrate each smooth half separately
        h1, h2 = q[: 2**13 + 1], q[2**13 :]
        lhs = simpson(X(h1) * Y(2 * h1), x=h1) + simpson(X(h2) * Y(2 * h2 - 1), x=h2)
        rhs = simpson(Y(q) * classical.fp_bernoulli_apply(X)(q), x=q)
        worst = max(worst, abs(lhs - rhs))
    return _row("Adjoint contract", worst, 1e-8, "Simpson, 2^14 panels")


def check_oracle_equivalence() -> CheckResult:
    worst = 0.0
    for D in (2, 3, 4, 5):
        T = baker.build_baker_unitary(baker.QuantumGrid(D))
        N = T.N
        for k in qmap.mode_order(N):
            idx = qmap.factor_shift_index(k, N)
            v = qmap.shift_state(k, N)
            for tau in range(D + 1):
                if tau:
                    v = qmap.decohere_step(T, v.real) + 1j * qmap.decohere_step(T, v.imag)
                worst = max(worst, np.abs(v - qmap.evolve_shift_state_analytic(idx, tau, N)).max())
    return _row("Oracle equivalence", worst, 1e-10, "all modes, tau<=D, N=4..32")


def check_quantum_eigen_decay() -> CheckResult:
    worst = 0.0
    for D in (4, 5):
        T = baker.build_baker_unitary(baker.QuantumGrid(D))
        for a in (1, 2, 3):
            v = qmap.qbp_values(a, T.N)
            for tau in range(1, D + 1):
                v = qmap.decohere_step(T, v)
                ev = qmap.evolve_quantum_poly(a, T.N, tau)
                worst = max(worst, np.abs(v - ev.scale * ev.values).max())
    return _row("Eigen-decay with quantum correction", worst, 1e-9, "matrix oracle, N=16, 32")


def check_zero_sum() -> CheckResult:
    worst = 0.0
    for N in (64, 1024):
        for a in (1, 2, 3, 4):
            for tau in range(0, N.bit_length()):
                worst = max(worst, abs(qmap.evolve_quantum_poly(a, N, tau).evolved.sum()) / N)
    return _row("Zero-sum conservation", worst, 1e-9, "sum / N")


def check_appendix() -> CheckResult:
    worst = 0.0
    for D in range(3, 11):
        N = 2**D
        for a in (1, 2):
            worst = max(worst, np.abs(qmap.qbp_values(a, N) - qmap.closed_form_qbp(a, N)).max())
        for a in range(1, 7):
            rep = qmap.verify_poly_recurrence(a, N)
            worst = max(worst, rep["max_residual"], rep["zero_sum"] / N)
    return _row("Appendix identities", worst, 1e-9, "closed forms, zero sum, recurrence")


def check_quantum_em() -> CheckResult:
    worst = 0.0
    rng = np.random.default_rng(3)
    for N in (16, 64, 256):
        q = np.arange(N) / N
        for d in range(6):
            # dyadic coefficients keep the samples exact; the d-th difference
            # would otherwise amplify input rounding by about (2N)**d
            f = classical.PolynomialRep(rng.integers(-8, 9, d + 1) / 8.0)
            worst = max(worst, np.abs(qmap.quantum_euler_maclaurin(f(q), 0, d + 1) - f(q)).max())
    T = baker.build_baker_unitary(baker.QuantumGrid(6))
    q = T.grid.q
    rho = q**2
    for tau in (1, 2):
        v = rho.copy()
        for _ in range(tau):
            v = qmap.decohere_step(T, v)
        worst = max(worst, np.abs(qmap.quantum_euler_maclaurin(rho, tau, 3) - v).max())
    return _row("Quantum Euler-Maclaurin", worst, 1e-8, "K=d+1; tau=0 exact, tau=1,2 vs oracle")


def check_equilibrium() -> CheckResult:
    worst = 0.0
    for N in (16, 64, 256):
        D = N.bit_length() - 1
        for a in (1, 2, 3):
            B = qmap.qbp_values(a, N)
            worst = max(worst, np.abs(qmap.evolve_density(B, D)).max() / np.abs(B).max())
    return _row("Equilibrium", worst, 1e-10, "(U^Q)^D B = 0")


def check_approximate_eigenstate() -> CheckResult:
    # alpha = 1 is excluded: its max-norm defect is a fixed spike at n = N-1
    worst = 0.0
    for a in (2, 3):
        for tau in (1, 2):
            rel = []
            for N in (256, 1024, 4096):
                B = qmap.qbp_values(a, N)
                E = qmap.evolve_quantum_poly(a, N, tau).values
                rel.append(np.abs(E - B).max() / np.abs(B).max())
            worst = max(worst, rel[1] / rel[0], rel[2] / rel[1])
    return _row("Approximate eigenstate property", worst, 1.0, "max ratio of successive defects, alpha=2,3")


def check_qem_termination() -> CheckResult:
    worst = 0.0
    for N in (16, 64):
        q = np.arange(N) / N
        for d in range(4):
            rho = q**d
            for a in range(d + 2, d + 5):
                term = qmap.quantum_euler_maclaurin(rho, 0, a) - qmap.quantum_euler_maclaurin(rho, 0, a - 1)
                worst = max(worst, np.abs(term).max())
    return _row("Termination of the quantum Euler-Maclaurin sum", worst, 1e-12, "terms alpha >= d+2 vanish")


def check_classical_limit() -> CheckResult:
    Ns = [2**D for D in range(6, 13)]
    worst = 0.0
    for a in (1, 2, 3):
        rows = quasifractal.classical_limit_report(a, Ns)
        worst = max(worst, abs(quasifractal.fitted_slope(rows) + 1))
    return _row("Classical limit of polynomials", worst, 0.15, "|slope + 1|, N=64..4096", strict=False)


def check_nesting() -> CheckResult:
    bad = 0
    N = 256
    for tau in range(8):
        a = set(quasifractal.invariant_set(tau + 1, N).members)
        b = set(quasifractal.invariant_set(tau, N).members)
        bad += not a <= b
    return _row("Nesting", bad, 1, "S_{tau+1} subset of S_tau")


SUITE: list[Callable[[], CheckResult]] = [
    check_unitarity,
    check_trace_hermiticity,
    check_completeness,
    check_eigen_decay,
    check_biorthogonality,
    check_exact_reconstruction,
    check_projection_commutation,
    check_adjoint,
    check_oracle_equivalence,
    check_quantum_eigen_decay,
    check_approximate_eigenstate,
    check_zero_sum,
    check_appendix,
    check_quantum_em,
    check_qem_termination,
    check_equilibrium,
    check_classical_limit,
    check_nesting,
]


def _safe(check) -> CheckResult:
    try:
        return check()
    except Exception as exc:  # reported as a failed row
        return CheckResult(check.__name__, False, math.nan, math.nan, f"error: {exc}")


def run_suite(threads: int = 1) -> list[CheckResult]:
    if threads <= 1:
        return [_safe(c) for c in SUITE]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_safe, SUITE))


def format_table(results: list[CheckResult]) -> str:
    lines = [f"{'invariant':<48} {'status':<6} {'value':>12} {'tol':>10}  detail"]
    lines.append("-" * 98)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<48} {status:<6} {r.value:>12.3e} {r.tol:>10.1e}  {r.detail}")
    return "\n".join(lines)
