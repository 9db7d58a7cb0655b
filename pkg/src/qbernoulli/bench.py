"""Timing harness: dense baker-matrix evolution against the analytic mode evolver."""

from __future__ import annotations

import time

import numpy as np

from . import baker, qmap

SPEEDUP_TARGET = 50.0
SPEEDUP_FLOOR = 10.0
CRITERION_N = 1024


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_row(D: int, tau: int, repeat: int = 1, dense: bool = True) -> dict:
    """One row: build time, two dense step variants and the analytic path.

    dense_full_s forms T diag(rho) T^+ every step and keeps its diagonal (the
    literal brute-force path); dense_diag_s uses the |T|^2 mat-vec shortcut.
    Speedups exclude construction time.
    """
    N = 2**D
    rho = qmap.qbp_values(3, N)
    row = {"D": D, "N": N, "tau": tau}
    qmap.evolve_density(rho, tau)  # warm-up
    t_an = _best(lambda: qmap.evolve_density(rho, tau), repeat)
    row["analytic_s"] = t_an
    if not dense:
        row.update(build_s=None, dense_full_s=None, dense_diag_s=None,
                   speedup=None, speedup_diag=None)
        return row
    t0 = time.perf_counter()
    T = baker.build_baker_unitary(baker.QuantumGrid(D))
    row["build_s"] = time.perf_counter() - t0

    def full():
        v = rho
        for _ in range(tau):
            v = np.real(np.diagonal(baker.baker_step_full(T, v))).copy()
        return v

    def diag():
        v = rho
        for _ in range(tau):
            v = qmap.decohere_step(T, v)
        return v

    row["dense_full_s"] = _best(full, repeat)
    row["dense_diag_s"] = _best(diag, repeat)
    row["speedup"] = row["dense_full_s"] / max(t_an, 1e-12)
    row["speedup_diag"] = row["dense_diag_s"] / max(t_an, 1e-12)
    return row


def run_bench(D_min=4, D_max=12, tau=6, repeat=1, dense_max_D=11) -> dict:
    rows = []
    for D in range(D_min, D_max + 1):
        t = min(tau, D)
        rows.append(bench_row(D, t, repeat, dense=D <= dense_max_D))
    crit = next((r for r in rows if r["N"] == CRITERION_N and r["speedup"] is not None), None)
    if crit is None:
        status = "not-run"
    elif crit["speedup"] >= SPEEDUP_TARGET:
        status = "pass"
    elif crit["speedup"] >= SPEEDUP_FLOOR:
        status = "below-target"
    else:
        status = "fail"
    return {
        "rows": rows,
        "criterion": {
            "N": CRITERION_N,
            "tau": tau,
            "speedup": None if crit is None else crit["speedup"],
            "target": SPEEDUP_TARGET,
            "floor": SPEEDUP_FLOOR,
            "status": status,
        },
    }
