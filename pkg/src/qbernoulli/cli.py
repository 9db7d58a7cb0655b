"""
qbmap: command-line runner for the classical and quantum Bernoulli maps.

    qbmap poly    --alpha 3 --D 10 --output b3.csv
    qbmap evolve  --alpha 3 --D 12 --tau 6 --rescale --output run/
    qbmap expand  --D 6 --tau 2 --coeffs 0,0,1
    qbmap verify
    qbmap fractal --alpha 3 --D 12 --tau 6 --output frac/
    qbmap bench   --output bench.json

Exit codes: 0 success, 1 verification failure, 2 usage error.
Every output is a deterministic function of the arguments; wall-clock
timings appear only in `bench` and behind `evolve --timing`.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baker, bench, checks, classical, qmap, quasifractal

ENV_THREADS = "QBMAP_THREADS"
MAX_ORACLE_D = baker.MAX_DENSE_D
ORACLE_TOL = 1e-9


class UsageError(Exception):
    pass


def resolve_threads(flag: int | None) -> int:
    """--threads beats QBMAP_THREADS beats auto; 0 means auto."""
    n = flag
    if n is None:
        env = os.environ.get(ENV_THREADS, "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise UsageError(f"{ENV_THREADS}={env!r} is not an integer")
    if n is None or n == 0:
        return os.cpu_count() or 1
    if n < 0:
        raise UsageError(f"threads must be >= 0, got {n}")
    return n


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def _grid_csv(q, columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "q", *columns])
    cols = list(columns.values())
    for n in range(len(q)):
        w.writerow([n, _fmt(q[n]), *(_fmt(c[n]) if c is not None else "" for c in cols)])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _check_D(D: int, hi: int | None = None) -> int:
    if D < 2:
        raise UsageError(f"D must be >= 2, got {D}")
    if hi is not None and D > hi:
        raise UsageError(f"D={D} exceeds {hi} on this path")
    return 2**D


def _check_alpha(alpha: int) -> None:
    if alpha < 1:
        raise UsageError("alpha ≥ 1; B_0 is the uniform state")
    if alpha > qmap.MAX_QPOLY_ALPHA:
        raise UsageError(f"alpha must be <= {qmap.MAX_QPOLY_ALPHA}")


def _check_tau(tau: int, N: int) -> None:
    if tau < 0:
        raise UsageError("tau must be >= 0")
    if 2**tau > N:
        raise UsageError(f"2^tau = {2**tau} exceeds N = {N}")


# -- poly -----------------------------------------------------------------


def poly_table(alpha: int, D: int) -> str:
    _check_alpha(alpha)
    N = _check_D(D)
    q = np.arange(N) / N
    closed = qmap.closed_form_qbp(alpha, N) if alpha <= 2 else None
    return _grid_csv(q, {
        "classical": classical.bernoulli_polynomial(alpha)(q),
        "quantum": qmap.quantum_bernoulli_poly(alpha, N).values,
        "quantum_sine": qmap.quantum_bernoulli_poly_sine(alpha, N).values,
        "closed_form": closed,
    })


def cmd_poly(args) -> int:
    _emit(poly_table(args.alpha, args.D), args.output)
    return 0


# -- evolve ---------------------------------------------------------------


def _read_state_csv(path, N: int) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    if not rows or "value" not in rows[0]:
        raise UsageError(f"{path}: expected a CSV with a 'value' column")
    v = np.array([float(r["value"]) for r in rows])
    if v.size != N:
        raise UsageError(f"{path}: {v.size} rows but N = {N}")
    return v


def initial_state(kind: str, alpha: int, N: int, path=None) -> np.ndarray:
    if kind == "qpoly":
        return qmap.qbp_values(alpha, N)
    if kind == "classical":
        return classical.sample(classical.bernoulli_polynomial(alpha), N)
    if kind == "csv":
        if path is None:
            raise UsageError("--state csv needs --input")
        return _read_state_csv(path, N)
    raise UsageError(f"unknown state {kind!r}")


def evolve_run(alpha, D, tau, rescale=False, state="qpoly", input_path=None,
               oracle=False, timing=False):
    """Per-step grid values plus a JSON-ready report."""
    _check_alpha(alpha)
    N = _check_D(D)
    _check_tau(tau, N)
    if oracle and D > MAX_ORACLE_D:
        raise UsageError(f"--oracle needs D <= {MAX_ORACLE_D}")
    v0 = initial_state(state, alpha, N, input_path)
    t0 = time.perf_counter()
    steps = []
    if state == "qpoly":
        # exact mode coefficients: equilibrium comes out as exact zeros
        for t in range(tau + 1):
            steps.append(qmap.evolve_quantum_poly(alpha, N, t).evolved)
    else:
        v = v0
        steps.append(v)
        for _ in range(tau):
            v = qmap.evolve_density(v, 1)
            steps.append(v)
    elapsed = time.perf_counter() - t0
    report = {
        "alpha": alpha, "N": N, "D": D, "tau": tau, "state": state,
        "rescale": bool(rescale),
        "steps": [],
    }
    oracle_diff = None
    if oracle:
        T = baker.build_baker_unitary(baker.QuantumGrid(D))
        w = v0
        oracle_diff = 0.0
        for t in range(1, tau + 1):
            w = qmap.decohere_step(T, w)
            oracle_diff = max(oracle_diff, float(np.max(np.abs(w - steps[t]))))
        report["oracle_max_diff"] = oracle_diff
        report["oracle_tol"] = ORACLE_TOL
    out = []
    for t, v in enumerate(steps):
        s = 2.0 ** (t * alpha) if rescale else 1.0
        out.append(v * s)
        report["steps"].append({
            "tau": t,
            "scale": s,
            "sum": float(math.fsum(v)),
            "max_abs": float(np.max(np.abs(v * s))),
        })
    if state == "qpoly" and tau >= 1:
        report["self_similarity"] = quasifractal.self_similarity_report(alpha, N, tau).to_json()
    if timing:
        report["analytic_seconds"] = elapsed
    return out, report


def cmd_evolve(args) -> int:
    steps, report = evolve_run(args.alpha, args.D, args.tau, args.rescale, args.state,
                               args.input, args.oracle, args.timing)
    q = np.arange(2**args.D) / 2**args.D
    if args.output is None:
        sys.stdout.write(_grid_csv(q, {"value": steps[-1]}))
    else:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        for t, v in enumerate(steps):
            (d / f"step_{t:03d}.csv").write_text(_grid_csv(q, {"value": v}))
        (d / "report.json").write_text(_dump_json(report))
    if args.dump_unitary:
        _check_D(args.D, MAX_ORACLE_D)
        baker.dump_unitary(baker.build_baker_unitary(baker.QuantumGrid(args.D)), args.dump_unitary)
    if report.get("oracle_max_diff", 0.0) > ORACLE_TOL:
        print(f"oracle mismatch {report['oracle_max_diff']:.3e} > {ORACLE_TOL}", file=sys.stderr)
        return 1
    return 0


# -- expand ---------------------------------------------------------------


def _parse_coeffs(text: str) -> list[float]:
    try:
        return [float(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"bad --coeffs {text!r}")


def expand_run(D, tau, K=None, coeffs=None, degree=3, seed=0) -> dict:
    """Classical and quantum Euler-Maclaurin expansion of one polynomial density."""
    N = _check_D(D)
    _check_tau(tau, N)
    if coeffs is None:
        rng = np.random.default_rng(seed)
        coeffs = (rng.integers(-8, 9, degree + 1) / 8.0).tolist()
    f = classical.PolynomialRep(coeffs)
    K = f.degree + 1 if K is None else K
    if not 0 <= K <= min(N, qmap.MAX_QPOLY_ALPHA):
        raise UsageError(f"K={K} outside [0, {min(N, qmap.MAX_QPOLY_ALPHA)}]")
    q = np.arange(N) / N
    rho = f(q)
    exp = classical.euler_maclaurin_expand(f, max(K, f.degree)) if K >= f.degree else None
    quantum = qmap.quantum_euler_maclaurin(rho, tau, K)
    direct = qmap.evolve_density(rho, tau)
    return {
        "N": N, "tau": tau, "K": K,
        "poly": f.to_json(),
        "classical": None if exp is None else {
            "rho0": exp.rho0,
            "left_coefficients": [{"alpha": a, "value": c} for a, _, c in exp.terms],
            "evolved": spectral_json(f, tau),
        },
        "quantum_max_error": float(np.max(np.abs(quantum - direct))),
        "values": {"quantum": quantum, "direct": direct},
    }


def spectral_json(f, tau: int) -> dict:
    return classical.spectral_evolve_classical(f, tau).to_json()


def cmd_expand(args) -> int:
    coeffs = _parse_coeffs(args.coeffs) if args.coeffs else None
    res = expand_run(args.D, args.tau, args.K, coeffs, args.degree, args.seed)
    vals = res.pop("values")
    if args.output is None:
        sys.stdout.write(_dump_json(res))
    else:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        (d / "expansion.json").write_text(_dump_json(res))
        q = np.arange(res["N"]) / res["N"]
        (d / "expansion.csv").write_text(_grid_csv(q, vals))
    return 0


# -- verify ---------------------------------------------------------------


def cmd_verify(args) -> int:
    results = checks.run_suite(resolve_threads(args.threads))
    if args.json:
        rows = [{"name": r.name, "passed": r.passed,
                 "value": None if math.isnan(r.value) else r.value,
                 "tol": None if math.isnan(r.tol) else r.tol, "detail": r.detail}
                for r in results]
        _emit(_dump_json(rows), args.output)
    else:
        _emit(checks.format_table(results) + "\n", args.output)
    failed = [r.name for r in results if not r.passed]
    for name in failed:
        print(f"FAILED: {name}", file=sys.stderr)
    return 1 if failed else 0


# -- fractal --------------------------------------------------------------


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}")


def fractal_run(alpha, D, tau, window=None, limit_N=None, threads=1):
    _check_alpha(alpha)
    N = _check_D(D)
    _check_tau(tau, N)
    if window is not None and (window < 4 or window & (window - 1) or window > N // 2):
        raise UsageError(f"window {window} must be a power of two in [4, N/2]")
    limit_N = limit_N or [2**d for d in range(6, 13)]
    for M in limit_N:
        if M < 4 or M & (M - 1):
            raise UsageError(f"limit N={M} is not a power of two >= 4")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        fut_rep = ex.submit(quasifractal.self_similarity_report, alpha, N, tau, window)
        fut_lim = ex.submit(quasifractal.classical_limit_report, alpha, limit_N, 0)
        rep, rows = fut_rep.result(), fut_lim.result()
    zooms = [(w, quasifractal.zoom_export(alpha, N, tau, w))
             for w in quasifractal.zoom_windows(N)]
    report = rep.to_json()
    report["classical_limit"] = {
        "tau": 0,
        "fitted_slope": quasifractal.fitted_slope(rows) if len(rows) > 1 else None,
        "rows": quasifractal.report_rows(rows),
    }
    report["zoom_windows"] = [list(w) for w, _ in zooms]
    return report, zooms


def cmd_fractal(args) -> int:
    limit = _parse_int_list(args.limit_N) if args.limit_N else None
    report, zooms = fractal_run(args.alpha, args.D, args.tau, args.window, limit,
                                resolve_threads(args.threads))
    if args.output is None:
        sys.stdout.write(_dump_json(report))
        return 0
    d = Path(args.output)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.json").write_text(_dump_json(report))
    for i, (_, text) in enumerate(zooms):
        (d / f"zoom_{i}.csv").write_text(text)
    lines = [f"{'N':>6} {'deviation':>24} {'slope':>10}"]
    for r in report["classical_limit"]["rows"]:
        lines.append(f"{r['N']:>6} {r['deviation']:>24.17g} {r['slope']:>10.4f}")
    (d / "limit.txt").write_text("\n".join(lines) + "\n")
    return 0


# -- bench ----------------------------------------------------------------


def cmd_bench(args) -> int:
    if not 2 <= args.D_min <= args.D_max:
        raise UsageError("need 2 <= --D-min <= --D-max")
    if args.D_max > baker.MAX_DENSE_D and args.dense_max_D > baker.MAX_DENSE_D:
        raise UsageError(f"dense path limited to D <= {baker.MAX_DENSE_D}")
    res = bench.run_bench(args.D_min, args.D_max, args.tau, args.repeat,
                          min(args.dense_max_D, baker.MAX_DENSE_D))
    _emit(_dump_json(res), args.output)
    return 1 if res["criterion"]["status"] == "fail" else 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbmap", description="Classical and quantum Bernoulli map experiments.")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (0 = auto; default from {ENV_THREADS})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("poly", help="B_alpha in classical, spectral, sine and closed forms")
    s.add_argument("--alpha", type=int, required=True)
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--output")
    s.set_defaults(func=cmd_poly)

    s = sub.add_parser("evolve", help="evolve a density under the quantum Bernoulli map")
    s.add_argument("--alpha", type=int, default=3)
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--tau", type=int, required=True)
    s.add_argument("--rescale", action="store_true", help="multiply step t by 2^(t*alpha)")
    s.add_argument("--state", choices=["qpoly", "classical", "csv"], default="qpoly")
    s.add_argument("--input", help="CSV with a value column (for --state csv)")
    s.add_argument("--oracle", action="store_true", help="cross-check against the baker matrix")
    s.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    s.add_argument("--dump-unitary", help="write the baker matrix in binary form")
    s.add_argument("--output", help="directory for step CSVs and report.json")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("expand", help="Euler-Maclaurin expansion of a polynomial density")
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--tau", type=int, default=0)
    s.add_argument("--K", type=int, default=None, help="number of terms (default degree + 1)")
    s.add_argument("--coeffs", help="comma-separated c0,c1,... (default: random, see --seed)")
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output")
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("verify", help="run the invariant suite")
    s.add_argument("--json", action="store_true")
    s.add_argument("--output")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("fractal", help="quasi-fractal report, zoom CSVs and classical-limit table")
    s.add_argument("--alpha", type=int, default=3)
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--tau", type=int, required=True)
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--limit-N", default=None, help="comma-separated N values for the limit table")
    s.add_argument("--output")
    s.set_defaults(func=cmd_fractal)

    s = sub.add_parser("bench", help="dense matrix vs analytic timing")
    s.add_argument("--D-min", type=int, default=4)
    s.add_argument("--D-max", type=int, default=12)
    s.add_argument("--tau", type=int, default=6)
    s.add_argument("--repeat", type=int, default=1)
    s.add_argument("--dense-max-D", type=int, default=11,
                   help="largest D that runs the dense path (D=12 costs ~9 s per step)")
    s.add_argument("--output")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
