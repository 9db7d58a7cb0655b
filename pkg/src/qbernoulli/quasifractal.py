"""
Quasi-fractal structure of the evolved quantum Bernoulli polynomials.

After tau steps and rescaling by 2**(tau alpha), the state agrees with the
coarse polynomial B_alpha(q', N/2**tau) on the invariant set S_tau (indices
divisible by 2**tau).  Between those points it carries a quantum correction
whose cusps nest dyadically down to the grid spacing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import qmap
from .classical import bernoulli_polynomial


@dataclass(frozen=True)
class InvariantSet:
    tau: int
    N: int
    members: tuple[int, ...]


def invariant_set(tau: int, N: int) -> InvariantSet:
    """S_tau: the n in [0, N) with 2**tau | n."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if 2**tau > N:
        raise ValueError(f"2**tau = {2**tau} exceeds N = {N}")
    return InvariantSet(tau, N, tuple(range(0, N, 2**tau)))


@dataclass(frozen=True)
class SelfSimilarityReport:
    alpha: int
    N: int
    tau: int
    on_set_deviation: float
    off_set_deviation: float
    shift_estimate: float
    correlation: float
    window: int

    def to_json(self) -> dict:
        d = {
            "alpha": self.alpha,
            "N": self.N,
            "tau": self.tau,
            "on_set_dev": self.on_set_deviation,
            "off_set_dev": self.off_set_deviation,
            "shift_estimate": self.shift_estimate,
            "correlation": None if math.isnan(self.correlation) else self.correlation,
            "window": self.window,
        }
        return d


def coarse_values(alpha: int, N: int, tau: int) -> np.ndarray:
    """B_alpha(q'_{n'}, N') on the coarse grid N' = N / 2**tau."""
    return qmap.qbp_values(alpha, N >> tau)


def nearest_coarse_index(N: int, tau: int) -> np.ndarray:
    """Nearest coincident coarse-grid index for every fine index (ties round down)."""
    step = 2**tau
    n = np.arange(N)
    idx = (n + (step - 1) // 2) // step if step > 1 else n
    return np.minimum(idx, (N >> tau) - 1)


def quantum_correction(alpha: int, N: int, tau: int, rescaled=None) -> np.ndarray:
    """Rescaled evolved state minus the coarse polynomial continued off its grid.

    B_alpha(., N') is a degree-alpha polynomial in q, so it has a unique
    continuation to every fine point; the difference vanishes on S_tau.
    Requires N' > alpha.
    """
    if rescaled is None:
        rescaled = qmap.evolve_quantum_poly(alpha, N, tau).values
    Np = N >> tau
    if Np <= alpha:
        raise ValueError(f"coarse grid N'={Np} too small for a degree-{alpha} fit")
    qc = np.arange(Np) / Np
    poly = np.polynomial.Polynomial.fit(qc, coarse_values(alpha, N, tau), alpha)
    return rescaled - poly(np.arange(N) / N)


def _chord_detrended(x: np.ndarray) -> np.ndarray:
    L = x.size - 1
    return x - (x[0] + (x[-1] - x[0]) * np.arange(L + 1) / L)


def nested_window_correlation(profile, L: int, start: int = 0, stop: int | None = None) -> float:
    """Self-similarity of a deviation profile across nested dyadic windows.

    Every aligned window [a, a+L] inside [start, stop) is chord-detrended,
    as is its left half [a, a+L/2].  Point 2i of the window is paired with
    point i of the half (interior points only) and the pairs from all
    windows are pooled into one Pearson correlation.  A window needs its
    right endpoint inside the profile, so L must be below the profile
    length.  NaN when fewer than two pairs exist or a side is constant.
    """
    r = np.asarray(profile, dtype=float)
    stop = r.size if stop is None else stop
    if L < 2 or L & (L - 1):
        raise ValueError(f"window length {L} is not a power of two >= 2")
    xs, ys = [], []
    for a in range(start, stop - L, L):
        full = _chord_detrended(r[a : a + L + 1])
        half = _chord_detrended(r[a : a + L // 2 + 1])
        xs.append(full[2:L:2])
        ys.append(half[1 : L // 2])
    if not xs:
        return float("nan")
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def shift_estimate(values, alpha: int) -> float:
    """Displacement (in q) of the first Fourier harmonic relative to classical B_alpha.

    The classical harmonic is -alpha!/(2 pi i)**alpha; a state equal to
    B_alpha(q + d) has the phase 2 pi d relative to it.
    """
    v = np.asarray(values, dtype=float)
    N = v.size
    c1 = np.mean(v * np.exp(-2j * np.pi * np.arange(N) / N))
    if abs(c1) == 0:
        return 0.0
    ref = -math.factorial(alpha) / (2j * math.pi) ** alpha
    return float(np.angle(c1 / ref) / (2 * math.pi))


def self_similarity_report(alpha: int, N: int, tau: int, window: int | None = None) -> SelfSimilarityReport:
    """Deviation structure of (2**alpha U_B^Q)**tau B_alpha(q_n, N).

    on-set: max over S_tau against B_alpha(q'_{n/2**tau}, N').
    off-set: max over the other points against the nearest coarse value.
    correlation: `nested_window_correlation` of the quantum correction with
    window length `window` (default N/8).
    """
    if 2**tau > N:
        raise ValueError(f"2**tau = {2**tau} exceeds N = {N}")
    E = qmap.evolve_quantum_poly(alpha, N, tau).values
    coarse = coarse_values(alpha, N, tau)
    S = np.array(invariant_set(tau, N).members)
    on = float(np.max(np.abs(E[S] - coarse[S >> tau])))
    mask = np.ones(N, dtype=bool)
    mask[S] = False
    if mask.any():
        near = coarse[nearest_coarse_index(N, tau)]
        off = float(np.max(np.abs(E - near)[mask]))
    else:
        off = 0.0
    window = max(N // 8, 4) if window is None else window
    if tau == 0 or (N >> tau) <= alpha:
        corr = float("nan")
    else:
        corr = nested_window_correlation(quantum_correction(alpha, N, tau, E), window)
    return SelfSimilarityReport(
        alpha, N, tau, on, off, shift_estimate(E, alpha), corr, window
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def zoom_export(alpha: int, N: int, tau: int, window: tuple[int, int], path=None) -> str:
    """CSV n,q,value,classical,deviation of the rescaled state over [start, stop).

    deviation is value minus the nearest coincident coarse-grid value.
    """
    start, stop = window
    if not 0 <= start < stop <= N:
        raise ValueError(f"window {window} empty or outside [0, {N})")
    E = qmap.evolve_quantum_poly(alpha, N, tau).values
    near = coarse_values(alpha, N, tau)[nearest_coarse_index(N, tau)]
    B = bernoulli_polynomial(alpha)
    buf = io.StringIO()
    buf.write(f"# alpha={alpha} N={N} tau={tau} rescale=2^(tau*alpha) "
              "deviation=value-nearest_coarse(B_alpha(q',N/2^tau))\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "q", "value", "classical", "deviation"])
    for n in range(start, stop):
        q = n / N
        w.writerow([n, _fmt(q), _fmt(E[n]), _fmt(B(q)), _fmt(E[n] - near[n])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def zoom_windows(N: int, ratios=(1, 1 / 8, 1 / 64), start: int = 0) -> list[tuple[int, int]]:
    """Nested windows [start, start + N*ratio) for the Fig. 4 -> 6 zoom sequence."""
    return [(start, start + max(1, int(round(N * r)))) for r in ratios]


@dataclass(frozen=True)
class LimitRow:
    N: int
    deviation: float
    slope: float


def classical_limit_report(alpha: int, N_list, tau: int = 0) -> list[LimitRow]:
    """Max |rescaled evolved state - B_alpha| over S_tau for each N, with fitted slopes.

    Each row's slope is the log-log slope to the previous row; the first row
    carries the least-squares slope over the whole list.
    """
    N_list = [int(N) for N in N_list]
    for N in N_list:
        if N & (N - 1):
            raise ValueError(f"N={N} is not a power of two")
        if 2**tau > N:
            raise ValueError(f"2**tau = {2**tau} exceeds N = {N}")
    B = bernoulli_polynomial(alpha)
    devs = []
    for N in N_list:
        E = qmap.evolve_quantum_poly(alpha, N, tau).values
        S = np.arange(0, N, 2**tau)
        devs.append(float(np.max(np.abs(E[S] - B(S / N)))))
    logN = np.log(N_list)
    logd = np.log(devs)
    overall = float(np.polyfit(logN, logd, 1)[0]) if len(N_list) > 1 else float("nan")
    rows = []
    for i, (N, d) in enumerate(zip(N_list, devs)):
        slope = overall if i == 0 else float((logd[i] - logd[i - 1]) / (logN[i] - logN[i - 1]))
        rows.append(LimitRow(N, d, slope))
    return rows


def fitted_slope(rows: list[LimitRow]) -> float:
    return float(np.polyfit(np.log([r.N for r in rows]), np.log([r.deviation for r in rows]), 1)[0])


def report_rows(rows: list[LimitRow]) -> list[dict]:
    return [asdict(r) for r in rows]
