"""
Quantum Bernoulli map: the quantum baker map followed by full decoherence
in the position basis,

    U_B^Q rho = [T rho T^dagger]_diagonal .

On shift states e_k(q_n) = exp(2 pi i k n / N), -N/2 <= k < N/2, one step
acts as a weighted shift: odd k is annihilated, even k goes to k/2 with the
weight s(n) = 1 for even n and 1 - 2|k|/N for odd n.  Because s depends on
the parity of n, the image of e_k is

    (1 - |k|/N) e_{k/2} + (|k|/N) e_{k/2 + N/2}

so a single step is an exact O(N) linear map on Fourier coefficients.  The
analytic evolver iterates that map between one FFT and one inverse FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .baker import BakerUnitary, DensityDiagonal, QuantumGrid

MAX_QPOLY_ALPHA = 12
IMAG_TOL = 1e-10


class DegenerateModeError(ArithmeticError):
    """A weight factor s vanishes, so its reciprocal (mu) is undefined."""


def _as_N(grid) -> int:
    if isinstance(grid, QuantumGrid):
        return grid.N
    N = int(grid)
    if N < 1 or N & (N - 1):
        raise ValueError(f"N={N} is not a power of two")
    return N


# -- shift states -------------------------------------------------------------


@dataclass(frozen=True)
class ShiftIndex:
    k: int
    j: int
    l: int

    @property
    def odd(self) -> int:
        return 2 * self.l + 1


def factor_shift_index(k: int, N: int) -> ShiftIndex:
    """Write k = 2**j (2l + 1) for a nonzero mode in -N/2 <= k < N/2."""
    if k == 0:
        raise ValueError("k = 0 is the constant state e_0, not a shift mode")
    if not -N // 2 <= k < N // 2:
        raise ValueError(f"k={k} outside [-{N // 2}, {N // 2})")
    j = (abs(k) & -abs(k)).bit_length() - 1
    odd = k >> j
    return ShiftIndex(k=k, j=j, l=(odd - 1) // 2)


def mode_order(N: int) -> list[int]:
    """Nonzero modes by ascending |k|, +k before -k; -N/2 comes last."""
    out = []
    for a in range(1, N // 2):
        out += [a, -a]
    if N >= 2:
        out.append(-N // 2)
    return out


def shift_state(k: int, N: int) -> np.ndarray:
    n = np.arange(N)
    return np.exp(2j * np.pi * ((k * n) % N) / N)


def weight_s(jp: int, l: int, n: int, N: int) -> float:
    """Weight s_{j',l}(n, N): 1 for even n, 1 - 2**(j'+1)|2l+1|/N for odd n."""
    if n % 2 == 0:
        return 1.0
    return 1.0 - (2 ** (jp + 1)) * abs(2 * l + 1) / N


def mu(j: int, l: int, n: int, N: int) -> float:
    """mu_{j,l}(n, N) = 1 / prod_{j'=1}^{j} s_{j',l}(n, N)."""
    prod = 1.0
    for jp in range(1, j + 1):
        s = weight_s(jp, l, n, N)
        if s == 0.0:
            raise DegenerateModeError(
                f"s_{{{jp},{l}}}(n={n}, N={N}) = 0 (edge mode |k| = N/2)"
            )
        prod *= s
    return 1.0 / prod


def mu_ratio(j: int, tau: int, l: int, n: int, N: int) -> float:
    """mu_{j,l}/mu_{j+tau,l} as the direct product of s factors (never divides)."""
    prod = 1.0
    for jp in range(j + 1, j + tau + 1):
        prod *= weight_s(jp, l, n, N)
    return prod


# -- one step: brute force and analytic ----------------------------------------


def decohere_step(T: BakerUnitary, rho):
    """Diagonal of T diag(rho) T^dagger, i.e. sum_n |T_{n'n}|^2 rho_n."""
    wrap = isinstance(rho, DensityDiagonal)
    v = rho.values if wrap else np.asarray(rho)
    if v.shape != (T.N,):
        raise ValueError(f"density of shape {v.shape} does not match N={T.N}")
    P = np.abs(T.entries) ** 2
    out = P @ v
    return DensityDiagonal(T.grid, out) if wrap else out


def _signed_k(N: int) -> np.ndarray:
    k = np.arange(N)
    return np.where(k >= N // 2, k - N, k)


def mode_step(c: np.ndarray) -> np.ndarray:
    """One quantum Bernoulli step on Fourier coefficients indexed by k mod N."""
    N = c.shape[0]
    k = _signed_k(N)
    even = k % 2 == 0
    ke = k[even]
    w = np.abs(ke) / N
    ce = c[even]
    out = np.zeros(N, dtype=complex)
    np.add.at(out, (ke // 2) % N, ce * (1 - w))
    np.add.at(out, (ke // 2 + N // 2) % N, ce * w)
    return out


def evolve_density(v, tau: int) -> np.ndarray:
    """(U_B^Q)**tau on a grid function, O(N log N + N tau), no matrix."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    v = np.asarray(v)
    N = v.shape[0]
    c = np.fft.fft(v) / N
    for _ in range(min(tau, N.bit_length())):
        c = mode_step(c)
    out = np.fft.ifft(c) * N
    if np.isrealobj(v):
        return out.real
    return out


def evolve_shift_state_analytic(idx: ShiftIndex, tau: int, grid) -> np.ndarray:
    """(U_B^Q)**tau e_{j,l} on the grid via the exact mode-space weighted shift."""
    N = _as_N(grid)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if idx.j < tau:
        return np.zeros(N, dtype=complex)
    c = np.zeros(N, dtype=complex)
    c[idx.k % N] = 1.0
    for _ in range(tau):
        c = mode_step(c)
    return np.fft.ifft(c) * N


def weighted_shift_closed_form(idx: ShiftIndex, tau: int, grid) -> np.ndarray:
    """Product formula e_{j-tau,l}(q_n) prod_{t<tau} s_{j-t,l}(n, N).

    Exact for tau <= 1.  For tau >= 2 it treats the parity-dependent weight
    as a constant and drops the e_{k/2 + N/2} component, an O(|k|/N) error.
    """
    N = _as_N(grid)
    if idx.j < tau:
        return np.zeros(N, dtype=complex)
    n = np.arange(N)
    weight = np.ones(N)
    odd = n % 2 == 1
    for t in range(tau):
        weight[odd] *= weight_s(idx.j - t, idx.l, 1, N)
    return shift_state(idx.k >> tau, N) * weight


# -- quantum Bernoulli polynomials ---------------------------------------------


def _mode_coefficients(alpha: int, N: int) -> np.ndarray:
    # c_k = -alpha! z_k**alpha, z_k = 1 / (N (1 - e_k^*(1/N))), indexed k mod N
    k = _signed_k(N)
    c = np.zeros(N, dtype=complex)
    nz = k != 0
    z = 1.0 / (N * (1.0 - np.exp(-2j * np.pi * k[nz] / N)))
    c[nz] = -math.factorial(alpha) * z**alpha
    return c


@lru_cache(maxsize=64)
def _qbp_direct(alpha: int, N: int) -> np.ndarray:
    c = _mode_coefficients(alpha, N)
    roots = np.exp(2j * np.pi * np.arange(N) / N)
    n = np.arange(N)
    total = np.zeros(N, dtype=complex)
    comp = np.zeros(N, dtype=complex)
    # Kahan accumulation in fixed order; +k/-k adjacent so imaginary parts cancel early
    for k in mode_order(N):
        term = c[k % N] * roots[(k * n) % N]
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    resid = np.max(np.abs(total.imag)) if N > 1 else 0.0
    if resid > IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds {IMAG_TOL}")
    out = total.real.copy()
    out.setflags(write=False)
    return out


def _qbp_fft(alpha: int, N: int) -> np.ndarray:
    vals = np.fft.ifft(_mode_coefficients(alpha, N)) * N
    resid = np.max(np.abs(vals.imag))
    if resid > IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds {IMAG_TOL}")
    return vals.real


def qbp_values(alpha: int, N: int, method: str = "direct") -> np.ndarray:
    """B_alpha(q_n, N) without the alpha range guard (used inside expansions)."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if method == "direct":
        return np.array(_qbp_direct(alpha, N))
    if method == "fft":
        return _qbp_fft(alpha, N)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class QuantumBernoulliPoly:
    alpha: int
    N: int
    values: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return np.arange(self.N) / self.N


def _check_alpha(alpha: int) -> None:
    if not 1 <= alpha <= MAX_QPOLY_ALPHA:
        raise ValueError(f"alpha={alpha} outside [1, {MAX_QPOLY_ALPHA}]")


def quantum_bernoulli_poly(alpha: int, grid, method: str = "direct") -> QuantumBernoulliPoly:
    """B_alpha(q_n, N) = (alpha!/N**alpha) sum_k -e_k(q_n) / (1 - e_k^*(1/N))**alpha."""
    _check_alpha(alpha)
    N = _as_N(grid)
    return QuantumBernoulliPoly(alpha, N, qbp_values(alpha, N, method))


def quantum_bernoulli_poly_sine(alpha: int, grid) -> QuantumBernoulliPoly:
    """Sine-denominator form with the Nyquist term written separately.

    Each +k/-k pair combines into
        e^{2 pi i k (n + alpha/2)/N} + (-1)^alpha e^{-2 pi i k (n + alpha/2)/N}
    over (2 i N sin(pi k / N))^alpha; k runs to N/2 inclusive, and the
    double-counted k = N/2 term is removed by -(-1)^n / (2N)^alpha.  The
    overall factor -alpha! matches the defining mode sum.
    """
    _check_alpha(alpha)
    N = _as_N(grid)
    n = np.arange(N)
    total = -((-1.0) ** n) / (2.0 * N) ** alpha + 0j
    for k in range(1, N // 2 + 1):
        theta = 2 * np.pi * k * (n + alpha / 2) / N
        den = (2j * N * math.sin(math.pi * k / N)) ** alpha
        total = total + (np.exp(1j * theta) + (-1) ** alpha * np.exp(-1j * theta)) / den
    total = -math.factorial(alpha) * total
    resid = np.max(np.abs(total.imag))
    if resid > IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds {IMAG_TOL}")
    return QuantumBernoulliPoly(alpha, N, total.real)


def closed_form_qbp(alpha: int, N: int) -> np.ndarray:
    """Known closed forms: alpha = 1 and alpha = 2."""
    q = np.arange(N) / N
    if alpha == 1:
        return q - 0.5 + 1 / (2 * N)
    if alpha == 2:
        return q**2 - q + 1 / 6 + (2 / N) * q - 1 / N + 5 / (6 * N**2)
    raise ValueError("closed forms exist only for alpha in {1, 2}")


@dataclass(frozen=True)
class EvolvedQuantumPoly:
    alpha: int
    N: int
    tau: int
    values: np.ndarray  # B_alpha(q_n, N, tau) = 2**(tau alpha) (U_B^Q)**tau B_alpha(q_n, N)

    @property
    def scale(self) -> float:
        return 2.0 ** (-self.tau * self.alpha)

    @property
    def evolved(self) -> np.ndarray:
        return self.values * self.scale


def evolve_quantum_poly(alpha: int, grid, tau: int) -> EvolvedQuantumPoly:
    N = _as_N(grid)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if 2**tau > N:
        return EvolvedQuantumPoly(alpha, N, tau, np.zeros(N))
    if tau == 0:
        return EvolvedQuantumPoly(alpha, N, 0, qbp_values(alpha, N))
    # start from the exact mode coefficients (no k = 0 component), so the
    # state is exactly zero once every mode has been shifted out
    c = _mode_coefficients(alpha, N)
    for _ in range(tau):
        c = mode_step(c)
    vals = (np.fft.ifft(c) * N).real
    return EvolvedQuantumPoly(alpha, N, tau, vals * 2.0 ** (tau * alpha))


def verify_poly_recurrence(alpha: int, grid) -> dict:
    """Residual of B_{a,N}(q_n) - B_{a,N}(q_{n-1}) = (a/N) B_{a-1,N}(q_n), n > 0."""
    N = _as_N(grid)
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    B = qbp_values(alpha, N)
    lhs = B[1:] - B[:-1]
    rhs = np.full(N - 1, 1.0 / N) if alpha == 1 else (alpha / N) * qbp_values(alpha - 1, N)[1:]
    zero_sum = float(abs(np.sum(B)))
    resid = float(np.max(np.abs(lhs - rhs))) if N > 1 else 0.0
    return {
        "alpha": alpha,
        "N": N,
        "max_residual": resid,
        "zero_sum": zero_sum,
        "passed": resid < 1e-9 and zero_sum < 1e-9 * N,
    }


# -- differences and the quantum Euler-Maclaurin expansion ------------------------


def difference_op(v, order: int) -> np.ndarray:
    """rho^(a)(q_n) = N [rho^(a-1)(q_n) - rho^(a-1)(q_{n-1})]; NaN for n < a."""
    if order < 0:
        raise ValueError("order must be non-negative")
    out = np.array(v, dtype=float)
    N = out.shape[0]
    for a in range(order):
        nxt = np.full(N, np.nan)
        nxt[a + 1 :] = N * (out[a + 1 :] - out[a:-1])
        out = nxt
    return out


def quantum_euler_maclaurin(rho, tau: int, K: int) -> np.ndarray:
    """
    rho_0 + sum_{a=1}^{K} 2**(-tau a)/a! [B_a(q_n,N,tau) rho^(a-1)(q_{N-1})
                                      - (-1)^a B_a(1-q_{n+1},N,tau) rho^(a-1)(q_{a-1})]

    The reflected polynomial B_a(1 - q_{n+1}, N) sits at grid index N-1-n and
    is evolved as a grid function by the same analytic evolver.

    Unlike the classical series, a degree-d sample needs K >= d + 1 terms:
    the remainder after K terms is carried by the K-th difference, and
    B_a(1 - q_{n+1}, N) != (-1)^a B_a(q_n, N) so the a = d + 1 term does not
    cancel.  With K = d the residual for rho = q_n is exactly -B_1(q_n, N)/N.
    """
    rho = np.asarray(rho, dtype=float)
    N = rho.shape[0]
    if 2**tau > N:
        raise ValueError(f"2**tau = {2**tau} exceeds N = {N}")
    if not 0 <= K <= min(N, MAX_QPOLY_ALPHA):
        raise ValueError(f"K={K} outside [0, min(N={N}, {MAX_QPOLY_ALPHA})]")
    out = np.full(N, rho.mean())
    reflect = N - 1 - np.arange(N)
    d = rho
    for a in range(1, K + 1):
        if a > 1:
            d = difference_op(rho, a - 1)
        B = qbp_values(a, N)
        left = evolve_density(B, tau)
        right = evolve_density(B[reflect], tau)
        out += (left * d[N - 1] - (-1) ** a * right * d[a - 1]) / math.factorial(a)
    return out
