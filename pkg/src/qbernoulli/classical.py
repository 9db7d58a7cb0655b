"""
Classical Bernoulli map on the unit interval.

Densities are exact polynomial coefficient lists so that eigen-identities
hold to machine precision.  The Frobenius-Perron operator is

    (U_B f)(q) = [f(q/2) + f((1+q)/2)] / 2

its right eigenfunctions are the Bernoulli polynomials B_a with eigenvalue
2**-a, and the left eigenfunctionals are

    (B~_a | f) = (1/a!) * integral_0^1 f^(a)(q) dq.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_BERNOULLI_DEGREE = 30


class PolynomialRep:
    """Polynomial on [0, 1] stored as coefficients c_0..c_d (value = sum c_a q**a)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[float]):
        c = np.array(coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        nz = np.flatnonzero(c)
        d = int(nz[-1]) if nz.size else 0
        self.coeffs = c[: d + 1].copy()
        self.coeffs.setflags(write=False)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, q):
        # Horner; works on scalars and arrays
        q = np.asarray(q, dtype=float)
        out = np.zeros_like(q) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            out = out * q + c
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"PolynomialRep({self.coeffs.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, PolynomialRep):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __add__(self, other: "PolynomialRep") -> "PolynomialRep":
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n)
        a[: self.coeffs.size] += self.coeffs
        a[: other.coeffs.size] += other.coeffs
        return PolynomialRep(a)

    def __sub__(self, other: "PolynomialRep") -> "PolynomialRep":
        return self + other.scale(-1.0)

    def scale(self, s: float) -> "PolynomialRep":
        return PolynomialRep(self.coeffs * s)

    def derivative(self, order: int = 1) -> "PolynomialRep":
        c = self.coeffs
        for _ in range(order):
            if c.size == 1:
                return PolynomialRep([0.0])
            c = c[1:] * np.arange(1, c.size)
        return PolynomialRep(c)

    def integral01(self) -> float:
        return float(np.sum(self.coeffs / np.arange(1, self.coeffs.size + 1)))

    def affine(self, a: float, b: float) -> "PolynomialRep":
        """Return q -> f(a*q + b) via binomial expansion."""
        d = self.degree
        out = np.zeros(d + 1)
        for m, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            # (a q + b)^m = sum_r C(m, r) a^r b^(m-r) q^r
            for r in range(m + 1):
                out[r] += c * math.comb(m, r) * a**r * b ** (m - r)
        return PolynomialRep(out)

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "PolynomialRep":
        p = cls(obj["coeffs"])
        if p.degree != int(obj["degree"]):
            raise ValueError(f"degree {obj['degree']} does not match coefficients")
        return p


@lru_cache(maxsize=None)
def _bernoulli_numbers(n: int) -> tuple[Fraction, ...]:
    # B_0..B_n with B_1 = -1/2, from sum_{k<m+1} C(m+1, k) B_k = 0
    B = [Fraction(1)]
    for m in range(1, n + 1):
        s = sum(math.comb(m + 1, k) * B[k] for k in range(m))
        B.append(-s / (m + 1))
    return tuple(B)


@lru_cache(maxsize=None)
def _bernoulli_coeffs_exact(alpha: int) -> tuple[Fraction, ...]:
    # B_a(q) = sum_k C(a, k) B_k q^(a-k); coefficient of q^r is C(a, r) B_{a-r}
    B = _bernoulli_numbers(alpha)
    return tuple(math.comb(alpha, r) * B[alpha - r] for r in range(alpha + 1))


def bernoulli_polynomial(alpha: int) -> PolynomialRep:
    """Bernoulli polynomial B_alpha as exact-rational coefficients rounded to double."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha > MAX_BERNOULLI_DEGREE:
        raise ValueError(
            f"alpha={alpha} exceeds {MAX_BERNOULLI_DEGREE} (coefficient growth guard)"
        )
    return PolynomialRep([float(c) for c in _bernoulli_coeffs_exact(alpha)])


def bernoulli_fourier(alpha: int, q, kmax: int = 2**16):
    """Truncated coherent-state sum -sum_k a!/(2 pi i k)^a exp(2 pi i k q), |k| <= kmax.

    Approximation only; `bernoulli_polynomial` is the ground truth.  The sum
    over the shift states e_{j,l} with k = 2**j (2l+1) is the same as the sum
    over all nonzero k.
    """
    if alpha < 1:
        raise ValueError("Fourier form needs alpha >= 1")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    k = np.arange(1, kmax + 1, dtype=float)
    amp = math.factorial(alpha) / (2 * np.pi * k) ** alpha
    # k and -k combine into 2 Re[(1/i^a) e^{2 pi i k q}]
    phase = np.exp(-0.5j * np.pi * alpha)
    out = np.empty(q.size)
    for i, x in enumerate(q):
        out[i] = -2.0 * np.sum(amp * (phase * np.exp(2j * np.pi * k * x)).real)
    return out


def fp_bernoulli_apply(f: PolynomialRep) -> PolynomialRep:
    """One step of the Bernoulli Frobenius-Perron operator, coefficient-exact."""
    return (f.affine(0.5, 0.0) + f.affine(0.5, 0.5)).scale(0.5)


def fp_bernoulli_adjoint_apply(f: PolynomialRep | Callable, q: float) -> float:
    """(U_B^dagger f)(q) = f(2q) for q < 1/2, f(2q - 1) otherwise."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q={q} outside [0, 1)")
    x = 2.0 * q if q < 0.5 else 2.0 * q - 1.0
    return float(f(x))


def fp_bernoulli_adjoint_grid(values) -> np.ndarray:
    """Adjoint on grid samples at q_n = n/N: v(2q mod 1) is v[2n mod N]."""
    v = np.asarray(values)
    N = v.shape[0]
    return v[(2 * np.arange(N)) % N]


def left_functional(alpha: int, f: PolynomialRep) -> float:
    """(B~_alpha | f) = (1/alpha!) * [f^(alpha-1)(1) - f^(alpha-1)(0)]; alpha=0 is the mean."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return f.integral01()
    g = f.derivative(alpha - 1)
    return float((g(1.0) - g(0.0)) / math.factorial(alpha))


@dataclass(frozen=True)
class ClassicalSpectralExpansion:
    rho0: float
    terms: list[tuple[int, PolynomialRep, float]] = field(default_factory=list)
    K: int = 0

    def reassemble(self, tau: int = 0) -> PolynomialRep:
        out = PolynomialRep([self.rho0])
        for alpha, right, left in self.terms:
            out = out + right.scale(left * 2.0 ** (-alpha * tau))
        return out


def euler_maclaurin_expand(f: PolynomialRep, K: int) -> ClassicalSpectralExpansion:
    """Expand f over Bernoulli polynomials: f = rho0 + sum_a B_a (B~_a | f)."""
    if K < f.degree:
        warnings.warn(
            f"K={K} < degree {f.degree}: reconstruction is truncated", stacklevel=2
        )
    terms = [
        (a, bernoulli_polynomial(a), left_functional(a, f)) for a in range(1, K + 1)
    ]
    return ClassicalSpectralExpansion(rho0=left_functional(0, f), terms=terms, K=K)


def spectral_evolve_classical(f: PolynomialRep, tau: int, K: int | None = None) -> PolynomialRep:
    """U_B^tau f through the generalized spectral representation (decay 2**(-a tau))."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    K = f.degree if K is None else K
    return euler_maclaurin_expand(f, K).reassemble(tau)


# -- baker map on the unit square -------------------------------------------


@dataclass(frozen=True)
class Density2D:
    """Density on the unit square, sampled at (q_i, p_j) = (i/N, j/N).

    `func` is the underlying vectorized rho(q, p); the baker image needs
    rho off the sample grid (at q/2), so the map composes functions and
    re-samples.
    """

    func: Callable
    N: int

    @property
    def values(self) -> np.ndarray:
        g = np.arange(self.N) / self.N
        qq, pp = np.meshgrid(g, g, indexing="ij")
        return np.asarray(self.func(qq, pp), dtype=float) * np.ones_like(qq)


def baker_fp_apply_2d(rho: Density2D) -> Density2D:
    """(U_b rho)(q, p) = rho(q/2, 2p) for p < 1/2, rho(q/2 + 1/2, 2p - 1) otherwise."""
    if rho.N % 2:
        raise ValueError(f"baker map needs even N, got {rho.N}")
    f = rho.func

    def image(q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        upper = p >= 0.5
        return np.where(upper, f(q / 2 + 0.5, 2 * p - 1), f(q / 2, 2 * p))

    return Density2D(image, rho.N)


def project_to_bernoulli(rho: Density2D) -> np.ndarray:
    """Marginal over p on the q grid (left rule on the p grid)."""
    if rho.N % 2:
        raise ValueError(f"projection needs even N, got {rho.N}")
    return rho.values.mean(axis=1)


def sample(f: Callable, N: int) -> np.ndarray:
    """Grid adapter: f at q_n = n/N."""
    return np.asarray(f(np.arange(N) / N), dtype=float) * np.ones(N)
