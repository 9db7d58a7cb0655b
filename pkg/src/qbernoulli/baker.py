"""Quantum baker map on the position grid q_n = n/N, N = 2**D."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_DENSE_D = 12
DUMP_MAGIC = b"QBKR"


@dataclass(frozen=True)
class QuantumGrid:
    D: int

    def __post_init__(self):
        if self.D < 2:
            raise ValueError(f"D must be >= 2, got {self.D}")

    @classmethod
    def from_N(cls, N: int) -> "QuantumGrid":
        if N < 4 or N & (N - 1):
            raise ValueError(f"N={N} is not a power of two >= 4")
        return cls(N.bit_length() - 1)

    @property
    def N(self) -> int:
        return 1 << self.D

    @property
    def hbar(self) -> float:
        return 1.0 / (2 * math.pi * self.N)

    @property
    def q(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    p = q


@dataclass(frozen=True)
class BakerUnitary:
    grid: QuantumGrid
    entries: np.ndarray  # <q_n'|T|q_n>, row n', column n

    @property
    def N(self) -> int:
        return self.grid.N


@dataclass(frozen=True)
class DensityDiagonal:
    grid: QuantumGrid
    values: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.sum(self.values))


def _geometric(a: int, count: int, delta: np.ndarray, N: int) -> np.ndarray:
    """sum_{m=a}^{a+count-1} exp(2 pi i m delta / N) in closed form."""
    delta = np.mod(delta, N)
    out = np.full(delta.shape, complex(count))
    nz = delta != 0
    d = delta[nz]
    w = np.exp(2j * np.pi * d / N)
    out[nz] = np.exp(2j * np.pi * a * d / N) * (1 - np.exp(2j * np.pi * count * d / N)) / (1 - w)
    return out


def baker_entry_literal(grid: QuantumGrid, n_out: int, n_in: int) -> complex:
    """Single matrix element by term-by-term summation over m (test oracle)."""
    N = grid.N
    ms = range(0, N // 2) if n_in < N // 2 else range(N // 2, N)
    s = sum(np.exp(2j * np.pi * m * (n_out - 2 * n_in) / N) for m in ms)
    return complex(math.sqrt(2) / N * s)


def build_baker_unitary(grid: QuantumGrid) -> BakerUnitary:
    """Dense N x N quantum baker unitary.

    Column n uses m in [0, N/2) when n < N/2 and m in [N/2, N) otherwise;
    n = N/2 goes to the second branch so the two branches partition the
    columns.
    """
    if grid.D > MAX_DENSE_D:
        raise ValueError(
            f"N={grid.N} exceeds the dense limit 2**{MAX_DENSE_D}; "
            "use the analytic evolver (qbernoulli.qmap.evolve_density)"
        )
    N = grid.N
    rows = np.arange(N)[:, None]
    cols = np.arange(N)[None, :]
    delta = rows - 2 * cols
    T = np.empty((N, N), dtype=complex)
    half = N // 2
    T[:, :half] = _geometric(0, half, delta[:, :half], N)
    T[:, half:] = _geometric(half, half, delta[:, half:], N)
    T *= math.sqrt(2) / N
    return BakerUnitary(grid, T)


def _diag_values(rho, N: int) -> np.ndarray:
    v = rho.values if isinstance(rho, DensityDiagonal) else np.asarray(rho)
    if v.shape != (N,):
        raise ValueError(f"density of shape {v.shape} does not match N={N}")
    return v


def baker_step_full(T: BakerUnitary, rho) -> np.ndarray:
    """T diag(rho) T^dagger as a full (generally non-diagonal) matrix."""
    v = _diag_values(rho, T.N)
    U = T.entries
    return (U * v[None, :]) @ U.conj().T


def position_momentum_overlap(grid: QuantumGrid, n: int, m: int) -> complex:
    """<q_n|p_m> = exp(2 pi i m n / N) / sqrt(N)."""
    N = grid.N
    if not (0 <= n < N and 0 <= m < N):
        raise IndexError(f"(n, m)=({n}, {m}) outside [0, {N})")
    return complex(np.exp(2j * np.pi * ((m * n) % N) / N) / math.sqrt(N))


def overlap_matrix(grid: QuantumGrid) -> np.ndarray:
    N = grid.N
    nm = np.outer(np.arange(N), np.arange(N)) % N
    return np.exp(2j * np.pi * nm / N) / math.sqrt(N)


def dump_unitary(T: BakerUnitary, path) -> None:
    """Row-major little-endian (re, im) doubles after a 16-byte header."""
    header = struct.pack("<4sI8x", DUMP_MAGIC, T.N)
    body = np.ascontiguousarray(T.entries, dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def load_unitary(path) -> BakerUnitary:
    raw = Path(path).read_bytes()
    magic, N = struct.unpack_from("<4sI8x", raw)
    if magic != DUMP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    entries = np.frombuffer(raw, dtype="<c16", offset=16).reshape(N, N).copy()
    return BakerUnitary(QuantumGrid.from_N(N), entries)
