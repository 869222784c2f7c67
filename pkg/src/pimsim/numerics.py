"""Reproducible random streams and small dense complex linear algebra.

Vectors and matrices are plain ``numpy`` complex128 arrays. The random
generator is SplitMix64, so a stream is a pure function of its seed and the
number of values drawn from it. Because output ``n`` only depends on
``seed + n * GOLDEN``, whole blocks of a stream (or of many independent
streams) are produced with vectorised ``uint64`` arithmetic and are
bit-identical to drawing the values one at a time.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_TWO_POW_M53 = 2.0 ** -53

SINGULAR_PIVOT = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when an LU pivot falls below ``SINGULAR_PIVOT`` in magnitude."""


def mix64(z: int) -> int:
    """SplitMix64 output finaliser on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def rotl64(x: int, r: int) -> int:
    x &= MASK64
    return ((x << r) | (x >> (64 - r))) & MASK64


def rng_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state once; return ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def splitmix_block(states, n: int) -> np.ndarray:
    """Next ``n`` outputs of each stream in ``states``.

    Parameters
    ----------
    states : array_like of uint64, shape (B,)
        Current stream states (not advanced; callers track offsets).
    n : int
        Number of outputs per stream.

    Returns
    -------
    ndarray of uint64, shape (B, n)
    """
    states = np.asarray(states, dtype=np.uint64).reshape(-1, 1)
    steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GOLDEN)
    with np.errstate(over="ignore"):
        z = states + steps[None, :]
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


def u64_to_phase(u) -> np.ndarray:
    """Map uint64 draws to phases in [0, 2*pi) using the top 53 bits."""
    u = np.asarray(u, dtype=np.uint64)
    return (u >> np.uint64(11)).astype(np.float64) * (_TWO_POW_M53 * 2.0 * np.pi)


def u64_to_gaussian(u, variance: float = 1.0) -> np.ndarray:
    """Box-Muller transform of pairs of uint64 draws.

    ``u[..., 2k]`` feeds the radius (guarded away from zero) and
    ``u[..., 2k + 1]`` the angle. The real part takes the cosine branch and
    the imaginary part the sine branch; each has variance ``variance / 2``.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    u = np.asarray(u, dtype=np.uint64)
    top = (u >> np.uint64(11)).astype(np.float64)
    u1 = (top[..., 0::2] + 1.0) * _TWO_POW_M53  # (0, 1]
    u2 = top[..., 1::2] * _TWO_POW_M53
    radius = np.sqrt(-variance * np.log(u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle) + 1j * (radius * np.sin(angle))


def u64_to_bits(u, n: int) -> np.ndarray:
    """First ``n`` bits of a run of uint64 draws, least significant bit first."""
    u = np.asarray(u, dtype=np.uint64)
    shifts = np.arange(64, dtype=np.uint64)
    bits = (u[..., :, None] >> shifts) & np.uint64(1)
    bits = bits.reshape(*u.shape[:-1], -1)
    return bits[..., :n].astype(np.uint8)


class SplitMix64:
    """Seeded SplitMix64 stream.

    The only mutable state is the 64-bit counter; two instances built from
    the same seed produce the same values no matter how draws are grouped.

    Examples
    --------
    >>> hex(SplitMix64(0).next_u64())
    '0xe220a8397b1dcdaf'
    """

    def __init__(self, seed: int = 0):
        self.state = int(seed) & MASK64

    def __repr__(self):
        return f"SplitMix64(state={self.state:#018x})"

    def next_u64(self) -> int:
        self.state, out = rng_next(self.state)
        return out

    def u64(self, n: int) -> np.ndarray:
        out = splitmix_block([self.state], n)[0]
        self.state = (self.state + n * GOLDEN) & MASK64
        return out

    def phases(self, n: int) -> np.ndarray:
        return u64_to_phase(self.u64(n))

    def phase(self) -> float:
        return float(self.phases(1)[0])

    def gaussian(self, n: int, variance: float = 1.0) -> np.ndarray:
        """``n`` circularly symmetric CN(0, variance) samples (2n draws)."""
        if not variance > 0:
            raise ValueError(f"variance must be positive, got {variance}")
        return u64_to_gaussian(self.u64(2 * n), variance)

    def bits(self, n: int) -> np.ndarray:
        return u64_to_bits(self.u64(-(-n // 64)), n)


def _as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    return v


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    return m


def matvec(m, v) -> np.ndarray:
    m, v = _as_matrix(m), _as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape} @ {v.shape}")
    return m @ v


def frob_norm(m) -> float:
    return float(np.linalg.norm(_as_matrix(m), "fro"))


def sub_norm_sq(a, b) -> float:
    """Squared Euclidean norm of ``a - b``."""
    a, b = _as_vector(a), _as_vector(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.vdot(d, d).real)


def hermitian(m) -> np.ndarray:
    return _as_matrix(m).conj().T


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If any pivot has magnitude below ``SINGULAR_PIVOT``.
    """
    a, b = _as_matrix(a), _as_vector(b)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if a.size and np.min(np.abs(np.diag(lu))) < SINGULAR_PIVOT:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
