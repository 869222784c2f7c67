"""Modulation alphabets, bit/symbol mapping and scheme configuration.

Every alphabet is Gray-labelled and normalised to unit average energy.
The label of a point is its position in ``Alphabet.points``, read as a
big-endian bit string: for 4-QAM the labels 00, 01, 10, 11 map to
(+1+j, +1-j, -1+j, -1-j)/sqrt(2). Each axis is a Gray-coded PAM whose
all-zeros label sits on the most positive level, so BPSK maps 0 -> +1.
8-QAM is the rectangular 4x2 grid: two bits on the in-phase 4-PAM and one
bit on the quadrature 2-PAM.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEMAP_TOLERANCE = 1e-9


class Scheme(str, enum.Enum):
    PRPP = "prpp"
    SM = "sm"
    PRPP_SM = "prpp-sm"
    PIM = "pim"
    PIM_SM = "pim-sm"

    @property
    def uses_antenna_index(self) -> bool:
        return self in (Scheme.SM, Scheme.PRPP_SM, Scheme.PIM_SM)

    @property
    def uses_precoder_index(self) -> bool:
        return self in (Scheme.PIM, Scheme.PIM_SM)


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Big-endian bits of ``value``."""
    return np.array([(value >> (width - 1 - k)) & 1 for k in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8).ravel():
        out = (out << 1) | int(b)
    return out


def bit_chunks_to_ints(bits, width: int) -> np.ndarray:
    """Split ``bits`` into big-endian ``width``-bit words."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if width == 0:
        if bits.size:
            raise ValueError("zero-width chunks cannot consume bits")
        return np.zeros(0, dtype=np.int64)
    if bits.size % width:
        raise ValueError(f"{bits.size} bits is not a multiple of {width}")
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, width) @ weights


def ints_to_bit_chunks(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64).ravel()
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def _gray_pam(nbits: int) -> np.ndarray:
    """Levels of a Gray-labelled 2**nbits-PAM indexed by label."""
    m = 1 << nbits
    labels = np.arange(m)
    position = labels.copy()
    # Gray decode: position = g ^ (g >> 1) ^ (g >> 2) ...
    shift = labels >> 1
    while shift.any():
        position ^= shift
        shift >>= 1
    return (m - 1 - 2 * position).astype(np.float64)


def _qam(bits_i: int, bits_q: int) -> np.ndarray:
    levels_i = _gray_pam(bits_i)
    levels_q = _gray_pam(bits_q) if bits_q else np.zeros(1)
    points = (levels_i[:, None] + 1j * levels_q[None, :]).ravel()
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


_ALPHABETS = {
    "bpsk": (1, 0),
    "qam4": (1, 1),
    "qam8": (2, 1),
    "qam16": (2, 2),
}

_ALIASES = {"4-qam": "qam4", "8-qam": "qam8", "16-qam": "qam16", "qpsk": "qam4"}


@dataclass(frozen=True)
class Alphabet:
    name: str
    points: np.ndarray = field(repr=False, compare=False)
    bits_per_symbol: int

    @property
    def size(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)


def make_alphabet(name: str) -> Alphabet:
    """Build a named alphabet (``bpsk``, ``qam4``, ``qam8`` or ``qam16``)."""
    if isinstance(name, Alphabet):
        return name
    key = str(name).lower()
    key = _ALIASES.get(key, key)
    if key not in _ALPHABETS:
        raise ValueError(f"unsupported alphabet {name!r}; choose from {sorted(_ALPHABETS)}")
    bits_i, bits_q = _ALPHABETS[key]
    points = _qam(bits_i, bits_q).astype(np.complex128)
    points.setflags(write=False)
    return Alphabet(key, points, bits_i + bits_q)


def map_bits(bits, alphabet: Alphabet) -> np.ndarray:
    """Map a bit sequence onto alphabet points, ``bits_per_symbol`` at a time."""
    labels = bit_chunks_to_ints(bits, alphabet.bits_per_symbol)
    return alphabet.points[labels]


def nearest_labels(v, alphabet: Alphabet) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).ravel()
    return np.argmin(np.abs(v[:, None] - alphabet.points[None, :]), axis=1)


def demap_symbols(v, alphabet: Alphabet) -> np.ndarray:
    """Inverse of :func:`map_bits`; every entry must be an alphabet point."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    labels = nearest_labels(v, alphabet)
    if v.size and np.max(np.abs(v - alphabet.points[labels])) > DEMAP_TOLERANCE:
        raise ValueError("entry is not a point of the alphabet")
    return ints_to_bit_chunks(labels, alphabet.bits_per_symbol)


def _log2_exact(n: int, what: str) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"{what} must be a power of two, got {n}")
    return n.bit_length() - 1


@dataclass(frozen=True)
class SchemeConfig:
    """One transmission scheme with all of its dimensions.

    ``n_t`` and ``n_p`` must be powers of two. SM operates one channel use
    at a time (``p == 1``); PRPP and PIM are single-antenna (``n_t == 1``);
    ``n_p`` is only meaningful for PIM and PIM-SM and is 1 elsewhere.
    ``identity_precoder`` swaps the PRPP matrix for the identity, which is
    handy as an unprecoded reference.
    """

    scheme: Scheme
    p: int = 1
    n_t: int = 1
    n_r: int = 1
    n_p: int = 1
    alphabet: str = "bpsk"
    seed: int = 0
    identity_precoder: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "alphabet", make_alphabet(self.alphabet).name)
        for name in ("p", "n_t", "n_r", "n_p"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
            object.__setattr__(self, name, int(getattr(self, name)))
        _log2_exact(self.n_t, "n_t")
        _log2_exact(self.n_p, "n_p")
        s = self.scheme
        if s is Scheme.SM and self.p != 1:
            raise ValueError("SM is detected per channel use; use p=1")
        if not s.uses_antenna_index and self.n_t != 1:
            raise ValueError(f"{s.value} transmits from a single antenna; n_t must be 1")
        if not s.uses_precoder_index and self.n_p != 1:
            raise ValueError(f"n_p only applies to PIM and PIM-SM, not {s.value}")
        if self.identity_precoder and s is not Scheme.PRPP:
            raise ValueError("identity_precoder is only defined for PRPP")

    @cached_property
    def modulation(self) -> Alphabet:
        return make_alphabet(self.alphabet)

    @property
    def n_rf(self) -> int:
        return 1

    @property
    def bits_modulation(self) -> int:
        """Modulation bits per channel use."""
        return self.modulation.bits_per_symbol

    @property
    def bits_antenna(self) -> int:
        return _log2_exact(self.n_t, "n_t")

    @property
    def bits_precoder(self) -> int:
        return _log2_exact(self.n_p, "n_p")

    @property
    def bits_per_block(self) -> int:
        return self.p * spectral_efficiency(self)

    def label(self) -> str:
        parts = [self.scheme.value.upper(), f"p={self.p}"]
        if self.scheme.uses_antenna_index:
            parts.append(f"nt={self.n_t}")
        if self.scheme.uses_precoder_index:
            parts.append(f"np={self.n_p}")
        parts.append(self.alphabet)
        return " ".join(parts)


def spectral_efficiency(cfg: SchemeConfig) -> int:
    """Bits per channel use conveyed by ``cfg``.

    >>> spectral_efficiency(SchemeConfig("sm", n_t=2, alphabet="qam8"))
    4
    """
    bpcu = cfg.bits_modulation
    if cfg.scheme.uses_antenna_index:
        bpcu += cfg.bits_antenna
    if cfg.scheme.uses_precoder_index:
        bpcu += cfg.bits_precoder
    return bpcu
