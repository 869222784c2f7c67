"""Encoders, precoders and activation patterns for the five schemes.

Conventions (all indices 0-based):

* A block of ``p`` channel uses carries ``p * bpcu`` bits laid out as
  precoder-index bits, then antenna-index bits, then modulation bits.
* Index bits are natural binary. Chunk ``i`` of the antenna bits is the
  antenna active in channel use ``i``; the precoder index ``j`` is read in
  base ``n_p`` with the most significant digit choosing the column of the
  first block ``Q_1``.
* Pseudo-random phases fill a precoder row by row from ``SplitMix64(seed)``.
* PIM-SM draws its rectangular PRPP matrix from ``seed`` and the base of its
  precoder set from an independent seed derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterator, Optional

import numpy as np

from .modem import (
    Scheme,
    SchemeConfig,
    bit_chunks_to_ints,
    ints_to_bit_chunks,
)
from .numerics import SplitMix64, mix64

PIM_SM_SET_SALT = 0xD1B54A32D192ED03
MAX_PRECODER_SET = 1 << 62


@dataclass(frozen=True)
class PhasePrecoder:
    rows: int
    cols: int
    seed: int
    matrix: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, PhasePrecoder):
            return NotImplemented
        return (self.rows, self.cols, self.seed) == (other.rows, other.cols, other.seed) and (
            np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None


def build_prpp(p: int, cols: int, seed: int) -> PhasePrecoder:
    """``p x cols`` matrix with entries ``exp(j*theta) / sqrt(p)``."""
    if p < 1 or cols < 1:
        raise ValueError("precoder dimensions must be positive")
    theta = SplitMix64(seed).phases(p * cols).reshape(p, cols)
    matrix = np.exp(1j * theta) / np.sqrt(p)
    matrix.setflags(write=False)
    return PhasePrecoder(p, cols, int(seed), matrix)


def identity_precoder(p: int) -> PhasePrecoder:
    matrix = np.eye(p, dtype=np.complex128)
    matrix.setflags(write=False)
    return PhasePrecoder(p, p, 0, matrix)


@dataclass(frozen=True)
class ActivationPattern:
    """Per-channel-use selection among ``fan`` antennas or precoder columns.

    ``indices[i]`` is the 0-based selection in channel use ``i``.
    """

    fan: int
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(j) for j in self.indices))
        if self.fan < 1:
            raise ValueError("fan must be >= 1")
        for j in self.indices:
            if not 0 <= j < self.fan:
                raise ValueError(f"index {j} out of range for fan {self.fan}")

    @property
    def p(self) -> int:
        return len(self.indices)

    @property
    def support(self) -> tuple:
        """Non-zero rows of the expanded matrix."""
        return tuple(i * self.fan + j for i, j in enumerate(self.indices))

    def as_int(self) -> int:
        """Index of this pattern in base ``fan``, first channel use most significant."""
        out = 0
        for j in self.indices:
            out = out * self.fan + j
        return out

    @classmethod
    def from_int(cls, value: int, fan: int, p: int) -> "ActivationPattern":
        return cls(fan, digits(value, fan, p))


def digits(value: int, base: int, width: int) -> tuple:
    """Base-``base`` digits of ``value``, most significant first."""
    out = []
    for _ in range(width):
        value, d = divmod(value, base)
        out.append(d)
    if value:
        raise ValueError("value does not fit in the requested number of digits")
    return tuple(reversed(out))


def expand_activation(pat: ActivationPattern) -> np.ndarray:
    """The ``(p*fan) x p`` 0/1 matrix with a single one per column."""
    a = np.zeros((pat.p * pat.fan, pat.p), dtype=np.complex128)
    a[list(pat.support), np.arange(pat.p)] = 1.0
    return a


def pattern_from_bits(bits, p: int, fan: int) -> ActivationPattern:
    width = fan.bit_length() - 1
    bits = np.asarray(bits).ravel()
    if bits.size != p * width:
        raise ValueError(f"expected {p * width} index bits, got {bits.size}")
    if width == 0:
        return ActivationPattern(fan, (0,) * p)
    return ActivationPattern(fan, tuple(bit_chunks_to_ints(bits, width)))


def bits_from_pattern(pat: ActivationPattern) -> np.ndarray:
    return ints_to_bit_chunks(pat.indices, pat.fan.bit_length() - 1)


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """All ``n_p ** p`` matrices formed by taking one column from each ``Q_i``."""

    p: int
    n_p: int
    q: PhasePrecoder

    @property
    def size(self) -> int:
        return self.n_p ** self.p

    def __len__(self):
        return self.size

    def block(self, i: int) -> np.ndarray:
        return self.q.matrix[:, i * self.n_p:(i + 1) * self.n_p]

    def columns(self, j: int) -> np.ndarray:
        """Columns of ``Q`` that make up member ``j``."""
        if not 0 <= j < self.size:
            raise ValueError(f"precoder index {j} outside [0, {self.size})")
        return np.arange(self.p) * self.n_p + np.array(digits(j, self.n_p, self.p))

    def member(self, j: int) -> np.ndarray:
        return self.q.matrix[:, self.columns(j)]

    def all_members(self) -> np.ndarray:
        """Stack of every member, shape ``(size, p, p)``."""
        idx = np.array(list(product(range(self.n_p), repeat=self.p)), dtype=np.int64)
        idx = idx + np.arange(self.p) * self.n_p
        return np.moveaxis(self.q.matrix[:, idx], 0, 1)


def build_precoder_set(p: int, n_p: int, seed: int) -> PrecoderSet:
    if n_p < 1 or n_p & (n_p - 1):
        raise ValueError(f"n_p must be a power of two, got {n_p}")
    if (n_p.bit_length() - 1) * p >= 62:
        raise OverflowError("precoder set too large to index")
    return PrecoderSet(p, n_p, build_prpp(p, p * n_p, seed))


def select_precoder(pset: PrecoderSet, j: int) -> np.ndarray:
    return pset.member(j)


def pattern_of_precoder(pset: PrecoderSet, j: int) -> ActivationPattern:
    return ActivationPattern(pset.n_p, digits(j, pset.n_p, pset.p))


@dataclass(frozen=True, eq=False)
class Materials:
    """Pre-shared matrices a scheme needs at both ends of the link."""

    prpp: Optional[PhasePrecoder] = None
    pset: Optional[PrecoderSet] = None


@lru_cache(maxsize=64)
def build_materials(cfg: SchemeConfig) -> Materials:
    """Regenerate the pre-shared precoders of ``cfg`` from ``cfg.seed``."""
    s, p = cfg.scheme, cfg.p
    if s is Scheme.PRPP:
        prpp = identity_precoder(p) if cfg.identity_precoder else build_prpp(p, p, cfg.seed)
        return Materials(prpp=prpp)
    if s is Scheme.SM:
        return Materials()
    if s is Scheme.PRPP_SM:
        return Materials(prpp=build_prpp(p, p * cfg.n_t, cfg.seed))
    if s is Scheme.PIM:
        return Materials(pset=build_precoder_set(p, cfg.n_p, cfg.seed))
    return Materials(
        prpp=build_prpp(p, p * cfg.n_t, cfg.seed),
        pset=build_precoder_set(p, cfg.n_p, mix64(cfg.seed ^ PIM_SM_SET_SALT)),
    )


@dataclass(frozen=True)
class TxHypothesis:
    """One point of a scheme's joint hypothesis space.

    ``symbols`` holds alphabet labels (positions in ``Alphabet.points``).
    """

    symbols: tuple
    antenna_pattern: Optional[ActivationPattern] = None
    precoder_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))


def hypothesis_count(cfg: SchemeConfig) -> int:
    m = cfg.modulation.size ** cfg.p
    if cfg.scheme.uses_antenna_index:
        m *= cfg.n_t ** cfg.p
    if cfg.scheme.uses_precoder_index:
        m *= cfg.n_p ** cfg.p
    return m


def hypothesis_rank(cfg: SchemeConfig, hyp: TxHypothesis) -> int:
    """Position of ``hyp`` in the enumeration order (precoder, antennas, symbols)."""
    rank = hyp.precoder_index or 0
    if cfg.scheme.uses_antenna_index:
        rank = rank * cfg.n_t ** cfg.p + hyp.antenna_pattern.as_int()
    m = cfg.modulation.size
    sym = 0
    for s in hyp.symbols:
        sym = sym * m + s
    return rank * m ** cfg.p + sym


def hypothesis_from_rank(cfg: SchemeConfig, rank: int) -> TxHypothesis:
    n_sym = cfg.modulation.size ** cfg.p
    rank, sym = divmod(rank, n_sym)
    symbols = digits(sym, cfg.modulation.size, cfg.p)
    pattern = None
    if cfg.scheme.uses_antenna_index:
        rank, a = divmod(rank, cfg.n_t ** cfg.p)
        pattern = ActivationPattern.from_int(a, cfg.n_t, cfg.p)
    j = rank if cfg.scheme.uses_precoder_index else None
    if not cfg.scheme.uses_precoder_index and rank:
        raise ValueError("rank out of range")
    return TxHypothesis(symbols, pattern, j)


def enumerate_hypotheses(cfg: SchemeConfig) -> Iterator[TxHypothesis]:
    for rank in range(hypothesis_count(cfg)):
        yield hypothesis_from_rank(cfg, rank)


def encode(cfg: SchemeConfig, bits) -> TxHypothesis:
    """Split one block of bits into precoder index, antenna pattern and symbols."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size != cfg.bits_per_block:
        raise ValueError(f"{cfg.label()} takes {cfg.bits_per_block} bits per block, got {bits.size}")
    pos = 0
    j = None
    if cfg.scheme.uses_precoder_index:
        n = cfg.p * cfg.bits_precoder
        j = 0
        for b in bits[pos:pos + n]:
            j = (j << 1) | int(b)
        pos += n
    pattern = None
    if cfg.scheme.uses_antenna_index:
        n = cfg.p * cfg.bits_antenna
        pattern = pattern_from_bits(bits[pos:pos + n], cfg.p, cfg.n_t)
        pos += n
    symbols = bit_chunks_to_ints(bits[pos:], cfg.bits_modulation)
    return TxHypothesis(tuple(symbols), pattern, j)


def hypothesis_bits(cfg: SchemeConfig, hyp: TxHypothesis) -> np.ndarray:
    """Bit image of ``hyp``; the inverse of :func:`encode`."""
    parts = []
    if cfg.scheme.uses_precoder_index:
        n = cfg.p * cfg.bits_precoder
        parts.append(ints_to_bit_chunks([hyp.precoder_index], n) if n else np.zeros(0, np.uint8))
    if cfg.scheme.uses_antenna_index:
        parts.append(bits_from_pattern(hyp.antenna_pattern))
    parts.append(ints_to_bit_chunks(hyp.symbols, cfg.bits_modulation))
    return np.concatenate(parts).astype(np.uint8)


def transmit_signal(cfg: SchemeConfig, hyp: TxHypothesis, materials: Materials | None = None):
    """Antenna index and complex amplitude for each channel use of the block.

    Returns
    -------
    antennas : ndarray of int, shape (p,)
    amplitudes : ndarray of complex, shape (p,)
    """
    if materials is None:
        materials = build_materials(cfg)
    s, p = cfg.scheme, cfg.p
    x = cfg.modulation.points[list(hyp.symbols)]
    antennas = np.zeros(p, dtype=np.int64)
    if s.uses_antenna_index:
        antennas = np.asarray(hyp.antenna_pattern.indices, dtype=np.int64)
    if s.uses_precoder_index:
        if materials.pset is None:
            raise ValueError(f"{s.value} needs a precoder set")
        x = materials.pset.member(hyp.precoder_index) @ x
    if s in (Scheme.SM, Scheme.PIM):
        return antennas, x
    if materials.prpp is None:
        raise ValueError(f"{s.value} needs a PRPP matrix")
    if s is Scheme.PRPP:
        return antennas, materials.prpp.matrix @ x
    cols = np.arange(p) * cfg.n_t + antennas
    return antennas, materials.prpp.matrix[:, cols] @ x
