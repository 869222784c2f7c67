"""Monte Carlo bit-error-rate engine.

Trial ``k`` at sweep position ``snr_index`` owns a private SplitMix64 stream
seeded from ``(master_seed, snr_index, k)``; from it the trial draws its
bits, then its channel, then its noise. Any trial can therefore be replayed
on its own, and trials can be farmed out to worker processes in any order.
Trials are grouped into fixed chunks and the stopping rule is only checked
between chunks, in chunk order, so the result does not depend on how many
workers ran the chunks.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, apply_channel, add_noise, draw_channel, snr_to_sigma2
from .detect import DEFAULT_BUDGET, HypothesisBudgetError, decode_result, las_detect_prpp, ml_detect
from .modem import Scheme, SchemeConfig
from .numerics import (
    GOLDEN,
    MASK64,
    SplitMix64,
    mix64,
    rotl64,
    splitmix_block,
    u64_to_bits,
    u64_to_gaussian,
)
from .schemes import build_materials, encode, hypothesis_count, transmit_signal

log = logging.getLogger(__name__)

DETECTORS = ("ml", "las")


class InsufficientRangeError(ValueError):
    """A BER level is not bracketed by the simulated points of a curve."""


@dataclass(frozen=True)
class StopRule:
    target_bit_errors: Optional[int] = 200
    max_trials: Optional[int] = 10 ** 7
    max_wall_seconds: Optional[float] = None

    def __post_init__(self):
        if self.target_bit_errors is None and self.max_trials is None and self.max_wall_seconds is None:
            raise ValueError("a stopping rule needs at least one finite bound")


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    trials: int
    bits: int
    bit_errors: int
    elapsed_seconds: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def ci95_halfwidth(self) -> float:
        if not self.bits:
            return 0.0
        return 1.96 * math.sqrt(self.ber * (1.0 - self.ber) / self.bits)


@dataclass
class BerCurve:
    config: SchemeConfig
    points: list = field(default_factory=list)
    detector: str = "ml"

    def __post_init__(self):
        snrs = [pt.snr_db for pt in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("curve SNRs must be strictly increasing")

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([pt.snr_db for pt in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([pt.ber for pt in self.points])


def trial_seed(master_seed: int, snr_index: int, k: int) -> int:
    x = (master_seed ^ rotl64(k, 17) ^ rotl64(snr_index, 43)) & MASK64
    return mix64((x + GOLDEN) & MASK64)


def chunk_size(cfg: SchemeConfig, detector: str = "ml") -> int:
    """Trials per scheduling chunk; fixed per configuration."""
    if detector == "las":
        return 64
    return min(1024, max(8, (1 << 18) // hypothesis_count(cfg)))


def _detect(cfg, y, real, sigma2, materials, detector, budget):
    if detector == "las":
        if cfg.scheme is not Scheme.PRPP:
            raise ValueError("LAS detection is implemented for PRPP only")
        return las_detect_prpp(cfg, y, real, sigma2, materials)
    return ml_detect(cfg, y, real, materials, budget)


def run_trial(cfg: SchemeConfig, snr_db: float, seed: int, detector: str = "ml",
              budget: int = DEFAULT_BUDGET) -> dict:
    """Replay one trial from its seed; returns its bits, channel, noisy signal and decision."""
    materials = build_materials(cfg)
    noise = snr_to_sigma2(snr_db)
    rng = SplitMix64(seed)
    bits = rng.bits(cfg.bits_per_block)
    real = draw_channel(rng, cfg.p, cfg.n_t, cfg.n_r)
    hyp = encode(cfg, bits)
    y = add_noise(rng, apply_channel(real, *transmit_signal(cfg, hyp, materials)), noise)
    result = _detect(cfg, y, real, noise.sigma2, materials, detector, budget)
    detected = decode_result(cfg, result)
    return {
        "bits": bits,
        "channel": real,
        "y": y,
        "result": result,
        "detected": detected,
        "bit_errors": int(np.count_nonzero(bits != detected)),
    }


def run_chunk(cfg: SchemeConfig, snr_db: float, snr_index: int, master_seed: int,
              start: int, stop: int, detector: str = "ml",
              budget: int = DEFAULT_BUDGET) -> tuple:
    """Simulate trials ``start..stop-1``; returns ``(trials, bits, bit_errors)``.

    Random draws for the whole chunk are generated in one vectorised pass;
    they are identical to what :func:`run_trial` draws one trial at a time.
    """
    materials = build_materials(cfg)
    sigma2 = snr_to_sigma2(snr_db).sigma2
    nbits = cfg.bits_per_block
    n_words = -(-nbits // 64)
    n_fade = cfg.p * cfg.n_r * cfg.n_t
    n_noise = cfg.p * cfg.n_r
    seeds = np.array([trial_seed(master_seed, snr_index, k) for k in range(start, stop)], dtype=np.uint64)
    draws = splitmix_block(seeds, n_words + 2 * n_fade + 2 * n_noise)
    all_bits = u64_to_bits(draws[:, :n_words], nbits)
    fades = u64_to_gaussian(draws[:, n_words:n_words + 2 * n_fade], 1.0)
    fades = fades.reshape(-1, cfg.p, cfg.n_r, cfg.n_t)
    noise = u64_to_gaussian(draws[:, n_words + 2 * n_fade:], sigma2)
    errors = 0
    for bits, h, n in zip(all_bits, fades, noise):
        real = ChannelRealization(h)
        hyp = encode(cfg, bits)
        y = apply_channel(real, *transmit_signal(cfg, hyp, materials)) + n
        result = _detect(cfg, y, real, sigma2, materials, detector, budget)
        errors += int(np.count_nonzero(decode_result(cfg, result) != bits))
    return stop - start, (stop - start) * nbits, errors


def _check_runnable(cfg, detector, budget):
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector {detector!r}")
    if detector == "ml" and hypothesis_count(cfg) > budget:
        raise HypothesisBudgetError(
            f"{cfg.label()}: {hypothesis_count(cfg)} joint hypotheses exceed the "
            f"exhaustive-search budget of {budget}; use LAS detection instead"
        )
    if detector == "las" and cfg.scheme is not Scheme.PRPP:
        raise ValueError("LAS detection is implemented for PRPP only")


def run_point(cfg: SchemeConfig, snr_db: float, stop: StopRule = StopRule(), master_seed: int = 0,
              snr_index: int = 0, detector: str = "ml", budget: int = DEFAULT_BUDGET,
              workers: int = 1, executor: Executor | None = None) -> BerPoint:
    """Simulate one SNR point until the stopping rule fires.

    Parameters
    ----------
    cfg : SchemeConfig
    snr_db : float
        Average received SNR per receive antenna.
    stop : StopRule
    master_seed : int
        Together with ``snr_index`` and the trial number, fixes every draw.
    detector : {"ml", "las"}
    workers : int
        Processes used when ``executor`` is not supplied.
    """
    _check_runnable(cfg, detector, budget)
    t0 = time.perf_counter()
    size = chunk_size(cfg, detector)
    limit = stop.max_trials if stop.max_trials is not None else None
    own = None
    if executor is None and workers > 1:
        own = executor = ProcessPoolExecutor(max_workers=workers)
    depth = max(1, getattr(executor, "_max_workers", 1)) if executor else 1

    def bounds(c):
        lo = c * size
        hi = lo + size
        if limit is not None:
            hi = min(hi, limit)
        return lo, hi

    trials = nbits = errors = 0
    try:
        pending = []
        next_chunk = 0
        done = False
        while not done:
            while executor is not None and len(pending) < depth:
                lo, hi = bounds(next_chunk)
                if lo >= hi:
                    break
                pending.append(executor.submit(run_chunk, cfg, snr_db, snr_index, master_seed,
                                               lo, hi, detector, budget))
                next_chunk += 1
            if executor is not None:
                if not pending:
                    break
                t, b, e = pending.pop(0).result()
            else:
                lo, hi = bounds(next_chunk)
                if lo >= hi:
                    break
                t, b, e = run_chunk(cfg, snr_db, snr_index, master_seed, lo, hi, detector, budget)
                next_chunk += 1
            trials, nbits, errors = trials + t, nbits + b, errors + e
            if stop.target_bit_errors is not None and errors >= stop.target_bit_errors:
                done = True
            elif limit is not None and trials >= limit:
                done = True
            elif stop.max_wall_seconds is not None and time.perf_counter() - t0 >= stop.max_wall_seconds:
                done = True
        for f in pending:
            f.cancel()
    finally:
        if own is not None:
            own.shutdown(cancel_futures=True)
    point = BerPoint(float(snr_db), trials, nbits, errors, time.perf_counter() - t0)
    log.info("%s @ %.2f dB: %d errors / %d bits (BER %.3e) in %d trials",
             cfg.label(), snr_db, errors, nbits, point.ber, trials)
    return point


def run_sweep(cfg: SchemeConfig, snr_list: Sequence[float], stop: StopRule = StopRule(),
              master_seed: int = 0, detector: str = "ml", budget: int = DEFAULT_BUDGET,
              workers: int = 1, executor: Executor | None = None) -> BerCurve:
    _check_runnable(cfg, detector, budget)
    own = None
    if executor is None and workers > 1:
        own = executor = ProcessPoolExecutor(max_workers=workers)
    try:
        points = [
            run_point(cfg, snr, stop, master_seed, i, detector, budget, executor=executor)
            for i, snr in enumerate(snr_list)
        ]
    finally:
        if own is not None:
            own.shutdown(cancel_futures=True)
    return BerCurve(cfg, points, detector)


def snr_at_ber(curve: BerCurve, level: float) -> float:
    """SNR where ``curve`` first falls through ``level``, interpolated in log10(BER)."""
    pts = curve.points
    for a, b in zip(pts, pts[1:]):
        if a.ber == level:
            return a.snr_db
        if a.ber > level > b.ber:
            if b.ber <= 0:
                raise InsufficientRangeError(
                    f"{curve.config.label()}: no errors at {b.snr_db} dB, cannot interpolate")
            la, lb = math.log10(a.ber), math.log10(b.ber)
            return a.snr_db + (math.log10(level) - la) * (b.snr_db - a.snr_db) / (lb - la)
    if pts and pts[-1].ber == level:
        return pts[-1].snr_db
    raise InsufficientRangeError(
        f"{curve.config.label()}: BER {level:g} is not bracketed by the simulated SNR range")


def gap_at_ber(curve_a: BerCurve, curve_b: BerCurve, level: float) -> float:
    """SNR advantage of ``curve_a`` over ``curve_b`` at ``level`` (positive if a is better)."""
    return snr_at_ber(curve_b, level) - snr_at_ber(curve_a, level)


def rayleigh_bpsk_ber(snr_db) -> np.ndarray:
    """Exact BER of coherent BPSK over flat Rayleigh fading."""
    g = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    return 0.5 * (1.0 - np.sqrt(g / (1.0 + g)))
