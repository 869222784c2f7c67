"""Exhaustive ML, MMSE and likelihood-ascent-search detection.

Exhaustive ML rests on one observation: once the antenna pattern ``a`` is
fixed (there is a single trivial pattern for PRPP and PIM), the noiseless
received vector of every scheme is a sum of one term per position::

    y_hat = sum_i V[a, i, k_i]

where ``k_i`` ranges over the symbol (and, for PIM/PIM-SM, the precoder
column) used at position ``i``. The per-position tables are cheap to build
from the channel, and the full search over ``K ** p`` terms is done by
splitting the positions in two halves and evaluating

    ||y - S1 - S2||^2 = ||y - S1||^2 - 2 Re<y - S1, S2> + ||S2||^2

for every pair of partial sums with a single real matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization, apply_channel
from .modem import Alphabet, Scheme, SchemeConfig, nearest_labels
from .numerics import solve_linear
from .schemes import (
    Materials,
    TxHypothesis,
    build_materials,
    digits,
    hypothesis_bits,
    hypothesis_count,
    hypothesis_from_rank,
    transmit_signal,
)

DEFAULT_BUDGET = 1 << 24
# Largest metric block (entries) held in memory at once.
_BLOCK_ENTRIES = 1 << 21


class HypothesisBudgetError(RuntimeError):
    """The joint hypothesis space is too large for exhaustive search."""


@dataclass(frozen=True)
class DetectionResult:
    hypothesis: TxHypothesis
    metric: float
    candidates_evaluated: int
    flips: int = 0


def residual_metric(cfg, y, real, hyp, materials=None) -> float:
    antennas, amps = transmit_signal(cfg, hyp, materials)
    d = np.asarray(y) - apply_channel(real, antennas, amps)
    return float(np.vdot(d, d).real)


@lru_cache(maxsize=32)
def _pattern_table(n_t: int, p: int) -> np.ndarray:
    """All antenna patterns in enumeration order, shape (n_t**p, p)."""
    return np.array([digits(a, n_t, p) for a in range(n_t ** p)], dtype=np.int64).reshape(-1, p)


def _effective_matrices(cfg: SchemeConfig, real: ChannelRealization, materials: Materials):
    """Per-pattern effective channel ``D_a P_a``, shape (n_a, p*n_r, p).

    For PRPP this is ``D P``; for PIM it is ``D`` itself (the precoder set
    is applied separately).
    """
    h = real.blocks
    p, n_r = cfg.p, cfg.n_r
    s = cfg.scheme
    if s is Scheme.SM:
        return np.transpose(h[0], (1, 0))[:, :, None]  # (n_t, n_r, 1)
    if not s.uses_antenna_index:
        right = materials.prpp.matrix if s is Scheme.PRPP else np.eye(p)
        g = h[:, :, 0][:, :, None] * right[:, None, :]  # (p_r, n_r, p_c)
        return g.reshape(1, p * n_r, p)
    pats = _pattern_table(cfg.n_t, p)  # (n_a, p)
    rows = np.arange(p)
    # fade seen in use r: H_(r)[:, j_r]  -> (n_a, p, n_r)
    fades = h[rows[None, :], :, pats]
    # precoder entry P[r, c*n_t + j_c] -> (n_a, p_r, p_c)
    cols = rows[None, :] * cfg.n_t + pats
    pa = materials.prpp.matrix[:, cols]  # (p_r, n_a, p_c)
    pa = np.moveaxis(pa, 1, 0)
    g = fades[:, :, :, None] * pa[:, :, None, :]  # (n_a, p_r, n_r, p_c)
    return g.reshape(len(pats), p * n_r, p)


def _position_tables(cfg: SchemeConfig, real: ChannelRealization, materials: Materials):
    """Terms ``V[a, i, k]`` of the additive decomposition, shape (n_a, p, K, N)."""
    g = _effective_matrices(cfg, real, materials)
    pts = cfg.modulation.points
    if cfg.scheme.uses_precoder_index:
        q = materials.pset.q.matrix  # (p, p*n_p)
        g = g @ q  # (n_a, N, p*n_p)
        n_a, n, _ = g.shape
        cols = g.reshape(n_a, n, cfg.p, cfg.n_p)
        v = cols[:, :, :, :, None] * pts[None, None, None, None, :]  # (n_a, N, p, n_p, M)
        v = v.reshape(n_a, n, cfg.p, cfg.n_p * len(pts))
    else:
        v = g[:, :, :, None] * pts[None, None, None, :]  # (n_a, N, p, M)
    return np.ascontiguousarray(np.moveaxis(v, 1, 3))


def _partial_sums(v: np.ndarray) -> np.ndarray:
    """All sums of one term per position; first position most significant."""
    n_a, h, k, n = v.shape
    s = np.zeros((n_a, 1, n), dtype=np.complex128)
    for i in range(h):
        s = (s[:, :, None, :] + v[:, i, None, :, :]).reshape(n_a, -1, n)
    return s


def _search(cfg: SchemeConfig, ys: np.ndarray, v: np.ndarray):
    """Exhaustive search for every row of ``ys``; returns (ranks, metrics)."""
    n_a, p, k, n = v.shape
    per_a = k ** p
    h1 = p // 2
    s1 = _partial_sums(v[:, :h1])  # (n_a, K1, N)
    s2 = _partial_sums(v[:, h1:])  # (n_a, K2, N)
    e2 = (s2.real ** 2 + s2.imag ** 2).sum(axis=2)
    right = np.concatenate([s2.real, s2.imag, np.ones_like(e2)[..., None], e2[..., None]], axis=2)
    right = np.ascontiguousarray(np.swapaxes(right, 1, 2))  # (n_a, 2N+2, K2)

    n_obs = len(ys)
    best = np.full(n_obs, np.inf)
    best_idx = np.zeros(n_obs, dtype=np.int64)
    ties = {}
    a_step = max(1, _BLOCK_ENTRIES // per_a)
    b_step = max(1, _BLOCK_ENTRIES // (per_a * min(a_step, n_a)))
    for b0 in range(0, n_obs, b_step):
        yb = ys[b0:b0 + b_step]
        rows = np.arange(b0, b0 + len(yb))
        for a0 in range(0, n_a, a_step):
            r1 = yb[:, None, None, :] - s1[None, a0:a0 + a_step]  # (B, A, K1, N)
            e1 = (r1.real ** 2 + r1.imag ** 2).sum(axis=3)
            left = np.concatenate(
                [-2.0 * r1.real, -2.0 * r1.imag, e1[..., None], np.ones_like(e1)[..., None]], axis=3
            )
            m = np.matmul(left, right[None, a0:a0 + a_step]).reshape(len(yb), -1)
            arg = np.argmin(m, axis=1)
            low = m[np.arange(len(yb)), arg]
            nties = np.count_nonzero(m == low[:, None], axis=1)
            upd = low < best[rows]
            same = (low == best[rows]) & ~upd
            for b in [b for b in ties if b0 <= b < b0 + len(yb) and upd[b - b0]]:
                del ties[b]
            best[rows[upd]] = low[upd]
            best_idx[rows[upd]] = arg[upd] + a0 * per_a
            for i in np.flatnonzero((upd & (nties > 1)) | same):
                b = int(rows[i])
                found = [int(x) + a0 * per_a for x in np.flatnonzero(m[i] == low[i])]
                ties[b] = found if upd[i] else ties.get(b, [int(best_idx[b])]) + found

    a, choice = _split_index(cfg, best_idx, k, per_a)
    ranks = _rank_of(cfg, a, choice, k)
    for b, cands in ties.items():
        ca, cc = _split_index(cfg, np.array(cands), k, per_a)
        cr = _rank_of(cfg, ca, cc, k)
        i = int(np.argmin(cr))
        ranks[b], a[b], choice[b] = cr[i], ca[i], cc[i]
    y_hat = v[a[:, None], np.arange(p)[None, :], choice].sum(axis=1)  # (B, N)
    d = ys - y_hat
    metrics = (d.real ** 2 + d.imag ** 2).sum(axis=1)
    return ranks, metrics


def _split_index(cfg, flat, k, per_a):
    """Flat search index -> (pattern index, per-position choices)."""
    flat = np.asarray(flat, dtype=np.int64)
    a, rem = np.divmod(flat, per_a)
    powers = k ** np.arange(cfg.p - 1, -1, -1, dtype=np.int64)
    choice = (rem[:, None] // powers[None, :]) % k
    return a, choice


def _rank_of(cfg, a, choice, k):
    """Enumeration rank (precoder, pattern, symbols) of search positions."""
    m = cfg.modulation.size

    def powers(base):
        return base ** np.arange(cfg.p - 1, -1, -1, dtype=np.int64)

    sym = (choice % m) @ powers(m)
    rank = np.zeros_like(a)
    if cfg.scheme.uses_precoder_index:
        rank = (choice // m) @ powers(cfg.n_p)
    if cfg.scheme.uses_antenna_index:
        rank = rank * cfg.n_t ** cfg.p + a
    return rank * m ** cfg.p + sym


def _check_inputs(cfg, ys, real, budget):
    count = hypothesis_count(cfg)
    if count > budget:
        raise HypothesisBudgetError(
            f"{cfg.label()}: {count} joint hypotheses exceed the exhaustive-search budget "
            f"of {budget}; use LAS detection instead"
        )
    ys = np.asarray(ys, dtype=np.complex128)
    if ys.shape[-1] != cfg.p * cfg.n_r:
        raise ValueError(f"expected {cfg.p * cfg.n_r} received samples, got {ys.shape[-1]}")
    if real.blocks.shape != (cfg.p, cfg.n_r, cfg.n_t):
        raise ValueError(f"channel shape {real.blocks.shape} does not match {cfg.label()}")
    return count, ys


def ml_detect(cfg: SchemeConfig, y, real: ChannelRealization, materials: Materials | None = None,
              budget: int = DEFAULT_BUDGET) -> DetectionResult:
    """Exact joint ML decision over the full hypothesis space of ``cfg``.

    Exact ties go to the hypothesis that comes first in the enumeration
    order (precoder index, then antenna pattern, then symbols).

    Raises
    ------
    HypothesisBudgetError
        If the hypothesis space is larger than ``budget``.
    """
    count, y = _check_inputs(cfg, np.ravel(y), real, budget)
    if materials is None:
        materials = build_materials(cfg)
    ranks, metrics = _search(cfg, y[None, :], _position_tables(cfg, real, materials))
    return DetectionResult(hypothesis_from_rank(cfg, int(ranks[0])), float(metrics[0]), count)


def ml_detect_batch(cfg: SchemeConfig, ys, real: ChannelRealization, materials: Materials | None = None,
                    budget: int = DEFAULT_BUDGET):
    """ML decisions for many received vectors sharing one channel realization.

    Returns
    -------
    ranks : ndarray of int64, shape (B,)
        Enumeration rank of each decision. With power-of-two sizes the rank
        is the integer value of the decoded block bits.
    metrics : ndarray of float, shape (B,)
    """
    _, ys = _check_inputs(cfg, np.atleast_2d(ys), real, budget)
    if materials is None:
        materials = build_materials(cfg)
    return _search(cfg, ys, _position_tables(cfg, real, materials))


def ml_detect_precoder_set(cfg: SchemeConfig, y, real: ChannelRealization,
                           materials: Materials | None = None,
                           budget: int = DEFAULT_BUDGET) -> DetectionResult:
    """PIM detection that searches precoder members ``P_j`` explicitly.

    ``D P_j`` is formed once per member and reused for every symbol vector.
    This is the direct form of the PIM decision rule and is kept as a
    cross-check of :func:`ml_detect`, which searches the same space through
    the column-selection view ``D Q B x``.
    """
    if cfg.scheme is not Scheme.PIM:
        raise ValueError("precoder-set detection applies to PIM only")
    count, y = _check_inputs(cfg, y, real, budget)
    if materials is None:
        materials = build_materials(cfg)
    m = cfg.modulation.size
    symbols = np.array([digits(i, m, cfg.p) for i in range(m ** cfg.p)], dtype=np.int64)
    x = cfg.modulation.points[symbols].T  # (p, m**p)
    d = real.block_diagonal()
    members = materials.pset.all_members()
    step = max(1, _BLOCK_ENTRIES // (x.shape[1] * cfg.p))
    best, best_idx = np.inf, 0
    for j0 in range(0, len(members), step):
        g = d @ members[j0:j0 + step]  # (chunk, N, p)
        r = y[None, :, None] - g @ x
        metric = np.einsum("jnk,jnk->jk", r.real, r.real) + np.einsum("jnk,jnk->jk", r.imag, r.imag)
        i = int(np.argmin(metric))
        if metric.flat[i] < best:
            best, best_idx = metric.flat[i], j0 * x.shape[1] + i
    j, sym = divmod(best_idx, x.shape[1])
    hyp = TxHypothesis(tuple(symbols[sym]), None, j)
    return DetectionResult(hyp, residual_metric(cfg, y, real, hyp, materials), count)


def mmse_estimate(g, y, sigma2: float) -> np.ndarray:
    """Linear MMSE estimate ``(G^H G + sigma2 I)^-1 G^H y``."""
    g = np.asarray(g, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    gh = g.conj().T
    return solve_linear(gh @ g + sigma2 * np.eye(g.shape[1]), gh @ y)


def las_detect(g, y, alphabet: Alphabet, init) -> DetectionResult:
    """Greedy single-coordinate likelihood ascent from ``init``.

    Each step evaluates every one-symbol change of the current vector using
    the cached matched-filter residual ``z = G^H (y - G s)`` and the Gram
    matrix, applies the change with the largest metric decrease, and stops
    when no change decreases the metric.

    ``init`` may be complex (it is quantised to the nearest points) or an
    integer array of alphabet labels.
    """
    g = np.asarray(g, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    init = np.asarray(init)
    labels = init.astype(np.int64) if init.dtype.kind in "iu" else nearest_labels(init, alphabet)
    pts = alphabet.points
    s = pts[labels]
    gram = g.conj().T @ g
    diag = gram.diagonal().real
    r = y - g @ s
    z = g.conj().T @ r
    metric = float(np.vdot(r, r).real)
    evaluated = flips = 0
    while True:
        delta = pts[None, :] - s[:, None]  # (p, M)
        gain = np.abs(delta) ** 2 * diag[:, None] - 2.0 * (delta.conj() * z[:, None]).real
        evaluated += delta.size - len(s)
        k, a = np.unravel_index(np.argmin(gain), gain.shape)
        if not gain[k, a] < -1e-12 * max(metric, 1.0):
            break
        dk = delta[k, a]
        s[k] = pts[a]
        labels[k] = a
        z -= gram[:, k] * dk
        metric += float(gain[k, a])
        flips += 1
    r = y - g @ s
    metric = float(np.vdot(r, r).real)
    return DetectionResult(TxHypothesis(tuple(labels)), metric, evaluated, flips)


def las_step_gains(g, y, alphabet: Alphabet, labels) -> np.ndarray:
    """Metric change of every single-symbol change of ``labels``, shape (p, M)."""
    g = np.asarray(g, dtype=np.complex128)
    s = alphabet.points[np.asarray(labels)]
    gram = g.conj().T @ g
    z = g.conj().T @ (np.asarray(y) - g @ s)
    delta = alphabet.points[None, :] - s[:, None]
    return np.abs(delta) ** 2 * gram.diagonal().real[:, None] - 2.0 * (delta.conj() * z[:, None]).real


def effective_channel(cfg: SchemeConfig, real: ChannelRealization, materials: Materials | None = None):
    """The ``p*n_r x p`` virtual MIMO matrix ``G = D P`` of a PRPP block."""
    if cfg.scheme is not Scheme.PRPP:
        raise ValueError("the virtual MIMO matrix is defined for PRPP only")
    if materials is None:
        materials = build_materials(cfg)
    return _effective_matrices(cfg, real, materials)[0]


def las_detect_prpp(cfg: SchemeConfig, y, real: ChannelRealization, sigma2: float,
                    materials: Materials | None = None) -> DetectionResult:
    """MMSE-initialised LAS for a PRPP block of any size."""
    g = effective_channel(cfg, real, materials)
    init = mmse_estimate(g, y, sigma2)
    return las_detect(g, y, cfg.modulation, init)


def decode_result(cfg: SchemeConfig, result: DetectionResult) -> np.ndarray:
    return hypothesis_bits(cfg, result.hypothesis)
