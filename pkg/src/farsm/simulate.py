"""Monte Carlo engine: BER sweeps, ratio histograms, selection benchmarks.

Every trial owns a counter-based random stream keyed by the master seed and
the trial index, so results are bit-identical for a given seed no matter how
trials are batched or parallelized, and a failed trial can be re-drawn from
a derived sub-stream without disturbing its neighbours. One trial draws, in
fixed order: the channel, the payload bits, and a unit noise vector that is
scaled per SNR point. Sharing the channel draw across the SNR grid makes the
sweep a common-random-numbers design: each point remains an independent
estimate, but curve shapes and curve-to-curve gaps are far less noisy.

The public entry points accept a :class:`SimConfig`; trials are processed in
fixed-size batches through vectorized selection / precoding / detection
kernels that reproduce the single-trial functions decision for decision.
``FARSM_THREADS`` caps how many worker threads run batches concurrently
(default 1); the reduction is a sum of per-batch integer counters, so the
thread count never changes results.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from farsm.channel import SeededRng
from farsm.correlation import (SortedPairArrays, build_correlation_model,
                               port_coordinates, sorted_pair_correlations)
from farsm.errors import ConfigError, NumericalError
from farsm.modulation import build_qam
from farsm.precoding import MAX_CONDITION, NoiseModel
from farsm.selection import (_batch_mce_stage1, _batch_optimal, _batch_tmd,
                             mce_tmd_select, optimal_select, tmd_select)

_BATCH = 2048
_MAX_REDRAWS = 8

_PRECODERS = ("zf", "mmse")
_PORTSELS = ("optimal", "tmd", "mce-tmd", "first")
_DETECTORS = ("mld", "med", "rttd")

# stream-id layout: bits 0..39 trial, 40..47 redraw attempt, 48..55 purpose
PURPOSE_TRIAL = 0
PURPOSE_THEORY = 1
PURPOSE_BENCH = 2


def stream_id(trial: int, redraw: int = 0, purpose: int = PURPOSE_TRIAL) -> int:
    """Pack a (trial, redraw, purpose) triple into a 64-bit stream id."""
    if not 0 <= trial < (1 << 40):
        raise ValueError(f"trial index {trial} out of range")
    if not 0 <= redraw < (1 << 8):
        raise ValueError(f"redraw count {redraw} out of range")
    return trial | (redraw << 40) | (purpose << 48)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulated link.

    Defaults follow the reference setup: a 4 x 4 port grid on a one-by-one
    wavelength surface, four receive antennas, four active ports, 4-QAM.
    ``baseline`` replaces the fluid antenna with N_a fixed uncorrelated
    transmit antennas (no selection), the traditional benchmark.
    """

    w1: float = 1.0
    w2: float = 1.0
    n1: int = 4
    n2: int = 4
    n_r: int = 4
    n_a: int = 4
    n_b: int = 12
    mod_order: int = 4
    precoder: str = "zf"
    portsel: str = "optimal"
    detector: str = "mld"
    gamma: float = 0.6
    snr_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    trials: int = 100_000
    master_seed: int = 0
    baseline: bool = False
    select_snr_db: float | None = None
    bins: int = 50
    dump_channels: str | None = None

    @property
    def n_ports(self) -> int:
        return self.n1 * self.n2

    @property
    def spatial_bits(self) -> int:
        return self.n_r.bit_length() - 1

    @property
    def symbol_bits(self) -> int:
        return self.mod_order.bit_length() - 1

    @property
    def bits_per_use(self) -> int:
        return self.spatial_bits + self.symbol_bits

    def validate(self) -> "SimConfig":
        if self.n1 < 1 or self.n2 < 1:
            raise ConfigError(f"port counts must be >= 1, got {self.n1}x{self.n2}")
        if self.w1 <= 0 or self.w2 <= 0:
            raise ConfigError(f"surface extents must be > 0, got {self.w1}x{self.w2}")
        if self.n_r < 2 or self.n_r & (self.n_r - 1):
            raise ConfigError(
                f"N_r must be a power of two >= 2 for whole-bit spatial "
                f"mapping, got {self.n_r}")
        if self.mod_order not in (4, 16, 64):
            raise ConfigError(f"mod_order must be 4, 16 or 64, got {self.mod_order}")
        if self.n_a < self.n_r:
            raise ConfigError("N_a must be >= N_r for precoder invertibility")
        if not self.baseline and self.n_a > self.n_ports:
            raise ConfigError(
                f"N_a={self.n_a} exceeds the port count N={self.n_ports}")
        if self.precoder not in _PRECODERS:
            raise ConfigError(f"precoder must be one of {_PRECODERS}")
        if self.portsel not in _PORTSELS:
            raise ConfigError(f"portsel must be one of {_PORTSELS}")
        if self.detector not in _DETECTORS:
            raise ConfigError(f"detector must be one of {_DETECTORS}")
        if not self.baseline and self.portsel == "mce-tmd" and not (
                self.n_a < self.n_b < self.n_ports):
            raise ConfigError(
                f"two-stage selection needs N > N_b > N_a, got "
                f"N={self.n_ports}, N_b={self.n_b}, N_a={self.n_a}")
        if not self.baseline and self.portsel == "optimal" and self.n_ports > 20:
            raise ConfigError(
                "exhaustive selection is limited to N <= 20 ports; "
                "use tmd or mce-tmd")
        if (not self.baseline and self.portsel == "optimal"
                and self.precoder == "mmse" and self.select_snr_db is None):
            raise ConfigError(
                "select_snr_db is required when combining MMSE precoding "
                "with exhaustive selection (its capacity depends on the "
                "noise level)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if len(self.snr_db) == 0:
            raise ConfigError("at least one SNR point is required")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.master_seed < (1 << 64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        return self

    @property
    def variant(self) -> str:
        if self.baseline:
            return f"rsm-{self.precoder}-{self.detector}"
        return f"fa-rsm-{self.precoder}-{self.portsel}-{self.detector}"


@dataclass(frozen=True)
class BerPoint:
    """Error counts at one SNR point, with a 95% Wilson interval on the BER."""

    snr_db: float
    trials: int
    bits: int
    bit_errors: int
    symbol_errors: int
    ber: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SweepResult:
    variant: str
    points: tuple[BerPoint, ...]
    redraws: int


@dataclass(frozen=True)
class RatioHistogram:
    """Distribution of the second-to-first receive energy ratio at one SNR."""

    snr_db: float
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int
    median: float


_Z95 = 1.959963984540054


def wilson_interval(errors: int, n: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    p = errors / n
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = _Z95 * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(center - half, 0.0)
    hi = 1.0 if errors == n else min(center + half, 1.0)
    return lo, hi


def _popcount_sum(values: np.ndarray) -> int:
    """Total set bits across an integer array."""
    total = 0
    v = values.copy()
    while v.any():
        total += int((v & 1).sum())
        v >>= 1
    return total


def worker_count() -> int:
    """Worker-thread cap from FARSM_THREADS (default 1)."""
    raw = os.environ.get("FARSM_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"FARSM_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# batched trial pipeline
# ---------------------------------------------------------------------------

def _draw_trials(cfg: SimConfig, trials: np.ndarray, redraw: int = 0):
    """Per-trial stream draws for a batch: channel factor, bits, unit noise."""
    n_cols = cfg.n_a if cfg.baseline else cfg.n_ports
    b = trials.size
    hw = np.empty((b, cfg.n_r, n_cols), dtype=complex)
    bits = np.empty((b, cfg.bits_per_use), dtype=np.uint8)
    wu = np.empty((b, cfg.n_r), dtype=complex)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for i, t in enumerate(trials):
        g = SeededRng(cfg.master_seed, stream_id(int(t), redraw)).generator()
        z = g.standard_normal((2, cfg.n_r, n_cols))
        hw[i] = (z[0] + 1j * z[1]) * inv_sqrt2
        bits[i] = g.integers(0, 2, size=cfg.bits_per_use, dtype=np.uint8)
        zw = g.standard_normal((2, cfg.n_r))
        wu[i] = (zw[0] + 1j * zw[1]) * inv_sqrt2
    return hw, bits, wu


def _select_indices(cfg: SimConfig, hb: np.ndarray,
                    pairs: SortedPairArrays | None):
    """(B, N_a) selected 0-based column indices plus a failure mask."""
    b, _, n = hb.shape
    if cfg.baseline or cfg.portsel == "first":
        idx = np.broadcast_to(np.arange(cfg.n_a, dtype=np.intp), (b, cfg.n_a))
        return idx.copy(), np.zeros(b, dtype=bool)
    if cfg.portsel == "tmd":
        return _batch_tmd(hb, cfg.n_a)
    if cfg.portsel == "mce-tmd":
        masks = _batch_mce_stage1(hb, pairs, cfg.n_b)
        return _batch_tmd(hb, cfg.n_a, active=masks)
    # exhaustive: ZF ranking is noise-independent, MMSE uses the pinned level
    n0_sel = 1.0
    if cfg.precoder == "mmse":
        n0_sel = 10.0 ** (-cfg.select_snr_db / 10.0)
    return _batch_optimal(hb, cfg.n_a, cfg.precoder, n0_sel)


def _precode_batch(cfg: SimConfig, h_sel: np.ndarray, n0: float):
    """Batched precoder quantities: (beta (B,), hp (B,N_r,N_r), gain or None,
    failed)."""
    b, n_r, _ = h_sel.shape
    gram = h_sel @ h_sel.conj().transpose(0, 2, 1)
    eye = np.broadcast_to(np.eye(n_r), gram.shape)
    if cfg.precoder == "zf":
        inv, failed = _batch_gram_inverse_from(gram)
        tr_inv = np.trace(inv, axis1=1, axis2=2).real
        with np.errstate(invalid="ignore", divide="ignore"):
            beta = np.sqrt(n_r / tr_inv)
        p = beta[:, None, None] * (inv @ h_sel).conj().transpose(0, 2, 1)
        gain = None
    else:
        reg = gram + (n_r * n0) * eye
        inv, failed = _batch_gram_inverse_from(reg)
        gi = gram @ inv
        with np.errstate(invalid="ignore", divide="ignore"):
            beta = np.sqrt(n_r / np.einsum("bij,bji->b", gi, inv).real)
        p = beta[:, None, None] * (inv @ h_sel).conj().transpose(0, 2, 1)
        gain = gi
    hp = h_sel @ p
    failed = failed | ~np.isfinite(beta)
    return beta, hp, gain, failed


def _batch_gram_inverse_from(gram: np.ndarray):
    """Inverse of a stack of Hermitian matrices with a 1-norm condition screen."""
    n_r = gram.shape[1]
    eye = np.broadcast_to(np.eye(n_r), gram.shape)
    failed = np.zeros(gram.shape[0], dtype=bool)
    try:
        inv = np.linalg.solve(gram, eye)
    except np.linalg.LinAlgError:
        inv = np.empty_like(gram)
        for i in range(gram.shape[0]):
            try:
                inv[i] = np.linalg.solve(gram[i], np.eye(n_r))
            except np.linalg.LinAlgError:
                inv[i] = np.nan
                failed[i] = True
    cond = (np.abs(gram).sum(axis=1).max(axis=1)
            * np.abs(inv).sum(axis=1).max(axis=1))
    failed |= ~np.isfinite(cond) | (cond > MAX_CONDITION)
    return inv, failed


def _receive_batch(hp: np.ndarray, k_idx: np.ndarray, s: np.ndarray,
                   wu: np.ndarray, n0: float) -> np.ndarray:
    """y = (H P) s e_k + sqrt(n0) w for a batch."""
    cols = np.take_along_axis(hp, k_idx[:, None, None], axis=2)[:, :, 0]
    return cols * s[:, None] + math.sqrt(n0) * wu


def _detect_batch(det: str, cfg: SimConfig, y: np.ndarray, beta: np.ndarray,
                  gain: np.ndarray | None, points: np.ndarray):
    """Batched detection; returns (k_hat, m_hat) 0-based."""
    if det == "mld":
        return _mld_batch(y, beta, gain, points)
    if det == "med":
        return _med_batch(y, beta, gain, points)
    if det == "rttd":
        e = np.abs(y) ** 2
        largest = e.max(axis=1)
        second = np.partition(e, e.shape[1] - 2, axis=1)[:, -2]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(largest > 0, second / np.maximum(largest, 1e-300), 1.0)
        coarse = ratio < cfg.gamma
        k_med, m_med = _med_batch(y, beta, gain, points)
        k_mld, m_mld = _mld_batch(y, beta, gain, points)
        return np.where(coarse, k_med, k_mld), np.where(coarse, m_med, m_mld)
    raise ConfigError(f"detector must be one of {_DETECTORS}")


def _mld_batch(y, beta, gain, points):
    m_count = points.size
    if gain is None:
        d = y[:, :, None] - beta[:, None, None] * points[None, None, :]
        cost = (d.real ** 2 + d.imag ** 2) - (np.abs(y) ** 2)[:, :, None]
    else:
        z = np.einsum("brk,br->bk", gain.conj(), y)
        gn = np.einsum("brk,brk->bk", gain, gain.conj()).real
        c = beta[:, None] * points[None, :]
        cost = (np.abs(c) ** 2)[:, None, :] * gn[:, :, None] - 2.0 * np.real(
            np.conj(c)[:, None, :] * z[:, :, None])
    flat = np.argmin(cost.reshape(cost.shape[0], -1), axis=1)
    return flat // m_count, flat % m_count


def _med_batch(y, beta, gain, points):
    k = np.argmax(np.abs(y) ** 2, axis=1)
    yk = np.take_along_axis(y, k[:, None], axis=1)[:, 0]
    scale = beta
    if gain is not None:
        diag = np.diagonal(gain, axis1=1, axis2=2).real
        scale = beta * np.take_along_axis(diag, k[:, None], axis=1)[:, 0]
    m = np.argmin(np.abs(yk[:, None] - scale[:, None] * points[None, :]) ** 2,
                  axis=1)
    return k, m


def _redraw_failed(cfg: SimConfig, pairs, trials: np.ndarray,
                   hw: np.ndarray, bits: np.ndarray, wu: np.ndarray,
                   idx: np.ndarray, failed: np.ndarray, root) -> int:
    """Re-draw failed trials from derived sub-streams, in place.

    A trial fails when its selected channel cannot be precoded (singular
    Gram) or selection itself degenerates. Each failure re-draws channel,
    bits and noise from the (trial, attempt) stream. Returns the number of
    redraws consumed.
    """
    total = 0
    for i in np.flatnonzero(failed):
        t = int(trials[i])
        for attempt in range(1, _MAX_REDRAWS + 1):
            h1, b1, w1 = _draw_trials(cfg, np.array([t]), redraw=attempt)
            hb1 = h1 if cfg.baseline else h1 @ root
            idx1, bad1 = _select_indices(cfg, hb1, pairs)
            total += 1
            if not bad1[0]:
                # gram screen at the tightest operating point
                hsel1 = np.take_along_axis(hb1, idx1[:, None, :], axis=2)
                n0_min = 10.0 ** (-max(cfg.snr_db) / 10.0)
                _, _, _, pf = _precode_batch(cfg, hsel1, n0_min)
                if not pf[0]:
                    hw[i], bits[i], wu[i], idx[i] = h1[0], b1[0], w1[0], idx1[0]
                    failed[i] = False
                    break
        else:
            raise NumericalError(
                f"trial {t} still degenerate after {_MAX_REDRAWS} redraws")
    return total


def _run_batches(cfg: SimConfig, detectors: tuple[str, ...],
                 collect_ratios: bool = False):
    """Core sweep: per-detector, per-point error counts over all trials.

    Returns (counts, redraws, ratios) where counts[det][point] is
    (bit_errors, symbol_errors) and ratios[point] is an array of energy
    ratios (empty unless requested).
    """
    cfg.validate()
    const = build_qam(cfg.mod_order)
    points = const.points
    root = None
    pairs = None
    if not cfg.baseline:
        model = build_correlation_model(
            port_coordinates(cfg.w1, cfg.w2, cfg.n1, cfg.n2))
        root = model.root
        if cfg.portsel == "mce-tmd":
            pairs = sorted_pair_correlations(model)
    kb, mb = cfg.spatial_bits, cfg.symbol_bits
    n0s = [10.0 ** (-s / 10.0) for s in cfg.snr_db]
    dump = open(cfg.dump_channels, "w", encoding="ascii") if cfg.dump_channels else None

    def one_batch(lo: int, hi: int):
        trials = np.arange(lo, hi)
        hw, bits, wu = _draw_trials(cfg, trials)
        hb = hw if cfg.baseline else hw @ root
        idx, failed = _select_indices(cfg, hb, pairs)
        # screen precodability once at the tightest noise level
        h_sel = np.take_along_axis(hb, idx[:, None, :], axis=2)
        _, _, _, pf = _precode_batch(cfg, h_sel, min(n0s))
        failed |= pf
        redraws = 0
        if failed.any():
            redraws = _redraw_failed(cfg, pairs, trials, hw, bits, wu, idx,
                                     failed, root)
            hb = hw if cfg.baseline else hw @ root
            h_sel = np.take_along_axis(hb, idx[:, None, :], axis=2)
        if dump is not None:
            for i, t in enumerate(trials):
                for r in range(cfg.n_r):
                    for c in range(hb.shape[2]):
                        v = hb[i, r, c]
                        dump.write(f"{t},{r},{c},{v.real:.17g},{v.imag:.17g}\n")
        k_idx = bits[:, :kb].astype(np.intp) @ (1 << np.arange(kb)[::-1])
        m_idx = bits[:, kb:].astype(np.intp) @ (1 << np.arange(mb)[::-1])
        tx = (k_idx << mb) | m_idx
        s = points[m_idx]
        counts = {d: [] for d in detectors}
        ratios = []
        for n0 in n0s:
            beta, hp, gain, _ = _precode_batch(cfg, h_sel, n0)
            y = _receive_batch(hp, k_idx, s, wu, n0)
            if collect_ratios:
                e = np.abs(y) ** 2
                largest = e.max(axis=1)
                second = np.partition(e, e.shape[1] - 2, axis=1)[:, -2]
                ratios.append(np.where(largest > 0,
                                       second / np.maximum(largest, 1e-300),
                                       1.0))
            for d in detectors:
                k_hat, m_hat = _detect_batch(d, cfg, y, beta, gain, points)
                rx = (k_hat.astype(np.intp) << mb) | m_hat.astype(np.intp)
                diff = np.bitwise_xor(tx, rx)
                counts[d].append((_popcount_sum(diff),
                                  int(np.count_nonzero(diff))))
        return counts, redraws, ratios

    edges = list(range(0, cfg.trials, _BATCH)) + [cfg.trials]
    jobs = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1 and dump is None:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda j: one_batch(*j), jobs))
    else:
        results = [one_batch(*j) for j in jobs]
    if dump is not None:
        dump.close()

    n_pts = len(cfg.snr_db)
    totals = {d: [[0, 0] for _ in range(n_pts)] for d in detectors}
    redraws = 0
    ratio_arrays = [[] for _ in range(n_pts)]
    for counts, rd, ratios in results:
        redraws += rd
        for d in detectors:
            for p in range(n_pts):
                totals[d][p][0] += counts[d][p][0]
                totals[d][p][1] += counts[d][p][1]
        for p, arr in enumerate(ratios):
            ratio_arrays[p].append(arr)
    merged = [np.concatenate(a) if a else np.empty(0) for a in ratio_arrays]
    return totals, redraws, merged


def run_ber_sweep(cfg: SimConfig) -> SweepResult:
    """Simulate the configured link across its SNR grid."""
    res = run_ber_sweep_multi(cfg, (cfg.detector,))
    return res[cfg.detector]


def run_ber_sweep_multi(cfg: SimConfig,
                        detectors: tuple[str, ...]) -> dict[str, SweepResult]:
    """One pass of the engine scored by several detectors at once.

    All detectors see identical channels, payloads and noise, which makes
    detector-to-detector comparisons paired. Equivalent to, and bit-identical
    with, separate ``run_ber_sweep`` calls per detector under the same seed.
    """
    for d in detectors:
        if d not in _DETECTORS:
            raise ConfigError(f"detector must be one of {_DETECTORS}")
    totals, redraws, _ = _run_batches(cfg, tuple(detectors))
    out = {}
    for d in detectors:
        pts = []
        bits_per_point = cfg.trials * cfg.bits_per_use
        for p, snr in enumerate(cfg.snr_db):
            be, se = totals[d][p]
            lo, hi = wilson_interval(be, bits_per_point)
            pts.append(BerPoint(snr_db=float(snr), trials=cfg.trials,
                                bits=bits_per_point, bit_errors=be,
                                symbol_errors=se, ber=be / bits_per_point,
                                ci_low=lo, ci_high=hi))
        out[d] = SweepResult(variant=replace(cfg, detector=d).variant,
                             points=tuple(pts), redraws=redraws)
    return out


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one trial: transmitted and detected bit blocks."""

    tx_bits: np.ndarray
    rx_bits: np.ndarray
    redraws: int


def run_trial(cfg: SimConfig, snr_db: float, trial_index: int) -> TrialResult:
    """Run a single trial of the configured link at one SNR point.

    Deterministic in (master seed, trial index); shares every numerical code
    path with the batched sweep, so a sweep is exactly this repeated.
    """
    cfg = replace(cfg, snr_db=(float(snr_db),)).validate()
    const = build_qam(cfg.mod_order)
    root = None
    pairs = None
    if not cfg.baseline:
        model = build_correlation_model(
            port_coordinates(cfg.w1, cfg.w2, cfg.n1, cfg.n2))
        root = model.root
        if cfg.portsel == "mce-tmd":
            pairs = sorted_pair_correlations(model)
    trials = np.array([trial_index])
    hw, bits, wu = _draw_trials(cfg, trials)
    hb = hw if cfg.baseline else hw @ root
    idx, failed = _select_indices(cfg, hb, pairs)
    h_sel = np.take_along_axis(hb, idx[:, None, :], axis=2)
    n0 = 10.0 ** (-snr_db / 10.0)
    _, _, _, pf = _precode_batch(cfg, h_sel, n0)
    failed |= pf
    redraws = 0
    if failed[0]:
        redraws = _redraw_failed(cfg, pairs, trials, hw, bits, wu, idx,
                                 failed, root)
        hb = hw if cfg.baseline else hw @ root
        h_sel = np.take_along_axis(hb, idx[:, None, :], axis=2)
    kb, mb = cfg.spatial_bits, cfg.symbol_bits
    k_idx = bits[:, :kb].astype(np.intp) @ (1 << np.arange(kb)[::-1])
    m_idx = bits[:, kb:].astype(np.intp) @ (1 << np.arange(mb)[::-1])
    beta, hp, gain, _ = _precode_batch(cfg, h_sel, n0)
    y = _receive_batch(hp, k_idx, const.points[m_idx], wu, n0)
    k_hat, m_hat = _detect_batch(cfg.detector, cfg, y, beta, gain, const.points)
    rx_val = (int(k_hat[0]) << mb) | int(m_hat[0])
    rx_bits = np.array([(rx_val >> (cfg.bits_per_use - 1 - i)) & 1
                        for i in range(cfg.bits_per_use)], dtype=np.uint8)
    return TrialResult(tx_bits=bits[0], rx_bits=rx_bits, redraws=redraws)


def ratio_histograms(cfg: SimConfig) -> list[RatioHistogram]:
    """Histogram of the receive energy ratio at each configured SNR point.

    Requires the MMSE precoder (the ratio statistic is defined for it). All
    points share the per-trial channel and noise draws, so point-to-point
    comparisons are paired.
    """
    cfg.validate()
    if cfg.precoder != "mmse":
        raise ConfigError("the energy-ratio histogram requires the MMSE precoder")
    _, _, ratios = _run_batches(cfg, (), collect_ratios=True)
    out = []
    for snr, arr in zip(cfg.snr_db, ratios):
        counts, edges = np.histogram(arr, bins=cfg.bins, range=(0.0, 1.0))
        out.append(RatioHistogram(snr_db=float(snr), bin_edges=edges,
                                  counts=counts, total=int(arr.size),
                                  median=float(np.median(arr))))
    return out


def ratio_histogram(cfg: SimConfig, snr_db: float, trials: int) -> RatioHistogram:
    """Energy-ratio histogram at one SNR point over the given trial count."""
    cfg = replace(cfg, snr_db=(float(snr_db),), trials=trials)
    return ratio_histograms(cfg)[0]


# ---------------------------------------------------------------------------
# selection benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRow:
    algorithm: str
    median_seconds: float
    evaluations: int


def portsel_benchmark(cfg: SimConfig, repeats: int = 25) -> list[BenchmarkRow]:
    """Median wall-clock per selection call for the three strategies.

    ``evaluations`` counts candidate evaluations (exhaustive) or removal
    steps (greedy variants). The strategies are timed round-robin per
    channel, best-of-3 each, so scheduler noise and clock-frequency drift
    hit all three alike instead of whichever ran last. At the reference
    sizes N=16, N_b=12, N_a=4 the cost ordering exhaustive > tmd > mce-tmd
    is asserted; a violation raises NumericalError.
    """
    # every strategy runs, so the whole constraint set applies
    replace(cfg, portsel="optimal").validate()
    replace(cfg, portsel="mce-tmd").validate()
    model = build_correlation_model(
        port_coordinates(cfg.w1, cfg.w2, cfg.n1, cfg.n2))
    pairs = sorted_pair_correlations(model)
    n = cfg.n_ports
    noise = NoiseModel(1.0)
    channels = []
    for i in range(repeats):
        g = SeededRng(cfg.master_seed, stream_id(i, purpose=PURPOSE_BENCH)).generator()
        z = g.standard_normal((2, cfg.n_r, n))
        channels.append(((z[0] + 1j * z[1]) / math.sqrt(2.0)) @ model.root)

    strategies = [
        ("optimal", lambda h: optimal_select(h, cfg.n_a, "zf", noise),
         math.comb(n, cfg.n_a)),
        ("tmd", lambda h: tmd_select(h, cfg.n_a), n - cfg.n_a),
        ("mce-tmd", lambda h: mce_tmd_select(h, pairs, cfg.n_b, cfg.n_a),
         (n - cfg.n_b) + (cfg.n_b - cfg.n_a)),
    ]
    spans: dict[str, list[float]] = {name: [] for name, _, _ in strategies}
    for h in channels:
        for name, fn, _ in strategies:
            best = math.inf
            for _ in range(3):
                t0 = time.perf_counter()
                fn(h)
                best = min(best, time.perf_counter() - t0)
            spans[name].append(best)

    rows = [BenchmarkRow(name, float(np.median(spans[name])), evals)
            for name, _, evals in strategies]
    if (n, cfg.n_b, cfg.n_a) == (16, 12, 4):
        t = {r.algorithm: r.median_seconds for r in rows}
        if not t["optimal"] > t["tmd"] > t["mce-tmd"]:
            raise NumericalError(
                f"selection cost ordering violated: {t}")
    return rows


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def write_ber_csv(fh, sweeps: list[SweepResult]) -> None:
    """Write sweep results as CSV rows with the standard header."""
    fh.write("variant,snr_db,trials,bits,bit_errors,ber,ci_low,ci_high\n")
    for sw in sweeps:
        for p in sw.points:
            fh.write(f"{sw.variant},{p.snr_db:.10g},{p.trials},{p.bits},"
                     f"{p.bit_errors},{p.ber:.10g},{p.ci_low:.10g},"
                     f"{p.ci_high:.10g}\n")
