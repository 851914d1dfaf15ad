"""Two-floor blind timing synchronizer for TH-PPM impulse radios.

Floor one is a coarse acquisition over candidate offsets in [0, T_s):
adjacent symbol-long segments of the received waveform are correlated
against each other through a PPM difference template, and the squared
correlation (averaged per candidate) peaks when the segment windows align
with the true symbol boundaries.  It needs no channel knowledge and, in
its non-data-aided form, no training either.

Floor two refines the coarse estimate on a sub-chip grid around it.  It
slides the receiver's own frame pattern across [tau1 - t_corr,
tau1 + t_corr] and, at each step, correlates short pulse-pair windows of
the waveform against itself two symbols later (the period of the training
pattern, and the smallest symbol lag whose product is immune to the PPM
bit shifts).  Its peak is pulse-sharp, which is what lets it repair both
the coarse grid quantization and adjacent-frame coarse misses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .waveform import ConfigError, FrameConfig, SampledWaveform

__all__ = [
    "CoarseConfig",
    "FineConfig",
    "SyncEstimate",
    "training_pattern",
    "difference_template",
    "dirty_correlation",
    "coarse_sync",
    "fine_sync",
    "two_floor_sync",
]

COARSE_MODES = ("nda", "da")
FINE_VARIANTS = ("th_matched", "symbol_lag")


@dataclass(frozen=True)
class CoarseConfig:
    """First-floor settings: observation length, mode and search grid."""

    n_symbols: int = 16
    mode: str = "nda"
    search_step: float = 35e-9
    segment_origin: float | None = None  # defaults to one symbol duration

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ConfigError("n_symbols must be >= 1")
        if self.mode not in COARSE_MODES:
            raise ConfigError(f"mode {self.mode!r} not in {COARSE_MODES}")
        if self.search_step <= 0:
            raise ConfigError("search_step must be positive")

    def grid_size(self, cfg: FrameConfig) -> int:
        t_s = cfg.symbol_duration
        ratio = t_s / self.search_step
        if self.search_step > t_s or abs(ratio - round(ratio)) > 1e-6:
            raise ConfigError(
                f"search_step {self.search_step!r} must divide the symbol "
                f"duration {t_s!r}"
            )
        return int(round(ratio))

    def origin(self, cfg: FrameConfig) -> float:
        return cfg.symbol_duration if self.segment_origin is None else self.segment_origin


@dataclass(frozen=True)
class FineConfig:
    """Second-floor settings: scan half-width, step, and averaging depth."""

    t_corr: float = 560e-9
    fine_step: float = 0.25e-9
    n_symbols_avg: int = 8
    variant: str = "th_matched"

    def __post_init__(self):
        if self.fine_step <= 0:
            raise ConfigError("fine_step must be positive")
        if self.t_corr < 0:
            raise ConfigError("t_corr must be non-negative")
        if self.n_symbols_avg < 1:
            raise ConfigError("n_symbols_avg must be >= 1")
        if self.variant not in FINE_VARIANTS:
            raise ConfigError(f"variant {self.variant!r} not in {FINE_VARIANTS}")

    @property
    def n_steps(self) -> int:
        """Scan size N; candidate steps are n = -N+1 ... N-1."""
        if self.t_corr == 0:
            return 1
        return max(1, int(math.ceil(self.t_corr / self.fine_step - 1e-9)))


@dataclass
class SyncEstimate:
    """Both floors' estimates plus their objective curves."""

    tau1: float
    tau2: float
    n_opt: int
    coarse_objective: np.ndarray
    coarse_taus: np.ndarray
    fine_objective: np.ndarray
    fine_offsets: np.ndarray  # signed step index per fine candidate


def training_pattern(k: int) -> int:
    """Training bit for symbol k: the alternating pattern 1,0,1,0,..."""
    if k < 0:
        raise ValueError("symbol index must be >= 0")
    return (k + 1) % 2


def _segment_start(r: SampledWaveform, k: int, tau: float, cfg: FrameConfig) -> int:
    return r.index_of(k * cfg.symbol_duration + tau)


def difference_template(r: SampledWaveform, k: int, tau: float, cfg: FrameConfig,
                        ppm_shift: float | None = None) -> SampledWaveform:
    """PPM difference template of segment k: r_k(t + d) - r_k(t - d).

    The segment is the symbol-long window of ``r`` starting at
    k*T_s + tau; the shift d defaults to the configured PPM shift.  The
    caller must provide guard samples, since the template reads d beyond
    both segment ends.
    """
    shift = cfg.ppm_shift if ppm_shift is None else ppm_shift
    n_d = int(round(shift * cfg.sample_rate))
    n_s = cfg.n_symbol_samples
    i0 = _segment_start(r, k, tau, cfg)
    lo, hi = i0 - n_d, i0 + n_s + n_d
    if lo < 0 or hi > len(r.samples):
        raise ValueError(
            f"segment k={k}, tau={tau!r} needs samples [{lo}, {hi}) outside "
            f"the record of length {len(r.samples)}; provide guard symbols"
        )
    plus = r.samples[i0 + n_d:i0 + n_d + n_s]
    minus = r.samples[i0 - n_d:i0 - n_d + n_s]
    return SampledWaveform(plus - minus, r.sample_rate, 0.0)


def dirty_correlation(r: SampledWaveform, k: int, tau: float,
                      cfg: FrameConfig) -> float:
    """Correlation of segment k+1 against segment k's difference template.

    Riemann sum of the symbol-long product; the blind acquisition
    statistic is built from these values.
    """
    template = difference_template(r, k, tau, cfg)
    n_s = cfg.n_symbol_samples
    i1 = _segment_start(r, k + 1, tau, cfg)
    if i1 < 0 or i1 + n_s > len(r.samples):
        raise ValueError("segment k+1 outside the record; provide guard symbols")
    seg = r.samples[i1:i1 + n_s]
    return float(np.dot(seg, template.samples) / cfg.sample_rate)


def _pattern_signs(m: int) -> np.ndarray:
    """Known-pattern correlation signs s(k) - s(k+1) for k = 0..m-1."""
    k = np.arange(m)
    return np.where(k % 2 == 0, 1.0, -1.0)


def coarse_sync(r: SampledWaveform, cfg: FrameConfig,
                cc: CoarseConfig) -> tuple[float, np.ndarray]:
    """Blind coarse acquisition over the offset grid in [0, T_s).

    For each candidate tau the statistic averages M adjacent-segment
    correlations; NDA squares each term (mean of squares), DA applies the
    known training-pattern signs before averaging (square of mean).  The
    transmitted pattern alternates, so consecutive correlations flip
    sign; folding the known signs in is what makes the DA average
    accumulate coherently.  Returns the argmax (ties -> smallest tau) and
    the full objective curve.
    """
    fs = cfg.sample_rate
    n_s = cfg.n_symbol_samples
    n_d = cfg.n_shift_samples
    m = cc.n_symbols
    n_grid = cc.grid_size(cfg)
    step_samples = n_s // n_grid
    origin_idx = r.index_of(cc.origin(cfg))

    x = r.samples
    need = origin_idx + (m + 1) * n_s + (n_grid - 1) * step_samples + n_d
    if origin_idx - n_d < 0 or need > len(x):
        raise ValueError(
            f"record too short for coarse search: need {need} samples from "
            f"origin, have {len(x)} (M={m} plus guards)"
        )

    # All (segment, tau) correlations come from one lagged product array:
    # g[i] = r[i + n_s] * (r[i + n_d] - r[i - n_d]); a segment correlation
    # is a window sum of g, so a prefix sum serves every candidate.
    g = np.zeros(len(x) - n_s)
    core = slice(n_d, len(g))
    g[core] = x[n_s + n_d:] * (x[2 * n_d:len(g) + n_d] - x[:len(g) - n_d])
    csum = np.concatenate(([0.0], np.cumsum(g)))

    taus = np.arange(n_grid) * step_samples
    starts = origin_idx + taus[:, None] + np.arange(m)[None, :] * n_s
    corr = (csum[starts + n_s] - csum[starts]) / fs

    if cc.mode == "nda":
        objective = np.mean(corr ** 2, axis=1)
    else:
        signs = _pattern_signs(m)
        objective = np.mean(signs[None, :] * corr, axis=1) ** 2

    best = int(np.argmax(objective))  # first max == smallest tau on ties
    tau1 = best * cc.search_step
    return tau1, objective


def _fine_candidate_order(offsets: np.ndarray) -> np.ndarray:
    """Tie order for the fine argmax: smallest |n| first, negative first."""
    return np.lexsort((offsets, np.abs(offsets)))


def _argmax_with_tie_order(values: np.ndarray, order: np.ndarray) -> int:
    best = order[0]
    for idx in order[1:]:
        if values[idx] > values[best]:
            best = idx
    return int(best)


def fine_sync(r: SampledWaveform, tau1: float, cfg: FrameConfig,
              fc: FineConfig) -> tuple[float, int, np.ndarray]:
    """Sub-chip refinement scan around the coarse estimate.

    Candidate offsets are tau1 + n*fine_step for n in [-N+1, N-1],
    N = ceil(t_corr / fine_step).  Each candidate's score is a sum over
    ``n_symbols_avg`` symbol pairs of |correlation between the waveform
    and itself two symbols later|, taken either in short windows placed
    at the receiver's own frame/chip positions (``th_matched``, default)
    or over whole symbol windows at lag one symbol (``symbol_lag``, the
    coarse statistic's plain-product cousin, kept for experimentation).
    Ties resolve to the smallest |n|, negative first.  Offsets are
    rounded to the sample grid per candidate.
    """
    fs = cfg.sample_rate
    n_s = cfg.n_symbol_samples
    n_cand = fc.n_steps
    offsets = np.arange(-n_cand + 1, n_cand)
    x = r.samples
    k_avg = fc.n_symbols_avg

    # Guard origin of one symbol keeps the most negative candidate inside
    # the record for any tau1 in [0, T_s).
    base = r.index_of(tau1 + cfg.symbol_duration)
    off_samples = np.round(offsets * fc.fine_step * fs).astype(np.int64)

    if fc.variant == "th_matched":
        lag = 2 * n_s
        window = cfg.n_pulse_samples + cfg.n_shift_samples
        frame_pos = cfg.frame_start_samples()
        prod = x[:len(x) - lag] * x[lag:]
        csum = np.concatenate(([0.0], np.cumsum(prod)))
        starts = (base + off_samples[:, None, None]
                  + (np.arange(k_avg) * n_s)[None, :, None]
                  + frame_pos[None, None, :])
        lo = int(starts.min())
        hi = int(starts.max()) + window
        if lo < 0 or hi > len(csum) - 1:
            raise ValueError(
                f"fine scan needs samples [{lo}, {hi}) beyond the record "
                f"({len(prod)} lagged products); extend the record"
            )
        sums = csum[starts + window] - csum[starts]
        z = np.sum(np.abs(np.sum(sums, axis=2)), axis=1) / fs
    else:  # symbol_lag
        lag = n_s
        prod = x[:len(x) - lag] * x[lag:]
        csum = np.concatenate(([0.0], np.cumsum(prod)))
        starts = (base + off_samples[:, None]
                  + (np.arange(k_avg) * n_s)[None, :])
        lo = int(starts.min())
        hi = int(starts.max()) + n_s
        if lo < 0 or hi > len(csum) - 1:
            raise ValueError(
                f"fine scan needs samples [{lo}, {hi}) beyond the record; "
                "extend the record"
            )
        sums = csum[starts + n_s] - csum[starts]
        z = np.sum(np.abs(sums), axis=1) / fs

    order = _fine_candidate_order(offsets)
    best = _argmax_with_tie_order(z, order)
    n_opt = int(offsets[best])
    tau2 = tau1 + n_opt * fc.fine_step
    return tau2, n_opt, z


def two_floor_sync(r: SampledWaveform, cfg: FrameConfig, cc: CoarseConfig,
                   fc: FineConfig) -> SyncEstimate:
    """Run both floors and assemble the estimate with diagnostics.

    tau2 is reported modulo the symbol duration; the raw scan offset
    n_opt stays available for diagnostics.
    """
    tau1, coarse_obj = coarse_sync(r, cfg, cc)
    tau2_raw, n_opt, fine_obj = fine_sync(r, tau1, cfg, fc)
    t_s = cfg.symbol_duration
    tau2 = tau2_raw % t_s
    n_cand = fc.n_steps
    return SyncEstimate(
        tau1=tau1,
        tau2=tau2,
        n_opt=n_opt,
        coarse_objective=coarse_obj,
        coarse_taus=np.arange(len(coarse_obj)) * cc.search_step,
        fine_objective=fine_obj,
        fine_offsets=np.arange(-n_cand + 1, n_cand),
    )
