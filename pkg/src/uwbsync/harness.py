"""Monte-Carlo harness: seeded trials, SNR/M sweeps, normalized MSE records.

Each trial derives independent substreams (TH code, channel, noise, data
bits, timing offset) from the base seed via spawn keys, so trials can run
in any order or in parallel and still reproduce bit-identically.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from io import StringIO

import numpy as np

from .waveform import (
    ConfigError,
    FrameConfig,
    SymbolSequence,
    generate_tx,
)
from .channel import (
    DEFAULT_MAX_DELAY,
    LinkParams,
    generate_cm1,
    propagate,
    single_path,
)
from .sync import CoarseConfig, FineConfig, training_pattern, two_floor_sync

__all__ = [
    "ExperimentPlan",
    "MseRecord",
    "TrialResult",
    "TrialScene",
    "build_trial_scene",
    "wrapped_error",
    "run_trial",
    "run_sweep",
    "records_to_csv",
]

CHANNEL_MODELS = ("cm1", "single_path")
FLOORS = ("coarse_only", "coarse_plus_fine")

CSV_HEADER = "snr_db,m,mode,floor,normalized_mse,std_error,n_trials"


@dataclass(frozen=True)
class ExperimentPlan:
    """A full sweep: grids, trial count, seed, and module configs."""

    snr_grid_db: tuple[float, ...] = (0.0, 8.0, 16.0)
    m_grid: tuple[int, ...] = (8, 32)
    modes: tuple[str, ...] = ("nda", "da")
    floors: tuple[str, ...] = ("coarse_only", "coarse_plus_fine")
    trials_per_cell: int = 200
    base_seed: int = 20260801
    frame_cfg: FrameConfig = FrameConfig()
    coarse_cfg: CoarseConfig = CoarseConfig()
    fine_cfg: FineConfig = FineConfig()
    channel_model: str = "cm1"
    channel_max_delay: float = DEFAULT_MAX_DELAY

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "floors", tuple(self.floors))
        if self.trials_per_cell < 1:
            raise ConfigError("trials_per_cell must be >= 1")
        if not self.snr_grid_db or not self.m_grid or not self.modes or not self.floors:
            raise ConfigError("sweep grids must be non-empty")
        for mode in self.modes:
            if mode not in ("nda", "da"):
                raise ConfigError(f"unknown mode {mode!r}")
        for floor in self.floors:
            if floor not in FLOORS:
                raise ConfigError(f"unknown floor {floor!r}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ConfigError(f"unknown channel model {self.channel_model!r}")

    def groups(self):
        """Deterministic enumeration of (snr, m, mode) trial groups."""
        out = []
        for snr in self.snr_grid_db:
            for m in self.m_grid:
                for mode in self.modes:
                    out.append((snr, m, mode))
        return out


@dataclass(frozen=True)
class MseRecord:
    """One sweep cell: normalized MSE of the timing estimate."""

    snr_db: float
    m: int
    mode: str
    floor: str
    normalized_mse: float
    std_error: float
    n_trials: int


@dataclass(frozen=True)
class TrialResult:
    tau_hat_coarse: float
    tau_hat_fine: float
    delta_tau_true: float


def wrapped_error(tau_hat: float, delta_tau: float, t_symbol: float) -> float:
    """Circular estimation error on [-T_s/2, T_s/2].

    The estimators see the offset modulo one symbol, so the error metric
    must wrap; the T_s/2 boundary is reported with a positive sign.
    """
    e = (tau_hat - delta_tau + t_symbol / 2.0) % t_symbol - t_symbol / 2.0
    if e == -t_symbol / 2.0:
        e = t_symbol / 2.0
    return e


def _total_symbols(m: int, plan: ExperimentPlan) -> int:
    """Record length in symbols: observation plus edge guards.

    Both floors read beyond the nominal M-symbol span (difference
    templates reach +-delta, the fine scan reads a two-symbol lag), so
    the record carries the averaging depth plus three guard symbols.
    """
    cfg = plan.frame_cfg
    k_avg = plan.fine_cfg.n_symbols_avg
    scan_sym = int(math.ceil(plan.fine_cfg.t_corr / cfg.symbol_duration))
    guard = max(int(math.ceil(k_avg / cfg.n_frames_per_symbol)) + 3,
                k_avg + 4 + scan_sym - m)
    return m + guard


@dataclass(frozen=True)
class TrialScene:
    """Everything one trial draws before the estimators run."""

    cfg: object
    channel: object
    delta_tau: float
    bits: SymbolSequence
    received: object


def build_trial_scene(plan: ExperimentPlan, snr_db: float, m: int, mode: str,
                      trial_index: int, group_index: int) -> TrialScene:
    """Draw one trial's randomness and synthesize its received record.

    Substreams: 0=TH code, 1=channel, 2=noise, 3=data bits, 4=timing
    offset.  The TH code is redrawn (deterministically, same stream) until
    it satisfies the no-leak frame invariant; with the default 35-chip
    alphabet a uniform draw can place a pulse too close to the frame end.
    """
    ss = np.random.SeedSequence(entropy=plan.base_seed,
                                spawn_key=(group_index, trial_index))
    s_code, s_channel, s_noise, s_bits, s_dtau = ss.spawn(5)

    base_cfg = plan.frame_cfg
    rng_code = np.random.default_rng(s_code)
    for _ in range(1000):
        code = rng_code.integers(0, base_cfg.n_chips,
                                 size=base_cfg.n_frames_per_symbol)
        try:
            cfg = base_cfg.with_th_code(code)
            break
        except ConfigError:
            continue
    else:
        raise ConfigError("could not draw a valid TH code in 1000 attempts")

    if plan.channel_model == "cm1":
        ch = generate_cm1(s_channel, plan.channel_max_delay)
    else:
        ch = single_path()

    delta_tau = float(np.random.default_rng(s_dtau).uniform(0.0, cfg.symbol_duration))

    k_total = _total_symbols(m, plan)
    if mode == "da":
        bits = SymbolSequence.fixed([training_pattern(k) for k in range(k_total)])
    else:
        bits = SymbolSequence.random(k_total, s_bits)

    link = LinkParams(timing_offset=delta_tau, snr_db=snr_db,
                      noise_seed=s_noise, channel_max_delay=plan.channel_max_delay)
    r = propagate(generate_tx(bits, cfg), ch, link, cfg)
    return TrialScene(cfg, ch, delta_tau, bits, r)


def run_trial(plan: ExperimentPlan, snr_db: float, m: int, mode: str,
              trial_index: int, group_index: int) -> TrialResult:
    """One Monte-Carlo realization of a sweep cell, both floors."""
    scene = build_trial_scene(plan, snr_db, m, mode, trial_index, group_index)
    cc = replace(plan.coarse_cfg, n_symbols=m, mode=mode)
    est = two_floor_sync(scene.received, scene.cfg, cc, plan.fine_cfg)
    if abs(est.n_opt * plan.fine_cfg.fine_step) > plan.fine_cfg.t_corr + 1e-15:
        raise RuntimeError("fine estimate left the scan interval")
    return TrialResult(est.tau1, est.tau2, scene.delta_tau)


def _run_group(plan: ExperimentPlan, group_index: int,
               group: tuple[float, int, str]) -> list[TrialResult]:
    snr, m, mode = group
    return [run_trial(plan, snr, m, mode, t, group_index)
            for t in range(plan.trials_per_cell)]


def _group_task(args):
    plan, group_index, group = args
    return group_index, _run_group(plan, group_index, group)


def run_sweep(plan: ExperimentPlan, n_workers: int = 1) -> list[MseRecord]:
    """Run every (snr, m, mode) group and aggregate per-floor records.

    A trial produces both floors' estimates, so floor cells that share
    (snr, m, mode) are paired on the same realizations.  Results are
    bit-identical for any worker count: substreams are keyed by group
    and trial index, and records are assembled in plan order.
    """
    groups = plan.groups()
    tasks = [(plan, gi, g) for gi, g in enumerate(groups)]
    if n_workers <= 1 or len(tasks) == 1:
        results = {gi: trials for gi, trials in map(_group_task, tasks)}
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = {gi: trials for gi, trials in pool.map(_group_task, tasks)}

    t_s = plan.frame_cfg.symbol_duration
    records = []
    for gi, (snr, m, mode) in enumerate(groups):
        trials = results[gi]
        for floor in plan.floors:
            errs = np.array([
                wrapped_error(
                    t.tau_hat_coarse if floor == "coarse_only" else t.tau_hat_fine,
                    t.delta_tau_true, t_s)
                for t in trials
            ])
            sq = (errs / t_s) ** 2
            n = len(sq)
            mse = float(np.mean(sq))
            std_error = float(np.std(sq, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            records.append(MseRecord(snr, m, mode, floor, mse, std_error, n))
    return records


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def records_to_csv(records) -> str:
    """Render records in the stable CSV format used for regression diffs."""
    out = StringIO()
    out.write(CSV_HEADER + "\n")
    for r in records:
        out.write(
            f"{_fmt(r.snr_db)},{r.m},{r.mode},{r.floor},"
            f"{_fmt(r.normalized_mse)},{_fmt(r.std_error)},{r.n_trials}\n"
        )
    return out.getvalue()
