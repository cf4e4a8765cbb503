"""Stochastic photon-counting experiments and synthetic detector streams.

Every random draw comes from a PCG64 stream keyed by
``SeedSequence(seed, spawn_key=(grid_index, repetition_index))`` so results
do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadGridError, BadParamsError
from .physics import DEFAULT_BASIS, OamBasis, sequential_config, single_shot_config
from .stats import (
    CountRecord,
    ProbPair,
    experimental_bound,
    mle_sequential,
    mle_single,
    probs_closed,
    probs_simulated,
    rmse,
)

MODES = ("single-T", "sequential-N")
DEFAULT_G0 = math.pi / 180
DEFAULT_NU = 2000
DEFAULT_REPETITIONS = 600
DEFAULT_GROUP_SIZE = 30
DEFAULT_GRID = (1, 2, 3, 4)
PS_PER_S = 10**12


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sample_counts(p: ProbPair, nu: int, rng_seed) -> CountRecord:
    """Binomial split of ``nu`` detections between the two outcomes.

    ``rng_seed`` is an int or an existing ``numpy.random.Generator``.
    """
    if nu < 1:
        raise BadParamsError(f"nu must be >= 1, got {nu}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else substream(int(rng_seed))
    p_plus = min(1.0, max(0.0, p.p_plus))
    nu_plus = int(rng.binomial(nu, p_plus))
    return CountRecord(nu_plus, nu - nu_plus)


def expected_counts(p: ProbPair, nu: int) -> CountRecord:
    """Noise-free record: expected counts rounded to the nearest integer."""
    nu_plus = int(round(nu * p.p_plus))
    return CountRecord(nu_plus, nu - nu_plus)


@dataclass(frozen=True)
class SweepResult:
    mode: str
    axis: list
    rmse_mean: list
    rmse_stderr: list
    bound: list
    groups: int
    repetitions_per_group: int
    seed: int
    nu: int
    g0: float
    estimates: list = field(default=None, repr=False, compare=False)

    @property
    def total_repetitions(self) -> int:
        return self.groups * self.repetitions_per_group

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "rmse_mean", "rmse_stderr", "bound"])
        for row in zip(self.axis, self.rmse_mean, self.rmse_stderr, self.bound):
            w.writerow([row[0]] + [format(float(v), ".17g") for v in row[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("estimates")
        return json.dumps(d, indent=2)


def _grid_point(mode, x, g0, basis, simulate):
    if mode == "single-T":
        cfg = single_shot_config(g0, int(x), basis)
        p = probs_simulated(cfg) if simulate else probs_closed(g0, x, x, 1)
        return p, (lambda rec: mle_single(rec, x))
    cfg = sequential_config(g0, int(x), basis)
    p = probs_simulated(cfg) if simulate else probs_closed(g0, 1.0, 1.0, int(x))
    return p, (lambda rec: mle_sequential(rec, int(x)))


def _run_point(mode, index, x, nu, repetitions, seed, g0, basis, simulate, zero_noise):
    p, estimator = _grid_point(mode, x, g0, basis, simulate)
    if zero_noise:
        est = estimator(expected_counts(p, nu))
        return np.full(repetitions, est)
    return np.array([
        estimator(sample_counts(p, nu, substream(seed, index, rep)))
        for rep in range(repetitions)
    ])


def run_sweep(
    mode: str,
    grid: Sequence[int] = DEFAULT_GRID,
    nu: int = DEFAULT_NU,
    repetitions: int = DEFAULT_REPETITIONS,
    group_size: int = DEFAULT_GROUP_SIZE,
    seed: int = 0,
    g0: float = DEFAULT_G0,
    basis: OamBasis = DEFAULT_BASIS,
    simulate: bool = True,
    zero_noise: bool = False,
    workers: int = 1,
    keep_estimates: bool = False,
) -> SweepResult:
    """RMSE of the maximum-likelihood estimate over repeated experiments.

    Each grid value is T (``single-T``: T_S = T_C = m = T, N = 1) or N
    (``sequential-N``: T_S = T_C = m = 1). The ``repetitions`` estimates are
    split into consecutive groups of ``group_size``; one RMSE is computed per
    group and the mean and standard error over groups are reported.
    """
    if mode not in MODES:
        raise BadGridError(f"unknown mode {mode!r}; expected one of {MODES}")
    grid = list(grid)
    if not grid or any(int(x) != x or x < 1 for x in grid):
        raise BadGridError(f"grid must be a nonempty list of positive integers, got {grid}")
    if repetitions < 1 or group_size < 1 or repetitions % group_size:
        raise BadGridError(f"repetitions {repetitions} not divisible by group size {group_size}")
    if nu < 1:
        raise BadParamsError(f"nu must be >= 1, got {nu}")
    groups = repetitions // group_size

    def job(item):
        i, x = item
        return _run_point(mode, i, x, nu, repetitions, seed, g0, basis, simulate, zero_noise)

    items = list(enumerate(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_est = list(pool.map(job, items))
    else:
        all_est = [job(it) for it in items]

    means, errs, bounds = [], [], []
    for x, est in zip(grid, all_est):
        per_group = np.array([rmse(chunk, g0) for chunk in est.reshape(groups, group_size)])
        means.append(float(per_group.mean()))
        errs.append(float(per_group.std(ddof=1) / math.sqrt(groups)) if groups > 1 else 0.0)
        bounds.append(experimental_bound(mode, nu, x))
    return SweepResult(
        mode=mode,
        axis=[int(x) for x in grid],
        rmse_mean=means,
        rmse_stderr=errs,
        bound=bounds,
        groups=groups,
        repetitions_per_group=group_size,
        seed=seed,
        nu=nu,
        g0=g0,
        estimates=[e.tolist() for e in all_est] if keep_estimates else None,
    )


@dataclass(frozen=True)
class TimestampSynthConfig:
    """Parameters for synthetic three-detector timestamp streams (times in ps)."""

    duration: int
    pair_rate: float
    herald_delay: int = 0
    signal_delay: int = 10_000
    jitter_sigma: float = 0.0
    dark_rate: tuple[float, float, float] = (0.0, 0.0, 0.0)
    p_plus: float = 0.5
    seed: int = 0

    def __post_init__(self):
        dark = self.dark_rate
        if np.isscalar(dark):
            dark = (float(dark),) * 3
            object.__setattr__(self, "dark_rate", dark)
        if len(dark) != 3 or any(r < 0 for r in dark):
            raise BadParamsError(f"dark_rate must be three nonnegative rates, got {dark}")
        if self.duration <= 0:
            raise BadParamsError(f"duration must be positive, got {self.duration}")
        if self.pair_rate < 0 or self.jitter_sigma < 0:
            raise BadParamsError("pair_rate and jitter_sigma must be nonnegative")
        if not 0.0 <= self.p_plus <= 1.0:
            raise BadParamsError(f"p_plus must lie in [0, 1], got {self.p_plus}")
        if self.herald_delay < 0 or self.signal_delay < 0:
            raise BadParamsError("delays must be nonnegative")


def synthesize_timestamps(cfg: TimestampSynthConfig) -> dict[int, np.ndarray]:
    """Sorted int64 ps streams keyed by channel: 1 is the herald, 2 and 3 the outcome arms."""
    seconds = cfg.duration / PS_PER_S
    rng_pairs = substream(cfg.seed, 0)
    n_pairs = int(rng_pairs.poisson(cfg.pair_rate * seconds))
    t0 = np.sort(rng_pairs.integers(0, cfg.duration, size=n_pairs, dtype=np.int64))
    to_plus = rng_pairs.random(n_pairs) < cfg.p_plus
    signal = t0 + cfg.signal_delay
    if cfg.jitter_sigma > 0:
        signal = signal + np.rint(rng_pairs.normal(0.0, cfg.jitter_sigma, n_pairs)).astype(np.int64)
    streams = {
        1: t0 + cfg.herald_delay,
        2: signal[to_plus],
        3: signal[~to_plus],
    }
    for ch in (1, 2, 3):
        rng_dark = substream(cfg.seed, ch)
        n_dark = int(rng_dark.poisson(cfg.dark_rate[ch - 1] * seconds))
        dark = rng_dark.integers(0, cfg.duration, size=n_dark, dtype=np.int64)
        events = np.concatenate([streams[ch], dark])
        streams[ch] = np.sort(np.clip(events, 0, None)).astype(np.int64)
    return streams
