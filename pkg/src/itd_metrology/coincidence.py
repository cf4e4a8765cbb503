"""Herald/signal coincidence counting on integer-picosecond timestamp streams.

Each signal event is paired with the nearest herald that precedes it
strictly in time; the resulting intervals are histogrammed over a grid of
trial delays with an open coincidence window of width ``gate``. All time
arithmetic is int64; half-gate edges are handled by doubling both sides of
the window inequality.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import BadGridError, EmptyHistogramError, InputFormatError

DEFAULT_DELAY_MIN = 1_000
DEFAULT_DELAY_MAX = 50_000
DEFAULT_STEP = 5
DEFAULT_GATE = 2_000
HERALD = 1
SIGNAL_CHANNELS = (2, 3)
CHANNELS = (1, 2, 3)
HEADER = ["channel", "timestamp_ps"]
INT64_MAX = np.iinfo(np.int64).max

_UINT = re.compile(r"[0-9]+")


def as_channel(events) -> np.ndarray:
    """Validate a timestamp stream: 1-d, int64, nonnegative, non-decreasing."""
    a = np.asarray(events)
    if a.size == 0:
        return np.zeros(0, dtype=np.int64)
    if a.ndim != 1 or not np.issubdtype(a.dtype, np.integer):
        raise InputFormatError("timestamps must be a 1-d integer sequence")
    a = a.astype(np.int64, copy=False)
    if a[0] < 0 or np.any(np.diff(a) < 0):
        raise InputFormatError("timestamps must be nonnegative and sorted ascending")
    return a


@njit(cache=True)
def _two_pointer(heralds, signals):
    out = np.empty(signals.shape[0], dtype=np.int64)
    k = 0
    j = 0
    m = heralds.shape[0]
    for i in range(signals.shape[0]):
        t = signals[i]
        while j < m and heralds[j] < t:
            j += 1
        if j > 0:
            out[k] = t - heralds[j - 1]
            k += 1
    return out[:k]


def pair_intervals(heralds, signals) -> np.ndarray:
    """Interval from every signal to its nearest strictly-earlier herald.

    Signals with no earlier herald are dropped. Linear in the total number
    of events.
    """
    h, s = as_channel(heralds), as_channel(signals)
    if h.size == 0 or s.size == 0:
        return np.zeros(0, dtype=np.int64)
    return _two_pointer(h, s)


@dataclass(frozen=True)
class CoincidenceHistogram:
    delays: np.ndarray
    counts: np.ndarray
    gate_width: int

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if self.gate_width != other.gate_width or not np.array_equal(self.delays, other.delays):
            raise BadGridError("cannot merge histograms on different grids")
        return CoincidenceHistogram(self.delays, self.counts + other.counts, self.gate_width)

    @property
    def step(self) -> int:
        return int(self.delays[1] - self.delays[0]) if self.delays.size > 1 else 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delay_ps", "count"])
        w.writerows(zip(self.delays.tolist(), self.counts.tolist()))
        return buf.getvalue()


def delay_grid(delay_min: int, delay_max: int, step: int) -> np.ndarray:
    if step <= 0 or delay_min >= delay_max:
        raise BadGridError(f"bad delay grid min={delay_min} max={delay_max} step={step}")
    return np.arange(delay_min, delay_max + 1, step, dtype=np.int64)


def histogram(
    intervals,
    delay_min: int = DEFAULT_DELAY_MIN,
    delay_max: int = DEFAULT_DELAY_MAX,
    step: int = DEFAULT_STEP,
    gate: int = DEFAULT_GATE,
) -> CoincidenceHistogram:
    """Count intervals strictly inside ``(d - gate/2, d + gate/2)`` for each trial delay d."""
    if gate <= 0:
        raise BadGridError(f"gate must be positive, got {gate}")
    delays = delay_grid(delay_min, delay_max, step)
    tau2 = np.sort(np.asarray(intervals, dtype=np.int64)) * 2
    hi = np.searchsorted(tau2, 2 * delays + gate, side="left")
    lo = np.searchsorted(tau2, 2 * delays - gate, side="right")
    return CoincidenceHistogram(delays, (hi - lo).astype(np.int64), int(gate))


def peak_extract(h: CoincidenceHistogram) -> tuple[int, int]:
    """``(peak_delay, peak_count)``; ties go to the smallest delay."""
    if h.counts.size == 0:
        raise EmptyHistogramError("histogram has no bins")
    i = int(np.argmax(h.counts))
    return int(h.delays[i]), int(h.counts[i])


def brute_force_intervals(heralds, signals) -> np.ndarray:
    """Nearest-preceding-herald intervals by exhaustive comparison of all pairs."""
    h, s = as_channel(heralds), as_channel(signals)
    if h.size == 0 or s.size == 0:
        return np.zeros(0, dtype=np.int64)
    diff = s[:, None] - h[None, :]
    diff = np.where(diff > 0, diff, INT64_MAX)
    nearest = diff.min(axis=1)
    return nearest[nearest != INT64_MAX]


def brute_force_count(heralds, signals, delay, gate: int):
    """Exhaustive O(m n) coincidence count at one delay or an array of delays."""
    tau = brute_force_intervals(heralds, signals)
    d = np.atleast_1d(np.asarray(delay, dtype=np.int64))
    if gate <= 0 or tau.size == 0:
        counts = np.zeros(d.shape, dtype=np.int64)
    else:
        inside = (2 * tau[None, :] > 2 * d[:, None] - gate) & (2 * tau[None, :] < 2 * d[:, None] + gate)
        counts = inside.sum(axis=1).astype(np.int64)
    return int(counts[0]) if np.ndim(delay) == 0 else counts


def read_timestamps(source) -> dict[int, np.ndarray]:
    """Parse a ``channel,timestamp_ps`` CSV into sorted per-channel streams.

    ``source`` is a path or an open text file. Any malformed line raises
    ``InputFormatError`` naming the line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as f:
            return read_timestamps(f)
    per_channel: dict[int, list[int]] = {ch: [] for ch in CHANNELS}
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise InputFormatError("line 1: missing header 'channel,timestamp_ps'")
    if [c.strip() for c in header] != HEADER:
        raise InputFormatError(f"line 1: expected header 'channel,timestamp_ps', got {','.join(header)!r}")
    for row in reader:
        line = reader.line_num
        if len(row) != 2:
            raise InputFormatError(f"line {line}: expected 2 fields, got {len(row)}")
        ch_s, ts_s = row[0].strip(), row[1].strip()
        if ch_s not in ("1", "2", "3"):
            raise InputFormatError(f"line {line}: channel must be 1, 2 or 3, got {ch_s!r}")
        if not _UINT.fullmatch(ts_s):
            raise InputFormatError(f"line {line}: timestamp must be a nonnegative integer, got {ts_s!r}")
        ts = int(ts_s)
        if ts > INT64_MAX:
            raise InputFormatError(f"line {line}: timestamp {ts} exceeds 64-bit range")
        per_channel[int(ch_s)].append(ts)
    return {ch: np.sort(np.array(v, dtype=np.int64)) for ch, v in per_channel.items()}


def write_timestamps(streams: dict[int, np.ndarray], dest) -> None:
    """Write streams as ``channel,timestamp_ps`` rows in global time order."""
    chans = np.concatenate([np.full(len(streams.get(ch, ())), ch, dtype=np.int64) for ch in CHANNELS])
    times = np.concatenate([np.asarray(streams.get(ch, ()), dtype=np.int64) for ch in CHANNELS])
    order = np.lexsort((chans, times))
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as f:
            return write_timestamps(streams, f)
    dest.write("channel,timestamp_ps\n")
    dest.writelines(f"{c},{t}\n" for c, t in zip(chans[order].tolist(), times[order].tolist()))


def segment_streams(streams: dict[int, np.ndarray], segment: int, n_segments: int | None = None):
    """Split streams into consecutive windows ``[k*segment, (k+1)*segment)``."""
    if segment <= 0:
        raise BadGridError(f"segment length must be positive, got {segment}")
    if n_segments is None:
        last = max((int(s[-1]) for s in streams.values() if len(s)), default=-1)
        n_segments = last // segment + 1 if last >= 0 else 0
    edges = np.arange(n_segments + 1, dtype=np.int64) * segment
    cuts = {ch: np.searchsorted(s, edges, side="left") for ch, s in streams.items()}
    return [
        {ch: s[cuts[ch][k]:cuts[ch][k + 1]] for ch, s in streams.items()}
        for k in range(n_segments)
    ]


def coincidences(
    streams: dict[int, np.ndarray],
    delay_min: int = DEFAULT_DELAY_MIN,
    delay_max: int = DEFAULT_DELAY_MAX,
    step: int = DEFAULT_STEP,
    gate: int = DEFAULT_GATE,
) -> dict[int, CoincidenceHistogram]:
    """Histograms of each signal channel against the herald channel."""
    heralds = streams.get(HERALD, np.zeros(0, dtype=np.int64))
    return {
        ch: histogram(pair_intervals(heralds, streams.get(ch, np.zeros(0, dtype=np.int64))),
                      delay_min, delay_max, step, gate)
        for ch in SIGNAL_CHANNELS
    }
