"""Analysis pipeline for unpaired two-station time-tag data.

Laboratory logs are not index-aligned: the stations record different event
counts and their clocks may disagree by a constant shift. The pipeline here
recovers pairs from the tags alone: histogram all cross-station time
differences, read the clock shift off the histogram mode, greedily match
events within a window of the shifted difference (each event used at most
once), and only then run the usual coincidence/CHSH analysis on the matched
pairs. Windows, bins and shifts are all in seconds; tags are converted from
log units on entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coincidence import CoincidenceTable, chsh_max, correlation, _table_from_arrays
from .model import StationLog

__all__ = [
    "Histogram",
    "MatchedPairs",
    "diff_histogram",
    "optimal_shift",
    "match_pairs",
    "smax_vs_window",
    "delay_histogram_by_setting",
    "embed_in_timeline",
]


@dataclass
class Histogram:
    """Integer counts over uniform bins; bin i covers
    [origin + i*bin_width, origin + (i+1)*bin_width)."""

    bin_width: float
    origin: float = 0.0
    counts: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bin_width > 0.0:
            raise ValueError(f"bin width must be positive, got {self.bin_width}")

    def bin_of(self, value: float) -> int:
        return int(math.floor((value - self.origin) / self.bin_width))

    def add(self, value: float, count: int = 1) -> None:
        b = self.bin_of(value)
        self.counts[b] = self.counts.get(b, 0) + count

    def center(self, bin_index: int) -> float:
        return self.origin + (bin_index + 0.5) * self.bin_width

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def normalized(self) -> dict[int, float]:
        """counts scaled to unit total (empty histogram stays empty)."""
        t = self.total
        return {b: c / t for b, c in self.counts.items()} if t else {}


@dataclass
class MatchedPairs:
    """Greedy pairing result; every event index appears at most once."""

    index_1: np.ndarray  # event indices into log 1
    index_2: np.ndarray  # event indices into log 2
    diff: np.ndarray  # raw t1 - t2 in seconds (shift not subtracted)
    window: float
    shift: float

    def __len__(self) -> int:
        return int(self.index_1.size)


def _times_seconds(log: StationLog) -> np.ndarray:
    t = log.time_tag * log.time_unit
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise ValueError(f"station {log.station_id} log is not time-sorted")
    return t


def diff_histogram(
    log1: StationLog,
    log2: StationLog,
    bin_width: float,
    scan_range: float = 1e-6,
) -> Histogram:
    """Histogram of every cross-station difference t1 - t2 within scan_range.

    Bins are centered on multiples of bin_width so that a symmetric
    difference distribution peaks in the bin centered at zero. Two-pointer
    sweep over the sorted tag streams: O(N1 + N2 + in-range pairs).
    """
    if not scan_range > 0.0:
        raise ValueError(f"scan range must be positive, got {scan_range}")
    t1 = _times_seconds(log1)
    t2 = _times_seconds(log2)
    hist = Histogram(bin_width=bin_width, origin=-bin_width / 2.0)
    if t1.size == 0 or t2.size == 0:
        return hist
    lo = np.searchsorted(t2, t1 - scan_range, side="left")
    hi = np.searchsorted(t2, t1 + scan_range, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return hist
    rows = np.repeat(np.arange(t1.size), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    cols = np.arange(total) - starts + np.repeat(lo, counts)
    diffs = t1[rows] - t2[cols]
    bins = np.floor((diffs - hist.origin) / hist.bin_width).astype(np.int64)
    for b, c in zip(*np.unique(bins, return_counts=True)):
        hist.counts[int(b)] = int(c)
    return hist


def optimal_shift(hist: Histogram) -> float:
    """Center of the maximal bin; ties break toward the smallest |shift|."""
    if not hist.counts:
        raise ValueError("cannot locate a shift in an empty histogram")
    best = max(hist.counts, key=lambda b: (hist.counts[b], -abs(hist.center(b)), -hist.center(b)))
    return hist.center(best)


def match_pairs(log1: StationLog, log2: StationLog, shift: float, window: float) -> MatchedPairs:
    """Greedy chronological pairing of events with |t1 - t2 - shift| < window.

    Cursors advance through both sorted streams; a feasible pair is deferred
    when the next event on either side fits the current partner strictly
    better, which removes double counts deterministically and keeps every
    event in at most one pair.
    """
    if not window > 0.0:
        raise ValueError(f"window must be positive, got {window}")
    u = _times_seconds(log1) - shift
    v = _times_seconds(log2)
    n1, n2 = u.size, v.size
    rows1: list[int] = []
    rows2: list[int] = []
    i = j = 0
    while i < n1 and j < n2:
        d = u[i] - v[j]
        if d <= -window:
            i += 1
            continue
        if d >= window:
            j += 1
            continue
        if j + 1 < n2 and abs(u[i] - v[j + 1]) < abs(d):
            j += 1  # v[j] stays unmatched; the next partner fits better
            continue
        if i + 1 < n1 and abs(u[i + 1] - v[j]) < abs(d):
            i += 1
            continue
        rows1.append(i)
        rows2.append(j)
        i += 1
        j += 1
    r1 = np.asarray(rows1, dtype=np.int64)
    r2 = np.asarray(rows2, dtype=np.int64)
    t1 = _times_seconds(log1)
    return MatchedPairs(
        index_1=log1.index[r1],
        index_2=log2.index[r2],
        diff=t1[r1] - v[r2],
        window=window,
        shift=shift,
    )


def _rows_for(log: StationLog, indices: np.ndarray) -> np.ndarray:
    rows = np.searchsorted(log.index, indices)
    if np.any(rows >= len(log)) or np.any(log.index[rows] != indices):
        raise ValueError("pair indices not present in log")
    return rows


def pairs_table(pairs: MatchedPairs, log1: StationLog, log2: StationLog) -> CoincidenceTable:
    """Coincidence table over matched pairs, keyed by the setting indices."""
    r1 = _rows_for(log1, pairs.index_1)
    r2 = _rows_for(log2, pairs.index_2)
    counts = _table_from_arrays(
        log1.setting_index[r1], log1.outcome[r1],
        log2.setting_index[r2], log2.outcome[r2],
    )
    return CoincidenceTable(counts=counts, total_events=max(len(log1), len(log2)))


def smax_vs_window(
    log1: StationLog,
    log2: StationLog,
    shift: float,
    windows: list[float],
) -> list[tuple[float, float | None, int]]:
    """(window, max |S| over sign placements, pair count) for each window.

    Windows with no pairs, or with an empty settings combination, report a
    None S value rather than a fabricated number.
    """
    out: list[tuple[float, float | None, int]] = []
    for w in windows:
        pairs = match_pairs(log1, log2, shift, w)
        if len(pairs) == 0:
            out.append((float(w), None, 0))
            continue
        table = pairs_table(pairs, log1, log2)
        try:
            e = [correlation(table, (i, j)) for i in (0, 1) for j in (0, 1)]
        except Exception:
            out.append((float(w), None, len(pairs)))
            continue
        out.append((float(w), chsh_max(*e), len(pairs)))
    return out


def delay_histogram_by_setting(
    pairs: MatchedPairs,
    log1: StationLog,
    log2: StationLog,
    setting_pair: tuple[int, int],
    outcome_pair: tuple[int, int] = (1, 1),
    bin_width: float = 0.5e-9,
) -> Histogram:
    """Histogram of t1 - t2 over matched pairs with the selected detectors.

    Restricting to one (setting, setting) and (outcome, outcome) combination
    exposes setting-dependent delays: compare `normalized()` across setting
    pairs. Raises when the selection is empty.
    """
    r1 = _rows_for(log1, pairs.index_1)
    r2 = _rows_for(log2, pairs.index_2)
    keep = (
        (log1.setting_index[r1] == setting_pair[0])
        & (log2.setting_index[r2] == setting_pair[1])
        & (log1.outcome[r1] == outcome_pair[0])
        & (log2.outcome[r2] == outcome_pair[1])
    )
    if not np.any(keep):
        raise ValueError(f"no matched pairs for settings {setting_pair}, outcomes {outcome_pair}")
    hist = Histogram(bin_width=bin_width, origin=-bin_width / 2.0)
    bins = np.floor((pairs.diff[keep] - hist.origin) / hist.bin_width).astype(np.int64)
    for b, c in zip(*np.unique(bins, return_counts=True)):
        hist.counts[int(b)] = int(c)
    return hist


def embed_in_timeline(
    log1: StationLog,
    log2: StationLog,
    spacing: float,
    delay_unit: float,
    shift: float = 0.0,
    time_unit: float = 1e-9,
) -> tuple[StationLog, StationLog]:
    """Turn index-aligned simulated logs into laboratory-style absolute tags.

    Event n is stamped at epoch n * spacing (seconds); each station adds its
    simulated delay tag scaled by delay_unit (seconds per tag unit), and
    station 2's clock runs behind station 1's by `shift`, so pair differences
    concentrate near shift. Output tags are stored in units of `time_unit`.
    """
    if not spacing > 0.0 or not delay_unit > 0.0:
        raise ValueError("spacing and delay_unit must be positive")
    if len(log1) != len(log2) or not np.array_equal(log1.index, log2.index):
        raise ValueError("timeline embedding needs index-aligned logs")
    epochs = log1.index.astype(np.float64) * spacing

    def rebuild(log: StationLog, offset: float) -> StationLog:
        t_seconds = epochs + log.time_tag * delay_unit - offset
        return StationLog(
            station_id=log.station_id,
            time_unit=time_unit,
            index=log.index.copy(),
            setting_index=log.setting_index.copy(),
            setting=log.setting.copy(),
            outcome=log.outcome.copy(),
            time_tag=t_seconds / time_unit,
            meta=dict(log.meta),
        )

    return rebuild(log1, 0.0), rebuild(log2, shift)
