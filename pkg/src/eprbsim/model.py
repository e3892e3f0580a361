"""Domain types, the canonical station-log file format, and seeded randomness.

Angles are plain floats in radians, normalized to [0, 2*pi) where stored.
Polarizer orientations are physically periodic in pi, so analysis code never
compares setting angles for float equality: every event record carries an
integer setting index (0 or 1, naming which of the station's two polarizers
fired) next to the angle, and `setting_gap` measures angular distance mod pi.

A station log is persisted as UTF-8 text: `# key=value` header lines followed
by one `n,setting_index,setting_angle,outcome,time_tag` line per event.
Floats are written with 17 significant digits, which round-trips IEEE doubles
bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

#: Generator algorithm recorded in output metadata.
RNG_ALGORITHM = "pcg64"

# Named stream ids. Each independent physical randomness source gets its own
# stream so that reconfiguring one station cannot perturb the variates seen
# anywhere else (this is what makes the locality checks literal).
STREAM_SOURCE = 0
STREAM_SWITCH_1 = 1
STREAM_SWITCH_2 = 2
STREAM_TAGS_1 = 3
STREAM_TAGS_2 = 4


class LogParseError(ValueError):
    """Malformed station-log content; message names the offending line."""


class LogWriteError(RuntimeError):
    """A station log could not be written to its destination."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    r = math.fmod(float(a), TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:  # fmod of tiny negatives can round up to exactly 2*pi
        r = 0.0
    return r


def setting_gap(a: float, b: float) -> float:
    """Angular distance between two polarizer settings, modulo pi."""
    r = math.fmod(a - b, math.pi)
    if r < 0.0:
        r += math.pi
    return min(r, math.pi - r)


class RngStream:
    """Seedable stream of uniform variates on [0, 1).

    Equal (seed, stream_id) always reproduces the same sequence; distinct
    stream ids give independent streams (seed-sequence spawn keys). The
    underlying algorithm is PCG64, recorded as ``RNG_ALGORITHM`` in output
    metadata.
    """

    def __init__(self, seed: int, stream_id: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, n: int | None = None):
        """Draw n uniforms in [0, 1); a scalar when n is None."""
        return self._gen.random() if n is None else self._gen.random(n)


def derive_seed(seed: int, *key: int) -> int:
    """Stable 64-bit child seed for an independent sweep point."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class EventRecord:
    """One detector firing: (n, which polarizer, its angle, +-1 outcome, time tag)."""

    index: int
    setting_index: int
    setting: float
    outcome: int
    time_tag: float

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"event index must be positive, got {self.index}")
        if self.setting_index not in (0, 1):
            raise ValueError(f"setting_index must be 0 or 1, got {self.setting_index}")
        if self.outcome not in (-1, 1):
            raise ValueError(f"outcome must be -1 or +1, got {self.outcome}")
        if not (self.time_tag >= 0.0 and math.isfinite(self.time_tag)):
            raise ValueError(f"time_tag must be finite and >= 0, got {self.time_tag}")


@dataclass
class StationLog:
    """Ordered event records of one observation station, stored columnar.

    ``time_unit`` is seconds per tag unit (1.0 for simulated data, where tags
    are in units of the maximum delay). ``meta`` holds free-form header
    key/value pairs (seed, rng, run parameters); it round-trips through the
    file format untouched.
    """

    station_id: int
    time_unit: float
    index: np.ndarray
    setting_index: np.ndarray
    setting: np.ndarray
    outcome: np.ndarray
    time_tag: np.ndarray
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.station_id not in (1, 2):
            raise ValueError(f"station_id must be 1 or 2, got {self.station_id}")
        if not (self.time_unit > 0.0 and math.isfinite(self.time_unit)):
            raise ValueError(f"time_unit must be finite and positive, got {self.time_unit}")
        self.index = np.asarray(self.index, dtype=np.int64)
        self.setting_index = np.asarray(self.setting_index, dtype=np.uint8)
        self.setting = np.asarray(self.setting, dtype=np.float64)
        self.outcome = np.asarray(self.outcome, dtype=np.int8)
        self.time_tag = np.asarray(self.time_tag, dtype=np.float64)
        n = self.index.size
        for name in ("setting_index", "setting", "outcome", "time_tag"):
            if getattr(self, name).size != n:
                raise ValueError(f"column {name} has length {getattr(self, name).size}, expected {n}")
        if n and np.any(np.diff(self.index) <= 0):
            raise ValueError("event indices must be strictly increasing")
        if n and (self.index[0] < 1):
            raise ValueError("event indices must be positive")
        if np.any((self.setting_index != 0) & (self.setting_index != 1)):
            raise ValueError("setting_index entries must be 0 or 1")
        if np.any(np.abs(self.outcome.astype(np.int32)) != 1):
            raise ValueError("outcomes must be -1 or +1")
        if np.any(~np.isfinite(self.time_tag)) or np.any(self.time_tag < 0.0):
            raise ValueError("time tags must be finite and >= 0")
        # Metadata is stored normalized (stripped key/value strings) so that
        # the text format round-trips exactly.
        clean: dict[str, str] = {}
        for k, v in self.meta.items():
            key, value = str(k).strip(), str(v).strip()
            if not key or "=" in key or "\n" in key or "\n" in value or key.startswith("#"):
                raise ValueError(f"metadata key/value not representable: {k!r}={v!r}")
            if key in ("station", "time_unit"):
                raise ValueError(f"metadata key {key!r} collides with a required header")
            clean[key] = value
        self.meta = clean

    def __len__(self) -> int:
        return int(self.index.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StationLog):
            return NotImplemented
        return (
            self.station_id == other.station_id
            and self.time_unit == other.time_unit
            and self.meta == other.meta
            and np.array_equal(self.index, other.index)
            and np.array_equal(self.setting_index, other.setting_index)
            and np.array_equal(self.setting, other.setting)
            and np.array_equal(self.outcome, other.outcome)
            and np.array_equal(self.time_tag, other.time_tag)
        )

    def event(self, i: int) -> EventRecord:
        return EventRecord(
            index=int(self.index[i]),
            setting_index=int(self.setting_index[i]),
            setting=float(self.setting[i]),
            outcome=int(self.outcome[i]),
            time_tag=float(self.time_tag[i]),
        )

    def events(self) -> Iterator[EventRecord]:
        for i in range(len(self)):
            yield self.event(i)

    @classmethod
    def from_records(
        cls,
        station_id: int,
        time_unit: float,
        records: Sequence[EventRecord],
        meta: dict[str, str] | None = None,
    ) -> "StationLog":
        return cls(
            station_id=station_id,
            time_unit=time_unit,
            index=np.array([r.index for r in records], dtype=np.int64),
            setting_index=np.array([r.setting_index for r in records], dtype=np.uint8),
            setting=np.array([r.setting for r in records], dtype=np.float64),
            outcome=np.array([r.outcome for r in records], dtype=np.int8),
            time_tag=np.array([r.time_tag for r in records], dtype=np.float64),
            meta=dict(meta or {}),
        )


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulated run.

    Units: tag_resolution (tau), window (W) and time tags are all in units of
    max_delay (the largest possible delay, which sets the clock scale);
    window may be math.inf to disable the coincidence window entirely.
    """

    experiment: str  # "I" (random source polarization) or "II" (fixed)
    n_events: int
    delay_exponent: float
    learning: float
    tag_resolution: float
    window: float
    max_delay: float
    settings_1: tuple[float, float]
    settings_2: tuple[float, float]
    seed: int
    source_angle: float | None = None

    def __post_init__(self):
        if self.experiment not in ("I", "II"):
            raise ValueError(f"experiment must be 'I' or 'II', got {self.experiment!r}")
        if self.n_events < 1:
            raise ValueError(f"n_events must be >= 1, got {self.n_events}")
        if not self.delay_exponent >= 0.0:
            raise ValueError(f"delay_exponent must be >= 0, got {self.delay_exponent}")
        if not 0.0 < self.learning < 1.0:
            raise ValueError(f"learning must lie in (0, 1), got {self.learning}")
        if not self.tag_resolution > 0.0:
            raise ValueError(f"tag_resolution must be positive, got {self.tag_resolution}")
        if self.window < self.tag_resolution:
            raise ValueError(
                f"window ({self.window}) must be >= tag_resolution ({self.tag_resolution})"
            )
        if not self.max_delay > 0.0:
            raise ValueError(f"max_delay must be positive, got {self.max_delay}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.experiment == "II" and self.source_angle is None:
            raise ValueError("experiment II requires source_angle")
        if self.experiment == "I" and self.source_angle is not None:
            raise ValueError("experiment I takes no source_angle")
        object.__setattr__(self, "settings_1", tuple(wrap_angle(a) for a in self.settings_1))
        object.__setattr__(self, "settings_2", tuple(wrap_angle(a) for a in self.settings_2))
        if self.source_angle is not None:
            object.__setattr__(self, "source_angle", wrap_angle(self.source_angle))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_station_log(log: StationLog, dest: IO[str] | str | Path) -> None:
    """Write the canonical text format; `read_station_log` is its exact inverse."""
    if isinstance(dest, (str, Path)):
        try:
            with open(dest, "w", encoding="utf-8", newline="\n") as f:
                write_station_log(log, f)
        except OSError as e:
            raise LogWriteError(f"cannot write station log to {dest}: {e}") from e
        return
    try:
        dest.write(f"# station={log.station_id}\n")
        dest.write(f"# time_unit={_fmt(log.time_unit)}\n")
        for k, v in log.meta.items():
            dest.write(f"# {k}={v}\n")
        lines = [
            f"{n},{s},{_fmt(a)},{x},{_fmt(t)}\n"
            for n, s, a, x, t in zip(
                log.index.tolist(),
                log.setting_index.tolist(),
                log.setting.tolist(),
                log.outcome.tolist(),
                log.time_tag.tolist(),
            )
        ]
        dest.writelines(lines)
    except OSError as e:
        raise LogWriteError(f"cannot write station log: {e}") from e


def read_station_log(source: IO[str] | str | Path) -> StationLog:
    """Parse the canonical text format, rejecting malformed content by line."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as f:
            return read_station_log(f)

    station_id: int | None = None
    time_unit: float | None = None
    meta: dict[str, str] = {}
    idx: list[int] = []
    sidx: list[int] = []
    ang: list[float] = []
    out: list[int] = []
    tag: list[float] = []
    seen_data = False

    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_data:
                raise LogParseError(f"line {lineno}: header after data")
            body = line[1:].strip()
            if "=" not in body:
                raise LogParseError(f"line {lineno}: malformed header {line!r}")
            key, _, value = body.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "station":
                if value not in ("1", "2"):
                    raise LogParseError(f"line {lineno}: station must be 1 or 2, got {value!r}")
                station_id = int(value)
            elif key == "time_unit":
                try:
                    time_unit = float(value)
                except ValueError:
                    raise LogParseError(f"line {lineno}: bad time_unit {value!r}") from None
                if not (time_unit > 0 and math.isfinite(time_unit)):
                    raise LogParseError(f"line {lineno}: time_unit must be positive")
            else:
                meta[key] = value
            continue

        seen_data = True
        parts = line.split(",")
        if len(parts) != 5:
            raise LogParseError(f"line {lineno}: expected 5 comma-separated fields, got {len(parts)}")
        try:
            n = int(parts[0])
            s = int(parts[1])
            a = float(parts[2])
            x = int(parts[3])
            t = float(parts[4])
        except ValueError:
            raise LogParseError(f"line {lineno}: non-numeric field in {line!r}") from None
        if n < 1:
            raise LogParseError(f"line {lineno}: event index must be positive")
        if idx and n <= idx[-1]:
            raise LogParseError(f"line {lineno}: event index {n} not increasing")
        if s not in (0, 1):
            raise LogParseError(f"line {lineno}: setting_index must be 0 or 1, got {s}")
        if x not in (-1, 1):
            raise LogParseError(f"line {lineno}: outcome must be -1 or +1, got {x}")
        if not (t >= 0 and math.isfinite(t)):
            raise LogParseError(f"line {lineno}: time tag must be finite and >= 0")
        idx.append(n)
        sidx.append(s)
        ang.append(a)
        out.append(x)
        tag.append(t)

    if station_id is None:
        raise LogParseError("missing '# station=' header")
    if time_unit is None:
        raise LogParseError("missing '# time_unit=' header")

    return StationLog(
        station_id=station_id,
        time_unit=time_unit,
        index=np.array(idx, dtype=np.int64),
        setting_index=np.array(sidx, dtype=np.uint8),
        setting=np.array(ang, dtype=np.float64),
        outcome=np.array(out, dtype=np.int8),
        time_tag=np.array(tag, dtype=np.float64),
        meta=meta,
    )
