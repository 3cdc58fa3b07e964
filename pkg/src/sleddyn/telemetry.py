"""Telemetry ingestion, filtering, resampling, and derived channels.

A run is stored column-wise as immutable numpy arrays (one per sensor
channel) plus metadata. CSV files map onto channels through a small
JSON schema that names the columns and declares whether angles (and
angular rates) are logged in degrees or radians; internally everything
is SI and radians.

Processing order for track data: zero-phase low-pass filter at the
native rate, resample to the analysis rate (100 Hz by default), then
differentiate rates and integrate speed into distance. Filtering is
zero-phase (second-order Butterworth run forward and backward) so
forces and slip angles stay aligned in time; differentiation uses
central differences, one-sided at the ends.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import ConfigError, DataError

#: Channels every run must provide, in canonical order.
CORE_CHANNELS = (
    "a_x", "a_y", "a_z",
    "phi_dot", "theta_dot", "psi_dot",
    "v", "alpha_sensor", "delta", "gamma",
)

#: Channels read as angles (converted from degrees when the schema says so).
ANGLE_CHANNELS = ("alpha_sensor", "delta", "gamma")
RATE_CHANNELS = ("phi_dot", "theta_dot", "psi_dot")

DEFAULT_RATE_HZ = 100.0
DEFAULT_CUTOFF_HZ = 20.0


@dataclass(frozen=True)
class TelemetryFrame:
    """One sample of every core channel; angles in radians."""

    t: float
    a_x: float
    a_y: float
    a_z: float
    phi_dot: float
    theta_dot: float
    psi_dot: float
    v: float
    alpha_sensor: float
    delta: float
    gamma: float
    h: float | None = None


@dataclass(frozen=True)
class DerivedChannels:
    """Angular accelerations [rad/s^2] and cumulative distance [m]."""

    phi_ddot: np.ndarray
    theta_ddot: np.ndarray
    psi_ddot: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class TelemetryMeta:
    driver: str = ""
    track: str = ""
    rate_hz: float = DEFAULT_RATE_HZ


def _freeze(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TelemetryRun:
    """Time-indexed sensor channels for one run; immutable after creation."""

    t: np.ndarray
    channels: dict[str, np.ndarray]
    meta: TelemetryMeta = field(default_factory=TelemetryMeta)
    h: np.ndarray | None = None
    derived: DerivedChannels | None = None

    def __post_init__(self):
        t = _freeze(self.t)
        if t.ndim != 1 or t.size < 1:
            raise DataError("time vector must be a non-empty 1-d array")
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise DataError(f"time must be strictly increasing; violated at sample {bad[0] + 1}")
        chans = {}
        for name in CORE_CHANNELS:
            if name not in self.channels:
                raise DataError(f"missing mandatory channel {name!r}")
            arr = _freeze(self.channels[name])
            if arr.shape != t.shape:
                raise DataError(f"channel {name!r} length {arr.size} != time length {t.size}")
            chans[name] = arr
        if np.any(chans["v"] < 0):
            raise DataError("speed must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "channels", chans)
        if self.h is not None:
            object.__setattr__(self, "h", _freeze(self.h))

    def __len__(self) -> int:
        return self.t.size

    def __getattr__(self, name):
        # channel access as attributes: run.a_y, run.psi_dot, ...
        channels = object.__getattribute__(self, "channels")
        if name in channels:
            return channels[name]
        raise AttributeError(name)

    def frame(self, i: int) -> TelemetryFrame:
        return TelemetryFrame(
            t=float(self.t[i]),
            h=float(self.h[i]) if self.h is not None else None,
            **{name: float(self.channels[name][i]) for name in CORE_CHANNELS},
        )

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def native_rate(self) -> float:
        """Median sample rate of the stored grid [Hz]."""
        if self.t.size < 2:
            raise DataError("need at least two samples to estimate a rate")
        return 1.0 / float(np.median(np.diff(self.t)))


# ---------------------------------------------------------------------------
# CSV schema


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping and unit declaration for telemetry CSV files.

    ``columns`` maps channel names (plus "t" and optionally "h") to CSV
    column headers. ``angle_unit`` is "rad" or "deg" and also covers the
    angular-rate channels (deg -> deg/s).
    """

    columns: dict[str, str]
    angle_unit: str = "rad"

    def __post_init__(self):
        if self.angle_unit not in ("rad", "deg"):
            raise ConfigError(f"angle_unit must be 'rad' or 'deg', got {self.angle_unit!r}")
        missing = [k for k in ("t", *CORE_CHANNELS) if k not in self.columns]
        if missing:
            raise ConfigError(f"schema missing column mappings: {', '.join(missing)}")


def identity_schema(angle_unit: str = "rad", with_h: bool = False) -> CsvSchema:
    cols = {"t": "t", **{c: c for c in CORE_CHANNELS}}
    if with_h:
        cols["h"] = "h"
    return CsvSchema(columns=cols, angle_unit=angle_unit)


def load_schema(path) -> CsvSchema:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid schema JSON: {exc}") from exc
    if "columns" not in raw:
        raise ConfigError(f"{path}: schema needs a 'columns' mapping")
    return CsvSchema(columns=dict(raw["columns"]), angle_unit=raw.get("angle_unit", "rad"))


def save_schema(schema: CsvSchema, path) -> None:
    Path(path).write_text(
        json.dumps({"columns": schema.columns, "angle_unit": schema.angle_unit}, indent=2) + "\n",
        encoding="utf-8",
    )


def ingest_csv(path, schema: CsvSchema, meta: TelemetryMeta | None = None) -> TelemetryRun:
    """Read one run from CSV, converting to SI units and radians.

    Leading ``#`` lines are treated as comments; ``# meta key = value``
    lines populate the run metadata (driver, track). Raises DataError
    naming the file line for unparsable rows and non-monotonic time
    stamps.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"telemetry file not found: {path}")
    wanted = dict(schema.columns)
    have_h = "h" in wanted
    names = ["t", *CORE_CHANNELS] + (["h"] if have_h else [])
    data: dict[str, list[float]] = {n: [] for n in names}
    meta_fields: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        offset = 0
        body = []
        for raw in fh:
            if raw.startswith("#"):
                if not body:
                    offset += 1
                    comment = raw.lstrip("#").strip()
                    if comment.startswith("meta ") and "=" in comment:
                        key, _, value = comment[5:].partition("=")
                        meta_fields[key.strip()] = value.strip()
                continue
            body.append(raw)
        reader = csv.DictReader(body)
        header = reader.fieldnames or []
        missing = [col for k, col in wanted.items() if col not in header]
        if missing:
            raise DataError(f"{path}: missing mapped columns: {', '.join(sorted(missing))}")
        for lineno, row in enumerate(reader, start=offset + 2):
            for name in names:
                cell = row.get(wanted[name], "")
                try:
                    data[name].append(float(cell))
                except (TypeError, ValueError):
                    raise DataError(
                        f"{path}:{lineno}: cannot parse {wanted[name]!r} value {cell!r}"
                    ) from None
    if not data["t"]:
        raise DataError(f"{path}: no data rows")
    t = np.array(data["t"])
    bad = np.nonzero(np.diff(t) <= 0)[0]
    if bad.size:
        # header follows the comment block; bad[0] flags the second sample
        # of the offending pair
        raise DataError(f"{path}: time not strictly increasing at line {bad[0] + offset + 3}")
    scale = np.pi / 180.0 if schema.angle_unit == "deg" else 1.0
    channels = {}
    for name in CORE_CHANNELS:
        arr = np.array(data[name])
        if name in ANGLE_CHANNELS or name in RATE_CHANNELS:
            arr = arr * scale
        channels[name] = arr
    if meta is None:
        rate = 1.0 / float(np.median(np.diff(t))) if t.size > 1 else DEFAULT_RATE_HZ
        meta = TelemetryMeta(
            driver=meta_fields.get("driver", ""),
            track=meta_fields.get("track", ""),
            rate_hz=float(meta_fields.get("rate_hz", rate)),
        )
    return TelemetryRun(t=t, channels=channels, meta=meta, h=np.array(data["h"]) if have_h else None)


def export_csv(run: TelemetryRun, path, schema: CsvSchema | None = None,
               header_comments: list[str] | None = None) -> None:
    """Write a run back to CSV, mirroring the ingest format.

    Floats are written with repr so a round trip reproduces every
    channel bit-identically.
    """
    schema = schema or identity_schema(with_h=run.h is not None)
    scale = 180.0 / np.pi if schema.angle_unit == "deg" else 1.0
    names = ["t", *CORE_CHANNELS] + (["h"] if "h" in schema.columns and run.h is not None else [])
    cols = {}
    for name in names:
        if name == "t":
            cols[name] = run.t
        elif name == "h":
            cols[name] = run.h
        else:
            arr = run.channels[name]
            if name in ANGLE_CHANNELS or name in RATE_CHANNELS:
                arr = arr * scale
            cols[name] = arr
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_comments or []:
            fh.write(f"# {line}\n")
        if run.meta.driver:
            fh.write(f"# meta driver = {run.meta.driver}\n")
        if run.meta.track:
            fh.write(f"# meta track = {run.meta.track}\n")
        writer = csv.writer(fh)
        writer.writerow([schema.columns[n] for n in names])
        for i in range(len(run)):
            writer.writerow([repr(float(cols[n][i])) for n in names])


# ---------------------------------------------------------------------------
# processing


def lowpass_filter(run: TelemetryRun, cutoff: float = DEFAULT_CUTOFF_HZ) -> TelemetryRun:
    """Zero-phase second-order Butterworth low-pass on every channel.

    The filter runs forward and backward (no phase shift) with the
    default odd-reflection padding at the ends. The cutoff must stay
    below the Nyquist frequency of the run's grid.
    """
    rate = run.native_rate()
    if cutoff >= rate / 2.0:
        raise ConfigError(f"cutoff {cutoff} Hz >= Nyquist ({rate / 2.0:.6g} Hz)")
    if cutoff <= 0:
        raise ConfigError("cutoff must be positive")
    b, a = butter(2, cutoff, fs=rate)
    channels = {name: filtfilt(b, a, arr) for name, arr in run.channels.items()}
    h = filtfilt(b, a, run.h) if run.h is not None else None
    return TelemetryRun(t=run.t, channels=channels, meta=run.meta, h=h)


def resample(run: TelemetryRun, rate: float = DEFAULT_RATE_HZ) -> TelemetryRun:
    """Linear interpolation onto a uniform grid at the given rate [Hz].

    Only downsampling (or keeping the rate) is supported; upsampling
    would fabricate bandwidth that was never measured.
    """
    native = run.native_rate()
    if rate > native * (1.0 + 1e-9):
        raise ConfigError(f"cannot resample {native:.6g} Hz data up to {rate} Hz")
    n = int(np.floor(run.duration * rate + 1e-9)) + 1
    t_new = run.t[0] + np.arange(n) / rate
    channels = {name: np.interp(t_new, run.t, arr) for name, arr in run.channels.items()}
    h = np.interp(t_new, run.t, run.h) if run.h is not None else None
    return TelemetryRun(t=t_new, channels=channels, meta=replace(run.meta, rate_hz=rate), h=h)


def derive_channels(run: TelemetryRun) -> TelemetryRun:
    """Attach angular accelerations and cumulative distance.

    Central differences for the rates (one-sided at the endpoints,
    exact for affine signals) and trapezoidal integration of speed over
    time for the distance, anchored at s(0) = 0.
    """
    if len(run) < 3:
        raise DataError("need at least 3 samples to differentiate")
    t = run.t
    derived = DerivedChannels(
        phi_ddot=_freeze(np.gradient(run.phi_dot, t)),
        theta_ddot=_freeze(np.gradient(run.theta_dot, t)),
        psi_ddot=_freeze(np.gradient(run.psi_dot, t)),
        s=_freeze(np.concatenate([[0.0], np.cumsum(0.5 * (run.v[1:] + run.v[:-1]) * np.diff(t))])),
    )
    return TelemetryRun(t=run.t, channels=dict(run.channels), meta=run.meta, h=run.h, derived=derived)


def process(run: TelemetryRun, cutoff: float | None = DEFAULT_CUTOFF_HZ,
            rate: float = DEFAULT_RATE_HZ) -> TelemetryRun:
    """Filter (optional), resample, and derive: the standard pipeline."""
    if cutoff is not None:
        run = lowpass_filter(run, cutoff)
    run = resample(run, rate)
    return derive_channels(run)
