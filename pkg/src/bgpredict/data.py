"""CGM ingestion, gap segmentation, windowing, smoothing and patient splits."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

CSV_HEADER = ("patient_id", "minutes", "glucose_mgdl")
NOMINAL_STEP = 5.0
MAX_GLUCOSE = 1000.0


class CsvFormatError(ValueError):
    """Raised for malformed CGM CSV input; the message names the line."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CgmSeries:
    """One patient's readings: times in minutes, values in mg/dL."""

    patient_id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError(f"patient {self.patient_id}: times not strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > MAX_GLUCOSE):
            raise ValueError(f"patient {self.patient_id}: glucose outside [0, {MAX_GLUCOSE:g}]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, CgmSeries):
            return NotImplemented
        return (
            self.patient_id == other.patient_id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def with_values(self, values) -> "CgmSeries":
        return CgmSeries(self.patient_id, self.times, values)


@dataclass(frozen=True)
class SampleWindow:
    """``d`` consecutive readings (oldest first) and the reading ``m`` steps ahead.

    ``j`` indexes the last input reading inside its segment; ``segment`` is
    the ordinal of that segment among the patient's segments.
    """

    patient_id: str
    j: int
    x: tuple[float, ...]
    y: float
    t_last: float
    t_target: float
    segment: int = 0
    times: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class PatientSplit:
    train_ids: frozenset
    all_ids: frozenset
    seed: int
    fraction: float

    @property
    def test_ids(self) -> frozenset:
        return self.all_ids - self.train_ids


def parse_cgm_csv(data: bytes | str) -> list[CgmSeries]:
    """Parse ``patient_id,minutes,glucose_mgdl`` CSV into one series per patient.

    Times are re-based so each patient's first reading is at minute 0.
    Duplicate ``(patient, minutes)`` rows are dropped with a logged warning;
    the first occurrence wins. Patients are returned in order of first
    appearance.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise CsvFormatError(f"line 1: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")

    rows: dict[str, dict[float, float]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise CsvFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
        pid, t_raw, g_raw = (c.strip() for c in row)
        try:
            t = float(t_raw)
        except ValueError:
            raise CsvFormatError(f"non-numeric minutes {t_raw!r}, line {lineno}") from None
        try:
            g = float(g_raw)
        except ValueError:
            raise CsvFormatError(f"non-numeric glucose {g_raw!r}, line {lineno}") from None
        if not math.isfinite(t):
            raise CsvFormatError(f"non-finite minutes, line {lineno}")
        if not math.isfinite(g):
            raise CsvFormatError(f"non-numeric glucose {g_raw!r}, line {lineno}")
        if g < 0:
            raise CsvFormatError(f"negative glucose, line {lineno}")
        if g > MAX_GLUCOSE:
            raise CsvFormatError(f"glucose above {MAX_GLUCOSE:g} mg/dL, line {lineno}")
        per_patient = rows.setdefault(pid, {})
        if t in per_patient:
            logger.warning("duplicate reading for patient %s at minute %g, line %d: row rejected", pid, t, lineno)
            continue
        per_patient[t] = g

    out = []
    for pid, readings in rows.items():
        times = np.array(sorted(readings))
        values = np.array([readings[t] for t in times.tolist()])
        out.append(CgmSeries(pid, times - times[0], values))
    return out


def serialize_cgm_csv(series: Iterable[CgmSeries]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in series:
        for t, g in zip(s.times.tolist(), s.values.tolist()):
            writer.writerow((s.patient_id, repr(t), repr(g)))
    return buf.getvalue().encode("utf-8")


def segment_contiguous(series: CgmSeries, nominal_step: float = NOMINAL_STEP,
                       slack: float = 0.01) -> list[CgmSeries]:
    """Split ``series`` into maximal runs of nominally spaced readings."""
    if nominal_step <= 0:
        raise ValueError("nominal_step must be positive")
    n = len(series)
    if n == 0:
        return []
    deltas = np.diff(series.times)
    ok = (deltas >= nominal_step * (1 - slack)) & (deltas <= nominal_step * (1 + slack))
    breaks = np.flatnonzero(~ok) + 1
    bounds = [0, *breaks.tolist(), n]
    return [
        CgmSeries(series.patient_id, series.times[a:b], series.values[a:b])
        for a, b in zip(bounds[:-1], bounds[1:])
    ]


def make_windows(segment: CgmSeries, d: int, m: int, segment_index: int = 0) -> list[SampleWindow]:
    """All ``(x_j, y_j)`` pairs fully inside one contiguous segment."""
    if d < 2 or m < 1:
        raise ValueError("need d >= 2 and m >= 1")
    n = len(segment)
    values = segment.values.tolist()
    times = segment.times.tolist()
    windows = []
    for j in range(d - 1, n - m):
        windows.append(
            SampleWindow(
                patient_id=segment.patient_id,
                j=j,
                x=tuple(values[j - d + 1 : j + 1]),
                y=values[j + m],
                t_last=times[j],
                t_target=times[j + m],
                segment=segment_index,
                times=tuple(times[j - d + 1 : j + 1]),
            )
        )
    return windows


def butterworth_coefficients(cutoff: float) -> tuple[float, float, float]:
    """First-order low-pass ``(b0, b1, a1)`` by bilinear transform.

    ``cutoff`` is normalized so that 1.0 is the Nyquist frequency. The
    difference equation is ``y[n] = b0*x[n] + b1*x[n-1] - a1*y[n-1]``.
    """
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    wc = math.tan(math.pi * cutoff / 2.0)
    b0 = wc / (1.0 + wc)
    a1 = (wc - 1.0) / (wc + 1.0)
    return b0, b0, a1


def butterworth_filter(values, cutoff: float = 0.8) -> np.ndarray:
    """Causal first-order Butterworth filter over a raw array.

    Filter state is pre-charged to the first sample, so constants pass
    through unchanged. Linear in ``values``.
    """
    b0, b1, a1 = butterworth_coefficients(cutoff)
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    x0 = float(x[0])
    return kernels.iir_first_order(x, b0, b1, a1, x0, x0)


def butterworth_smooth(series: CgmSeries, cutoff: float = 0.8) -> CgmSeries:
    # ringing on steep drops can undershoot zero; clip back into the valid range
    y = butterworth_filter(series.values, cutoff)
    return series.with_values(np.clip(y, 0.0, MAX_GLUCOSE))


def split_patients(all_ids: Iterable[str], percent: float, seed: int) -> PatientSplit:
    """Draw ``round_half_up(percent/100 * |P|)`` training patients uniformly."""
    ids = sorted(set(all_ids))
    n = len(ids)
    if n < 2:
        raise ValueError("need at least 2 patients to split")
    if not 0.0 < percent < 100.0:
        raise ValueError(f"train percent must lie in (0, 100), got {percent}")
    k = math.floor(percent * n / 100.0 + 0.5)
    if k < 1 or k > n - 1:
        clamped = min(max(k, 1), n - 1)
        warnings.warn(f"{percent}% of {n} patients gives {k}; clamped to {clamped}", stacklevel=2)
        k = clamped
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    return PatientSplit(
        train_ids=frozenset(ids[i] for i in chosen.tolist()),
        all_ids=frozenset(ids),
        seed=seed,
        fraction=percent,
    )


def windows_for_series(series: Sequence[CgmSeries], d: int, m: int, slack: float = 0.01,
                       smoothing_cutoff: float | None = None) -> list[SampleWindow]:
    """Segment, optionally smooth, and window every series."""
    out = []
    for s in series:
        for k, seg in enumerate(segment_contiguous(s, NOMINAL_STEP, slack)):
            if smoothing_cutoff is not None:
                seg = butterworth_smooth(seg, smoothing_cutoff)
            out.extend(make_windows(seg, d, m, segment_index=k))
    return out
