"""Prediction error-grid analysis (PRED-EGA).

Each prediction gets a point zone (value vs reference) and, where a central
rate of change exists, a rate zone (predicted vs reference rate). A
per-range combination matrix maps the zone pair to a verdict. Boundaries
live in a JSON zone-table file; the packaged default is
``data/default_zones.json``.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels_py, kernels

ZONES = ("A", "B", "C", "D", "E")
RANGE_NAMES = ("hypo", "eu", "hyper")
POINT_KEYS = (
    "hypo_max",
    "hyper_min",
    "relative_tolerance",
    "missed_hyper_ref_min",
    "overcorrect_offset",
    "overcorrect_ref_max",
    "overcorrect_low_ref_min",
    "overcorrect_slope",
    "overcorrect_intercept",
)
# keys carrying mg/dL units; the rest are dimensionless
_POINT_UNIT_KEYS = {
    "hypo_max",
    "hyper_min",
    "missed_hyper_ref_min",
    "overcorrect_offset",
    "overcorrect_ref_max",
    "overcorrect_low_ref_min",
    "overcorrect_intercept",
}
RATE_KEYS = ("accurate", "benign", "significant", "missed_band")
_RATE_UNIT_KEYS = {"accurate", "benign", "significant"}
DEFAULT_DENOMINATOR_FACTOR = 2.0


class Verdict(enum.IntEnum):
    ERROR = 0
    BENIGN = 1
    ACCURATE = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ZoneTableError(f"unknown verdict {text!r}") from None


class GlycemicRange(enum.IntEnum):
    HYPO = 0
    EU = 1
    HYPER = 2

    @property
    def label(self) -> str:
        return RANGE_NAMES[self]


# report column order
VERDICT_ORDER = (Verdict.ACCURATE, Verdict.BENIGN, Verdict.ERROR)


class ZoneTableError(ValueError):
    pass


@dataclass(frozen=True)
class ZoneTables:
    point_zones: Mapping[str, float]
    rate_zones: Mapping[str, float]
    combination: np.ndarray  # int8 [range, point zone, rate zone] -> Verdict
    endpoint: np.ndarray  # int8 [point zone] -> Verdict
    version: str = "custom"
    source_hash: str = ""

    @property
    def point_params(self) -> np.ndarray:
        return np.array([self.point_zones[k] for k in POINT_KEYS], dtype=np.float64)

    @property
    def rate_params(self) -> np.ndarray:
        return np.array([self.rate_zones[k] for k in RATE_KEYS], dtype=np.float64)

    @classmethod
    def from_dict(cls, doc: Mapping, source_hash: str = "") -> "ZoneTables":
        """Validate and build tables; every matrix cell must hold a verdict."""
        try:
            pz = {k: float(doc["point_zones"][k]) for k in POINT_KEYS}
            rz = {k: float(doc["rate_zones"][k]) for k in RATE_KEYS}
            comb_doc = doc["combination"]
        except KeyError as exc:
            raise ZoneTableError(f"zone table missing key {exc}") from None
        comb = np.empty((3, 5, 5), dtype=np.int8)
        for r, name in enumerate(RANGE_NAMES):
            if name not in comb_doc:
                raise ZoneTableError(f"combination matrix missing range {name!r}")
            rows = comb_doc[name]
            if len(rows) != 5 or any(len(row) != 5 for row in rows):
                raise ZoneTableError(f"combination[{name!r}] must be 5x5")
            for i, row in enumerate(rows):
                for j, cell in enumerate(row):
                    comb[r, i, j] = Verdict.parse(cell)
        endpoint_doc = doc.get("endpoint", {"A": "Accurate", "B": "Accurate", "C": "Benign",
                                            "D": "Error", "E": "Error"})
        try:
            endpoint = np.array([Verdict.parse(endpoint_doc[z]) for z in ZONES], dtype=np.int8)
        except KeyError as exc:
            raise ZoneTableError(f"endpoint map missing zone {exc}") from None
        if not pz["hypo_max"] < pz["hyper_min"]:
            raise ZoneTableError("hypo_max must be below hyper_min")
        if not rz["accurate"] <= rz["benign"]:
            raise ZoneTableError("rate 'accurate' threshold must not exceed 'benign'")
        comb.setflags(write=False)
        endpoint.setflags(write=False)
        return cls(pz, rz, comb, endpoint, str(doc.get("version", "custom")), source_hash)

    @classmethod
    def load(cls, path: str | Path) -> "ZoneTables":
        raw = Path(path).read_bytes()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ZoneTableError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc, hashlib.sha256(raw).hexdigest())

    @classmethod
    def default(cls) -> "ZoneTables":
        return _default_tables()

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "point_zones": dict(self.point_zones),
            "rate_zones": dict(self.rate_zones),
            "combination": {
                name: [[Verdict(int(v)).label for v in row] for row in self.combination[r]]
                for r, name in enumerate(RANGE_NAMES)
            },
            "endpoint": {z: Verdict(int(v)).label for z, v in zip(ZONES, self.endpoint)},
        }

    def scaled(self, value_factor: float, rate_factor: float | None = None) -> "ZoneTables":
        """Tables for data measured in units ``value_factor`` times smaller."""
        rate_factor = value_factor if rate_factor is None else rate_factor
        pz = {k: v * value_factor if k in _POINT_UNIT_KEYS else v for k, v in self.point_zones.items()}
        rz = {k: v * rate_factor if k in _RATE_UNIT_KEYS else v for k, v in self.rate_zones.items()}
        return ZoneTables(pz, rz, self.combination, self.endpoint, self.version + "-scaled", "")


_DEFAULT: list[ZoneTables] = []


def _default_tables() -> ZoneTables:
    if not _DEFAULT:
        raw = resources.files("bgpredict").joinpath("data/default_zones.json").read_bytes()
        _DEFAULT.append(ZoneTables.from_dict(json.loads(raw), hashlib.sha256(raw).hexdigest()))
    return _DEFAULT[0]


def central_rate(values: Sequence[float], times: Sequence[float], j: int,
                 denominator_factor: float = DEFAULT_DENOMINATOR_FACTOR) -> float | None:
    """``(v[j+1] - v[j-1]) / (factor * (t[j+1] - t[j-1]))``; None at either end."""
    if j <= 0 or j >= len(values) - 1:
        return None
    return (values[j + 1] - values[j - 1]) / (denominator_factor * (times[j + 1] - times[j - 1]))


def central_rates(values, times, segments=None,
                  denominator_factor: float = DEFAULT_DENOMINATOR_FACTOR):
    """Vectorized ``central_rate``; returns ``(rates, defined)``.

    With ``segments`` given, a rate is defined only when both neighbours
    belong to the same segment as the centre point.
    """
    v = np.asarray(values, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    n = v.size
    rates = np.zeros(n)
    defined = np.zeros(n, dtype=bool)
    if n < 3:
        return rates, defined
    inner = np.ones(n - 2, dtype=bool)
    if segments is not None:
        seg = np.asarray(segments)
        inner = (seg[:-2] == seg[1:-1]) & (seg[2:] == seg[1:-1])
    dt = t[2:] - t[:-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (v[2:] - v[:-2]) / (denominator_factor * dt)
    rates[1:-1] = np.where(inner, r, 0.0)
    defined[1:-1] = inner
    return rates, defined


def glycemic_range(reference: float, tables: ZoneTables | None = None) -> GlycemicRange:
    pz = (tables or _default_tables()).point_zones
    return GlycemicRange(_kernels_py._glycemic_range(reference, pz["hypo_max"], pz["hyper_min"]))


def classify_point(predicted: float, reference: float, tables: ZoneTables | None = None) -> str:
    tables = tables or _default_tables()
    return ZONES[_kernels_py._point_zone(float(predicted), float(reference), tables.point_params.tolist())]


def classify_rate(predicted_rate: float, reference_rate: float, tables: ZoneTables | None = None) -> str:
    tables = tables or _default_tables()
    return ZONES[_kernels_py._rate_zone(float(predicted_rate), float(reference_rate),
                                        tables.rate_params.tolist())]


def combine(point_zone: str, rate_zone: str | None, rng: GlycemicRange | str,
            tables: ZoneTables | None = None) -> Verdict:
    """Verdict for a zone pair; ``rate_zone=None`` means no rate was available."""
    tables = tables or _default_tables()
    r = GlycemicRange[rng.upper()] if isinstance(rng, str) else GlycemicRange(rng)
    p = ZONES.index(point_zone)
    if rate_zone is None:
        return Verdict(int(tables.endpoint[p]))
    return Verdict(int(tables.combination[r, p, ZONES.index(rate_zone)]))


@dataclass(frozen=True)
class Classification:
    """Per-index PRED-EGA output; codes as in :mod:`bgpredict._kernels_py`."""

    ranges: np.ndarray
    point_zones: np.ndarray
    rate_zones: np.ndarray
    verdicts: np.ndarray


def classify_sequence(predicted, reference, times, tables: ZoneTables | None = None,
                      segments=None, denominator_factor: float = DEFAULT_DENOMINATOR_FACTOR,
                      reference_rates=None) -> Classification:
    tables = tables or _default_tables()
    pred = np.ascontiguousarray(predicted, dtype=np.float64)
    ref = np.ascontiguousarray(reference, dtype=np.float64)
    if pred.shape != ref.shape or np.shape(times) != pred.shape:
        raise ValueError("predicted, reference and times must have equal length")
    if segments is not None and np.shape(segments) != pred.shape:
        raise ValueError("segments must align with predictions")
    p_rate, defined = central_rates(pred, times, segments, denominator_factor)
    if reference_rates is None:
        r_rate, _ = central_rates(ref, times, segments, denominator_factor)
    else:
        r_rate = np.ascontiguousarray(reference_rates, dtype=np.float64)
    ranges, pz, rz, verdicts = kernels.classify_batch(
        pred, ref, p_rate, r_rate, defined.astype(np.uint8),
        tables.point_params, tables.rate_params, tables.combination, tables.endpoint,
    )
    return Classification(ranges, pz, rz, verdicts)


@dataclass(frozen=True)
class PredEgaReport:
    """Counts per glycemic range (rows) and verdict (Accurate, Benign, Error)."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=np.int64))

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64).reshape(3, 3)
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_classification(cls, cls_: Classification, mask=None) -> "PredEgaReport":
        ranges = cls_.ranges.astype(np.intp)
        verdicts = cls_.verdicts.astype(np.intp)
        if mask is not None:
            m = np.asarray(mask, dtype=bool)
            ranges, verdicts = ranges[m], verdicts[m]
        cols = 2 - verdicts  # VERDICT_ORDER is descending
        counts = np.zeros((3, 3), dtype=np.int64)
        np.add.at(counts, (ranges, cols), 1)
        return cls(counts)

    def __add__(self, other: "PredEgaReport") -> "PredEgaReport":
        return PredEgaReport(self.counts + other.counts)

    @classmethod
    def pooled(cls, reports: Sequence["PredEgaReport"]) -> "PredEgaReport":
        total = cls()
        for r in reports:
            total = total + r
        return total

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def percentages(self) -> np.ndarray:
        tot = self.totals[:, None].astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(tot > 0, 100.0 * self.counts / np.where(tot > 0, tot, 1.0), 0.0)
        return pct

    def row(self, rng: str) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.percentages[RANGE_NAMES.index(rng)])

    def flat(self) -> list[float]:
        """Nine percentages: hypo (Accurate, Benign, Error), then eu, then hyper."""
        return [float(v) for v in self.percentages.ravel()]

    def to_dict(self) -> dict:
        pct = self.percentages
        return {
            name: {
                "count": int(self.totals[r]),
                "counts": {v.label: int(self.counts[r, i]) for i, v in enumerate(VERDICT_ORDER)},
                "percent": {v.label: float(pct[r, i]) for i, v in enumerate(VERDICT_ORDER)},
            }
            for r, name in enumerate(RANGE_NAMES)
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PredEgaReport":
        return cls([[doc[name]["counts"][v.label] for v in VERDICT_ORDER] for name in RANGE_NAMES])


def score_sequence(predicted, reference, times, tables: ZoneTables | None = None, segments=None,
                   denominator_factor: float = DEFAULT_DENOMINATOR_FACTOR, mask=None) -> PredEgaReport:
    """Stratified PRED-EGA counts of ``predicted`` against ``reference``.

    Indices without a central rate on both sides (segment ends) are judged
    on the point zone alone via the tables' endpoint map.
    """
    c = classify_sequence(predicted, reference, times, tables, segments, denominator_factor)
    return PredEgaReport.from_classification(c, mask)


def accurate_or_benign(report: PredEgaReport, rng: str) -> float:
    acc, ben, _ = report.row(rng)
    return acc + ben if report.totals[RANGE_NAMES.index(rng)] else math.nan
