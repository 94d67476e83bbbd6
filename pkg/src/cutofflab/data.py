"""Observation types, CSV ingestion, and descriptive comparison statistics.

The unit of observation is one athlete in one event's first main round. The
running variable is the effective pre-event rank (1..50); the headline
outcome is whether the athlete advanced to the final round (top 30 of the
first round). Records carry the qualification regime: ``before`` the rule
change the top 10 of the standings were prequalified and nominal
qualification ranks sat 10 below the effective pre-event ranks, ``after``
it the two coincide.

CSV schema (comma-separated, UTF-8, header required)::

    athlete_id,event_id,season,regime,qual_rank_nominal,pre_event_rank,
    round1_distance_points,round1_style_points,round1_total,advanced,
    wc_points_before,previous_event_rank,home_event

Empty fields mean missing (allowed only for qual_rank_nominal and
previous_event_rank); regime is ``before`` or ``after``; booleans are 0/1.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy import stats

from .errors import CutoffLabError, InvariantError, ParseError, SchemaError

__all__ = [
    "Regime",
    "JumpRecord",
    "Dataset",
    "CSV_HEADER",
    "load_csv",
    "write_csv",
    "resolve_selector",
    "descriptive_table",
    "group_compare",
    "welch_t",
    "mann_whitney",
]


class Regime(str, enum.Enum):
    BEFORE = "before"
    AFTER = "after"


@dataclass(frozen=True)
class JumpRecord:
    """One athlete-event observation from the first main round."""

    athlete_id: str
    event_id: str
    season: int
    regime: Regime
    qual_rank_nominal: int | None
    pre_event_rank: int
    round1_distance_points: float
    round1_style_points: float
    round1_total: float
    advanced: bool
    wc_points_before: float
    previous_event_rank: int | None
    home_event: bool

    def validate(self) -> None:
        if not 1 <= self.pre_event_rank <= 50:
            raise InvariantError(
                f"pre_event_rank must be in [1, 50], got {self.pre_event_rank}"
            )
        if self.wc_points_before < 0:
            raise InvariantError(
                f"wc_points_before must be >= 0, got {self.wc_points_before}"
            )
        if not 0 <= self.round1_style_points <= 60:
            raise InvariantError(
                f"round1_style_points must be in [0, 60], got {self.round1_style_points}"
            )
        if self.qual_rank_nominal is not None and self.qual_rank_nominal < 1:
            raise InvariantError(
                f"qual_rank_nominal must be >= 1, got {self.qual_rank_nominal}"
            )
        if self.previous_event_rank is not None and self.previous_event_rank < 1:
            raise InvariantError(
                f"previous_event_rank must be >= 1, got {self.previous_event_rank}"
            )
        if self.regime is Regime.BEFORE:
            if (
                self.qual_rank_nominal is not None
                and self.pre_event_rank != self.qual_rank_nominal + 10
            ):
                raise InvariantError(
                    "before the rule change a qualifier's pre_event_rank must be "
                    f"qual_rank_nominal + 10, got {self.pre_event_rank} vs "
                    f"{self.qual_rank_nominal}"
                )
        else:
            if self.qual_rank_nominal is None:
                raise InvariantError(
                    "after the rule change qual_rank_nominal is required"
                )
            if self.pre_event_rank != self.qual_rank_nominal:
                raise InvariantError(
                    "after the rule change pre_event_rank must equal "
                    f"qual_rank_nominal, got {self.pre_event_rank} vs "
                    f"{self.qual_rank_nominal}"
                )


# csv column order: distance/style precede the total
CSV_HEADER = [
    "athlete_id",
    "event_id",
    "season",
    "regime",
    "qual_rank_nominal",
    "pre_event_rank",
    "round1_distance_points",
    "round1_style_points",
    "round1_total",
    "advanced",
    "wc_points_before",
    "previous_event_rank",
    "home_event",
]

#: Fields usable as outcome or covariate selectors by name.
NUMERIC_FIELDS = (
    "pre_event_rank",
    "qual_rank_nominal",
    "round1_distance_points",
    "round1_style_points",
    "round1_total",
    "advanced",
    "wc_points_before",
    "previous_event_rank",
    "home_event",
    "season",
)


class Dataset:
    """Immutable ordered collection of jump records."""

    def __init__(self, records: Iterable[JumpRecord], provenance: str = ""):
        self.records: tuple[JumpRecord, ...] = tuple(records)
        self.provenance = provenance

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[JumpRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.records == other.records

    def filter(self, regime: Regime | str | None = None, predicate=None) -> "Dataset":
        recs = self.records
        if regime is not None:
            regime = Regime(regime)
            recs = tuple(r for r in recs if r.regime is regime)
        if predicate is not None:
            recs = tuple(r for r in recs if predicate(r))
        return Dataset(recs, provenance=self.provenance)

    def column(self, name: str) -> np.ndarray:
        """Field values as a float array, NaN where missing."""
        if name not in NUMERIC_FIELDS:
            raise KeyError(f"unknown numeric field {name!r}")
        out = np.empty(len(self.records))
        for i, rec in enumerate(self.records):
            v = getattr(rec, name)
            out[i] = np.nan if v is None else float(v)
        return out

    def by_event(self) -> dict[tuple[int, str], list[JumpRecord]]:
        groups: dict[tuple[int, str], list[JumpRecord]] = {}
        for rec in self.records:
            groups.setdefault((rec.season, rec.event_id), []).append(rec)
        return groups


Selector = str | Callable[[JumpRecord], float | None]


def resolve_selector(selector: Selector) -> Callable[[JumpRecord], float | None]:
    """Turn a field name or callable into a record -> value function."""
    if callable(selector):
        return selector
    if selector not in NUMERIC_FIELDS:
        raise KeyError(f"unknown field {selector!r}; expected one of {NUMERIC_FIELDS}")
    name = selector

    def getter(rec: JumpRecord) -> float | None:
        v = getattr(rec, name)
        return None if v is None else float(v)

    return getter


def selector_values(ds_or_records, selector: Selector) -> np.ndarray:
    """Selector values over records as a float array, NaN where missing."""
    get = resolve_selector(selector)
    recs = ds_or_records.records if isinstance(ds_or_records, Dataset) else ds_or_records
    out = np.empty(len(recs))
    for i, rec in enumerate(recs):
        v = get(rec)
        out[i] = np.nan if v is None else v
    return out


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_int(text: str, field: str, row: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"row {row}: field {field!r} is not an integer: {text!r}")


def _parse_float(text: str, field: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: field {field!r} is not a number: {text!r}")
    if math.isnan(value) or math.isinf(value):
        raise ParseError(f"row {row}: field {field!r} is not finite: {text!r}")
    return value


def _parse_bool(text: str, field: str, row: int) -> bool:
    if text == "0":
        return False
    if text == "1":
        return True
    raise ParseError(f"row {row}: field {field!r} must be 0 or 1, got {text!r}")


def load_csv(path: str | Path, provenance: str | None = None) -> Dataset:
    """Read and validate a dataset CSV.

    Raises SchemaError for a wrong header, ParseError for a malformed field,
    InvariantError for a value outside its documented range; every message
    names the offending 1-based data row. Missing optional fields stay
    missing (they are never imputed).
    """
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        if header != CSV_HEADER:
            missing = set(CSV_HEADER) - set(header)
            extra = set(header) - set(CSV_HEADER)
            raise SchemaError(
                f"{path}: header mismatch (missing columns: {sorted(missing)}, "
                f"unexpected: {sorted(extra)})"
            )
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != len(CSV_HEADER):
                raise ParseError(
                    f"row {row_idx}: expected {len(CSV_HEADER)} fields, got {len(row)}"
                )
            vals = dict(zip(CSV_HEADER, row))
            try:
                regime = Regime(vals["regime"])
            except ValueError:
                raise ParseError(
                    f"row {row_idx}: regime must be 'before' or 'after', "
                    f"got {vals['regime']!r}"
                )
            rec = JumpRecord(
                athlete_id=vals["athlete_id"],
                event_id=vals["event_id"],
                season=_parse_int(vals["season"], "season", row_idx),
                regime=regime,
                qual_rank_nominal=(
                    None
                    if vals["qual_rank_nominal"] == ""
                    else _parse_int(vals["qual_rank_nominal"], "qual_rank_nominal", row_idx)
                ),
                pre_event_rank=_parse_int(vals["pre_event_rank"], "pre_event_rank", row_idx),
                round1_distance_points=_parse_float(
                    vals["round1_distance_points"], "round1_distance_points", row_idx
                ),
                round1_style_points=_parse_float(
                    vals["round1_style_points"], "round1_style_points", row_idx
                ),
                round1_total=_parse_float(vals["round1_total"], "round1_total", row_idx),
                advanced=_parse_bool(vals["advanced"], "advanced", row_idx),
                wc_points_before=_parse_float(
                    vals["wc_points_before"], "wc_points_before", row_idx
                ),
                previous_event_rank=(
                    None
                    if vals["previous_event_rank"] == ""
                    else _parse_int(vals["previous_event_rank"], "previous_event_rank", row_idx)
                ),
                home_event=_parse_bool(vals["home_event"], "home_event", row_idx),
            )
            try:
                rec.validate()
            except InvariantError as err:
                raise InvariantError(f"row {row_idx}: {err}") from None
            records.append(rec)
    return Dataset(records, provenance=provenance or str(path))


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Regime):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset in the documented schema; round-trips via load_csv."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in ds.records:
            writer.writerow([_format_field(getattr(rec, name)) for name in CSV_HEADER])


# ---------------------------------------------------------------------------
# Descriptive and comparison statistics


def _summary(values: np.ndarray) -> dict:
    values = values[~np.isnan(values)]
    n = values.size
    if n == 0:
        return {"n": 0, "mean": math.nan, "sd": math.nan, "min": math.nan, "max": math.nan}
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0  # single value: SD 0
    return {
        "n": n,
        "mean": float(np.mean(values)),
        "sd": sd,
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }


DESCRIPTIVE_VARIABLES = (
    "advanced",
    "pre_event_rank",
    "round1_distance_points",
    "round1_style_points",
    "round1_total",
    "wc_points_before",
    "previous_event_rank",
    "home_event",
)


def descriptive_table(ds: Dataset) -> dict:
    """Per-regime mean/SD/min/max for each variable plus advancement share."""
    if len(ds) == 0:
        raise CutoffLabError("descriptive_table requires a nonempty dataset")
    out: dict = {}
    for regime in Regime:
        sub = ds.filter(regime=regime)
        if len(sub) == 0:
            continue
        variables = {name: _summary(sub.column(name)) for name in DESCRIPTIVE_VARIABLES}
        out[regime.value] = {
            "n": len(sub),
            "variables": variables,
            "advancement_share": variables["advanced"]["mean"],
        }
    return out


def welch_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Welch unequal-variance t-test; returns (t, df, two-sided p).

    Degenerate convention: when both samples have zero variance the test
    reports p = 1 for equal means and p = 0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise CutoffLabError("welch_t requires nonempty samples")
    va = a.var(ddof=1) if a.size > 1 else 0.0
    vb = b.var(ddof=1) if b.size > 1 else 0.0
    qa, qb = va / a.size, vb / b.size
    if qa + qb == 0.0:
        equal = np.isclose(a.mean(), b.mean())
        return 0.0, math.nan, 1.0 if equal else 0.0
    t = (a.mean() - b.mean()) / math.sqrt(qa + qb)
    df_den = 0.0
    if a.size > 1:
        df_den += qa**2 / (a.size - 1)
    if b.size > 1:
        df_den += qb**2 / (b.size - 1)
    df = (qa + qb) ** 2 / df_den
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return float(t), float(df), p


def group_compare(ds: Dataset, outcome: Selector, bin_width: int = 5) -> list[dict]:
    """Compare an outcome across regimes within pre-event-rank bins.

    Returns one row per rank bin {1..bin_width, ...} with per-regime means
    and SDs, the before-minus-after difference, and a two-sided Welch p.
    Bins empty in either regime are flagged rather than fatal.
    """
    before = ds.filter(regime=Regime.BEFORE)
    after = ds.filter(regime=Regime.AFTER)
    if len(before) == 0 or len(after) == 0:
        raise CutoffLabError("group_compare requires observations in both regimes")

    def bin_values(sub: Dataset, lo: int, hi: int) -> np.ndarray:
        recs = [r for r in sub if lo <= r.pre_event_rank <= hi]
        vals = selector_values(recs, outcome)
        return vals[~np.isnan(vals)]

    rows = []
    for lo in range(1, 51, bin_width):
        hi = min(lo + bin_width - 1, 50)
        va = bin_values(before, lo, hi)
        vb = bin_values(after, lo, hi)
        row: dict = {"bin": f"{lo}-{hi}", "lo": lo, "hi": hi}
        if va.size == 0 or vb.size == 0:
            row.update(
                flagged=True, n_before=int(va.size), n_after=int(vb.size),
                mean_before=math.nan, sd_before=math.nan,
                mean_after=math.nan, sd_after=math.nan,
                difference=math.nan, p_value=math.nan,
            )
        else:
            sa = _summary(va)
            sb = _summary(vb)
            _, _, p = welch_t(va, vb)
            row.update(
                flagged=False, n_before=sa["n"], n_after=sb["n"],
                mean_before=sa["mean"], sd_before=sa["sd"],
                mean_after=sb["mean"], sd_after=sb["sd"],
                difference=sa["mean"] - sb["mean"], p_value=p,
            )
        rows.append(row)
    return rows


def mann_whitney(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Rank-sum test via the normal approximation; returns (z, two-sided p).

    The z statistic uses the tie-corrected variance and no continuity
    correction; z > 0 means sample_a tends to exceed sample_b. When the
    pooled data are constant the test degenerates to z = 0, p = 1.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise CutoffLabError("mann_whitney requires nonempty samples")
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = stats.rankdata(pooled)
    u1 = float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)

    n = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 0.0, 1.0
    z = (u1 - n1 * n2 / 2.0) / math.sqrt(var)
    p = 2.0 * float(stats.norm.sf(abs(z)))
    return float(z), p
