"""Survey extract ingestion: loading, exclusions, BMI and design labelling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .core import Dataset, DesignError

DEFAULT_MISSING = ("", "NA", "-99")

# Estimation covariates, in the order they enter the propensity models.
COVARIATES = ("age", "sex", "tv", "mother_home", "father_home", "cars", "computers",
              "well_off", "bedroom")
CHILD_FIELDS = ("age", "sex", "tv", "bedroom")
HOUSEHOLD_FIELDS = ("computers", "cars", "well_off", "mother_home", "father_home")

LABELS = {
    "year": "Year",
    "sex": "Female (Dummy)",
    "age": "Age (in years)",
    "tv": "TV consumption on a weekday (categorical)",
    "mother_home": "Mother living at main home (Dummy)",
    "father_home": "Father living at main home (Dummy)",
    "cars": "Number of family cars",
    "bedroom": "Own bedroom (Dummy)",
    "computers": "Number of computers per family",
    "well_off": "Family well-off (categorical)",
}
# Row order of the descriptive tables.
DESCRIPTIVE_ORDER = ("sex", "age", "tv", "mother_home", "father_home", "cars", "bedroom",
                     "computers", "well_off")


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeSpec:
    column: str | None
    label: str
    derive_bmi: bool = False


def _default_outcomes():
    return {
        "soda": OutcomeSpec("soda_freq", "Frequency of sodas"),
        "bmi": OutcomeSpec("bmi", "Body Mass Index (BMI)", derive_bmi=True),
    }


@dataclass(frozen=True)
class VariableMapping:
    """Logical variable -> column name in the input file.

    Set a column to ``None`` to leave it unmapped. Only ``school``, ``weight``
    and ``height`` are optional; the BMI outcome falls back to weight/height
    when its own column is unmapped or missing.
    """

    country: str = "country"
    year: str = "year"
    sex: str = "female"
    age: str = "age"
    tv: str = "tv_weekday"
    mother_home: str = "mother_home"
    father_home: str = "father_home"
    cars: str = "family_cars"
    bedroom: str = "own_bedroom"
    computers: str = "computers"
    well_off: str = "family_well_off"
    weight: str | None = "weight_kg"
    height: str | None = "height_m"
    school: str | None = "school_id"
    outcomes: dict = field(default_factory=_default_outcomes)
    height_unit: str = "m"

    def __post_init__(self):
        if self.height_unit not in ("m", "cm"):
            raise ValueError("height_unit must be 'm' or 'cm'")

    @classmethod
    def from_dict(cls, columns: Mapping[str, Any] | None = None,
                  outcomes: Mapping[str, Any] | None = None, height_unit: str = "m"):
        kwargs = dict(columns or {})
        unknown = set(kwargs) - set(cls.__dataclass_fields__) - {"outcomes"}
        if unknown:
            raise ValueError(f"unknown mapping keys: {sorted(unknown)}")
        if outcomes is not None:
            specs = {}
            for key, spec in outcomes.items():
                if isinstance(spec, str):
                    spec = {"column": spec}
                specs[key] = OutcomeSpec(spec.get("column"), spec.get("label", key),
                                         bool(spec.get("derive_bmi", key == "bmi")))
            kwargs["outcomes"] = specs
        return cls(height_unit=height_unit, **kwargs)

    def numeric_fields(self) -> tuple[str, ...]:
        return ("year",) + COVARIATES + ("weight", "height")


@dataclass(frozen=True)
class StudyDesign:
    treatment_country: str
    control_country: str
    pre_year: int
    post_year: int
    policy_year: int | None = None

    def __post_init__(self):
        if self.pre_year >= self.post_year:
            raise ValueError(f"pre_year ({self.pre_year}) must precede post_year ({self.post_year})")
        if self.treatment_country == self.control_country:
            raise ValueError("treatment and control countries must differ")


@dataclass(frozen=True)
class ExclusionReport:
    input_rows: int
    missing_outcome: int
    missing_child: int
    missing_household: int
    retained: int
    outside_design: int = 0

    @property
    def dropped(self) -> int:
        return self.missing_outcome + self.missing_child + self.missing_household


def derive_bmi(weight_kg, height_m) -> float | None:
    """Body-mass index; ``None`` (missing) unless both inputs are positive."""
    if weight_kg is None or height_m is None:
        return None
    if not (weight_kg > 0 and height_m > 0):
        return None
    return weight_kg / height_m ** 2


def _parse(value: str, missing: frozenset, numeric: bool, row: int, column: str):
    value = value.strip()
    if value in missing:
        return None
    if not numeric:
        return value
    try:
        return float(value)
    except ValueError:
        raise IngestError(f"row {row}, column {column!r}: cannot parse {value!r} as a number") from None


def load_table(path, mapping: VariableMapping | None = None, delimiter: str = ",",
               missing: Iterable[str] = DEFAULT_MISSING) -> list[dict]:
    """Read a delimited survey extract into records keyed by logical name.

    Missing values become ``None`` and are listed in the record's
    ``"missing"`` set. A derived ``bmi`` replaces a missing BMI value when
    weight and height are available.
    """
    mapping = mapping or VariableMapping()
    missing = frozenset(m.strip() for m in missing)
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None
    with handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path} is empty; a header row is required") from None
        position = {name: j for j, name in enumerate(header)}

        wanted: dict[str, tuple[str, bool]] = {}
        optional = {"weight", "height", "school"}
        for key in ("country", "school"):
            col = getattr(mapping, key)
            if col is not None:
                wanted[key] = (col, False)
        for key in mapping.numeric_fields():
            col = getattr(mapping, key)
            if col is not None:
                wanted[key] = (col, True)
        for key, spec in mapping.outcomes.items():
            if spec.column is not None and (spec.column in position or not spec.derive_bmi):
                wanted[key] = (spec.column, True)
        absent = [f"{key} (column {col!r})" for key, (col, _) in wanted.items()
                  if col not in position and key not in optional]
        if absent:
            raise IngestError(f"input header lacks mapped column(s): {', '.join(absent)}")
        wanted = {k: v for k, v in wanted.items() if v[0] in position}

        records = []
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            rec: dict[str, Any] = {"row": i}
            for key, (col, numeric) in wanted.items():
                rec[key] = _parse(row[position[col]], missing, numeric, i, col)
            for key, spec in mapping.outcomes.items():
                rec.setdefault(key, None)
                if spec.derive_bmi and rec[key] is None:
                    h = rec.get("height")
                    if h is not None and mapping.height_unit == "cm":
                        h = h / 100.0
                    rec[key] = derive_bmi(rec.get("weight"), h)
            if rec.get("year") is not None:
                rec["year"] = int(rec["year"])
            rec["missing"] = frozenset(k for k, v in rec.items() if v is None)
            records.append(rec)
    return records


def _cluster_label(rec: Mapping, cluster_by: str | None):
    if cluster_by is None:
        return None
    if cluster_by == "school_year":
        if rec.get("school") is None:
            return None
        return f"{rec['school']}|{rec['year']}"
    return rec.get(cluster_by)


def apply_design(records: list[dict], design: StudyDesign, outcome: str = "soda",
                 mapping: VariableMapping | None = None, cluster_by: str | None = "school_year",
                 extra: Iterable[str] = ()) -> tuple[Dataset, ExclusionReport]:
    """Select the two countries and years, apply exclusions and label D/T.

    Rows are dropped, in this order of attribution, for a missing outcome,
    a missing child covariate (age, sex, TV, bedroom) or a missing household
    covariate (computers, car, well-off, mother/father at home). ``extra``
    names further fields that must be present (e.g. the other outcome).
    """
    mapping = mapping or VariableMapping()
    label = mapping.outcomes[outcome].label if outcome in mapping.outcomes else outcome
    countries = {design.treatment_country: 1, design.control_country: 0}
    years = {design.pre_year: 0, design.post_year: 1}
    kept, n_in, n_out = [], 0, 0
    drops = {"outcome": 0, "child": 0, "household": 0}
    required_extra = tuple(extra)
    for rec in records:
        if rec.get("country") not in countries or rec.get("year") not in years:
            n_out += 1
            continue
        n_in += 1
        if rec.get(outcome) is None or any(rec.get(k) is None for k in required_extra):
            drops["outcome"] += 1
        elif any(rec.get(k) is None for k in CHILD_FIELDS):
            drops["child"] += 1
        elif any(rec.get(k) is None for k in HOUSEHOLD_FIELDS):
            drops["household"] += 1
        else:
            kept.append(rec)
    report = ExclusionReport(n_in, drops["outcome"], drops["child"], drops["household"],
                             len(kept), n_out)
    if not kept:
        raise DesignError("no rows left after applying the design; all cells empty")
    y = np.array([r[outcome] for r in kept], dtype=float)
    d = np.array([countries[r["country"]] for r in kept])
    t = np.array([years[r["year"]] for r in kept])
    X = np.array([[r[k] for k in COVARIATES] for r in kept], dtype=float)
    clusters = [_cluster_label(r, cluster_by) for r in kept]
    cl = None if cluster_by is None else np.asarray(clusters, dtype=object)
    if cl is not None and any(c is None for c in clusters):
        raise IngestError(f"cluster field {cluster_by!r} is missing for some retained rows")
    ds = Dataset(y, d, t, X, COVARIATES, cl, np.array([r["row"] for r in kept]), label)
    return ds, report
