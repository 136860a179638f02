"""Repeated cross-section data model for the two-group, two-period design.

Each row is one survey respondent observed once: an outcome, a treatment-group
flag ``D``, a period flag ``T``, a covariate vector and an optional cluster
label. Potential outcomes are never stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

CELLS: tuple[tuple[int, int], ...] = ((1, 1), (1, 0), (0, 1), (0, 0))


class ValidationError(ValueError):
    """A record violates the field-level contract (types, domains, missing fields)."""


class DesignError(ValueError):
    """The data cannot support the 2x2 design (e.g. an empty (d, t) cell)."""


@dataclass(frozen=True)
class Observation:
    outcome: float
    treated: int
    post: int
    covariates: tuple[float, ...] = ()
    cluster_id: Any = None
    unit_id: Any = None


@dataclass(frozen=True)
class DesignConfig:
    """Estimation settings shared by the point estimate and the bootstrap.

    ``trim_rule`` selects which propensities are compared with the threshold:
    ``"symmetric"`` also drops treated-post rows with a small rho_11, while
    ``"denominators"`` only checks the probabilities that appear in a weight
    denominator. ``normalize`` switches to within-cell normalised weights.
    """

    outcome_name: str = "y"
    covariate_names: tuple[str, ...] = ()
    trim_threshold: float = 0.05
    bootstrap_reps: int = 1999
    cluster_by: str | None = None
    seed: int = 0
    trim_rule: str = "symmetric"
    normalize: bool = False
    refit_after_trim: bool = False
    ci_method: str = "normal"
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if not 0.0 <= self.trim_threshold < 0.5:
            raise ValueError(f"trim_threshold must lie in [0, 0.5), got {self.trim_threshold}")
        if self.bootstrap_reps < 1:
            raise ValueError(f"bootstrap_reps must be >= 1, got {self.bootstrap_reps}")
        if self.trim_rule not in ("symmetric", "denominators"):
            raise ValueError(f"unknown trim_rule {self.trim_rule!r}")
        if self.ci_method not in ("normal", "percentile"):
            raise ValueError(f"unknown ci_method {self.ci_method!r}")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated, immutable collection of observations stored column-wise.

    Use :func:`build_dataset` for record input or :meth:`from_arrays` for
    arrays. The covariate matrix never contains an intercept column.
    """

    outcome: np.ndarray
    treated: np.ndarray
    post: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()
    cluster_id: np.ndarray | None = None
    unit_id: np.ndarray | None = None
    outcome_name: str = "y"
    cell_counts: dict = field(init=False)

    def __post_init__(self):
        y = np.asarray(self.outcome, dtype=float).reshape(-1)
        n = y.shape[0]
        d = _binary_array(self.treated, "treated", n)
        t = _binary_array(self.post, "post", n)
        X = np.asarray(self.covariates, dtype=float)
        if X.size == 0:
            X = np.zeros((n, 0))
        if X.ndim == 1:
            X = X.reshape(n, -1)
        if X.shape[0] != n:
            raise ValidationError(f"covariate matrix has {X.shape[0]} rows, expected {n}")
        names = tuple(self.covariate_names)
        if len(names) != X.shape[1]:
            raise ValidationError(
                f"{len(names)} covariate names given for {X.shape[1]} covariate columns")
        if not np.all(np.isfinite(y)):
            raise ValidationError(f"outcome has missing or non-finite values at rows "
                                  f"{np.flatnonzero(~np.isfinite(y))[:10].tolist()}")
        if not np.all(np.isfinite(X)):
            bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
            raise ValidationError(f"covariates have missing or non-finite values at rows "
                                  f"{bad[:10].tolist()}")
        cl = None if self.cluster_id is None else np.asarray(self.cluster_id, dtype=object)
        if cl is not None and cl.shape[0] != n:
            raise ValidationError("cluster_id length does not match the number of rows")
        uid = np.arange(n) if self.unit_id is None else np.asarray(self.unit_id, dtype=object)
        if uid.shape[0] != n:
            raise ValidationError("unit_id length does not match the number of rows")

        counts = {(dd, tt): int(np.sum((d == dd) & (t == tt))) for dd, tt in CELLS}
        empty = [c for c in ((0, 0), (0, 1), (1, 0), (1, 1)) if counts[c] == 0]
        if empty:
            raise DesignError("; ".join(f"cell {c} empty" for c in empty))

        for arr in (y, d, t, X):
            arr.setflags(write=False)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "treated", d)
        object.__setattr__(self, "post", t)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "cluster_id", cl)
        object.__setattr__(self, "unit_id", uid)
        object.__setattr__(self, "cell_counts", counts)

    @classmethod
    def from_arrays(cls, outcome, treated, post, covariates=None, covariate_names=None,
                    cluster_id=None, unit_id=None, outcome_name="y") -> "Dataset":
        y = np.asarray(outcome, dtype=float).reshape(-1)
        if covariates is None:
            covariates = np.zeros((y.shape[0], 0))
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        if covariate_names is None:
            covariate_names = tuple(f"x{j + 1}" for j in range(covariates.shape[1]))
        return cls(y, treated, post, covariates, tuple(covariate_names), cluster_id,
                   unit_id, outcome_name)

    def __len__(self) -> int:
        return self.outcome.shape[0]

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def observations(self) -> Iterator[Observation]:
        for i in range(self.n):
            yield self.observation(i)

    def observation(self, i: int) -> Observation:
        return Observation(
            outcome=float(self.outcome[i]),
            treated=int(self.treated[i]),
            post=int(self.post[i]),
            covariates=tuple(float(v) for v in self.covariates[i]),
            cluster_id=None if self.cluster_id is None else self.cluster_id[i],
            unit_id=self.unit_id[i],
        )

    def cell_mask(self, d: int, t: int) -> np.ndarray:
        return (self.treated == d) & (self.post == t)

    def subset(self, index) -> "Dataset":
        """Rows selected by an index array or boolean mask (validated again)."""
        idx = np.asarray(index)
        return Dataset(
            self.outcome[idx], self.treated[idx], self.post[idx], self.covariates[idx],
            self.covariate_names,
            None if self.cluster_id is None else self.cluster_id[idx],
            self.unit_id[idx], self.outcome_name)

    def with_outcome(self, outcome) -> "Dataset":
        return Dataset(outcome, self.treated, self.post, self.covariates,
                       self.covariate_names, self.cluster_id, self.unit_id, self.outcome_name)

    def without_covariates(self) -> "Dataset":
        return Dataset(self.outcome, self.treated, self.post, np.zeros((self.n, 0)), (),
                       self.cluster_id, self.unit_id, self.outcome_name)


def _binary_array(values, name: str, n: int) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != (n,):
        raise ValidationError(f"{name} has shape {arr.shape}, expected ({n},)")
    as_float = arr.astype(float)
    bad = ~np.isin(as_float, (0.0, 1.0))
    if bad.any():
        raise ValidationError(
            f"{name} must be 0 or 1; bad values at rows {np.flatnonzero(bad)[:10].tolist()}")
    return as_float.astype(np.int8)


def _field(record: Mapping, keys: Sequence[str], index: int, missing: list):
    for key in keys:
        if key in record:
            value = record[key]
            if value is None or (isinstance(value, float) and math.isnan(value)):
                break
            return value
    missing.append(keys[0])
    return None


def build_dataset(rows: Sequence[Mapping[str, Any]], config: DesignConfig) -> Dataset:
    """Validate tabular records into a :class:`Dataset`.

    Each record must carry the outcome (``config.outcome_name``), the group
    flag (``treated`` or ``D``), the period flag (``post`` or ``T``) and every
    covariate in ``config.covariate_names``. Optional keys ``cluster_id`` (or
    the ``config.cluster_by`` field) and ``unit_id`` are carried along.
    """
    if len(rows) == 0:
        raise DesignError("no records; cells (0, 0), (0, 1), (1, 0), (1, 1) empty")
    names = tuple(config.covariate_names)
    y = np.empty(len(rows))
    d = np.empty(len(rows))
    t = np.empty(len(rows))
    X = np.empty((len(rows), len(names)))
    cluster_key = config.cluster_by or "cluster_id"
    clusters, units = [], []
    for i, rec in enumerate(rows):
        missing: list[str] = []
        yi = _field(rec, (config.outcome_name,), i, missing)
        di = _field(rec, ("treated", "D"), i, missing)
        ti = _field(rec, ("post", "T"), i, missing)
        xi = [_field(rec, (nm,), i, missing) for nm in names]
        if missing:
            raise ValidationError(f"record {i}: missing field(s) {', '.join(missing)}")
        try:
            y[i] = float(yi)
            d[i] = float(di)
            t[i] = float(ti)
            X[i] = [float(v) for v in xi]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"record {i}: non-numeric value ({exc})") from None
        if d[i] not in (0.0, 1.0) or t[i] not in (0.0, 1.0):
            raise ValidationError(f"record {i}: treated/post must be 0 or 1, got ({di}, {ti})")
        clusters.append(rec.get(cluster_key))
        units.append(rec.get("unit_id", i))
    cluster_arr = None if all(c is None for c in clusters) else np.asarray(clusters, dtype=object)
    return Dataset(y, d, t, X, names, cluster_arr, np.asarray(units, dtype=object),
                   config.outcome_name)


def cell_means(ds: Dataset) -> dict[tuple[int, int], float]:
    """Arithmetic mean outcome in each (d, t) cell, keyed by ``(d, t)``."""
    out = {}
    for d, t in CELLS:
        vals = ds.outcome[ds.cell_mask(d, t)]
        out[(d, t)] = math.fsum(vals) / vals.shape[0]
    return out
