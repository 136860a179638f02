"""Descriptive-statistics and results tables in the two-group report layout."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .core import Dataset
from .inference import InferenceResult

RESULT_COLUMNS = ("Effect", "Standard error", "P-value", "Number of observations")
DESCRIPTIVE_COLUMNS = ("mean", "std.dev", "mean", "std.dev", "mean difference", "p-value")
BOOTSTRAP_NOTE = "Note: Standard errors are estimated by bootstrap."
CLUSTER_NOTE = "Note: Bootstrapped and clustered standard errors."


def welch_pvalue(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided unequal-variance t-test p-value, with degenerate cases pinned."""
    if a.shape[0] < 2 or b.shape[0] < 2:
        return float("nan")
    if a.mean() == b.mean():
        return 1.0
    if a.var() == 0 and b.var() == 0:
        return 0.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


@dataclass
class DescriptiveRow:
    label: str
    mean_treated: float
    sd_treated: float
    mean_control: float
    sd_control: float
    difference: float
    p_value: float


@dataclass
class DescriptiveTable:
    sections: list  # (section title or None, [DescriptiveRow])
    n_treated: int
    n_control: int
    caption: str | None = None
    source: str | None = None
    manifest: str | None = None

    @property
    def rows(self) -> list[DescriptiveRow]:
        return [r for _, rows in self.sections for r in rows]

    def row(self, label: str) -> DescriptiveRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def cells(self) -> list[list[str]]:
        out = []
        for title, rows in self.sections:
            if title:
                out.append([title, "", "", "", "", "", ""])
            for r in rows:
                out.append([r.label] + [f"{v:.2f}" for v in (
                    r.mean_treated, r.sd_treated, r.mean_control, r.sd_control,
                    r.difference, r.p_value)])
        out.append(["Number of observations", f"{self.n_treated:,}", "", f"{self.n_control:,}",
                    "", "", ""])
        return out

    def render_text(self) -> str:
        header = ["", "Treated", "", "Non-treated", "", "", ""]
        sub = [""] + list(DESCRIPTIVE_COLUMNS)
        lines = _aligned([header, sub] + self.cells())
        if self.caption:
            lines.insert(0, self.caption)
        if self.source:
            lines.append(self.source)
        if self.manifest:
            lines.append(f"Manifest: {self.manifest}")
        return "\n".join(lines) + "\n"

    def to_csv(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(["variable", "treated_mean", "treated_sd", "control_mean", "control_sd",
                    "mean_difference", "p_value"])
        for r in self.rows:
            w.writerow([r.label] + [repr(float(v)) for v in (
                r.mean_treated, r.sd_treated, r.mean_control, r.sd_control, r.difference,
                r.p_value)])
        w.writerow(["n_observations", self.n_treated, "", self.n_control, "", "", ""])
        if self.manifest:
            w.writerow([f"# manifest: {self.manifest}"])
        return buf.getvalue()


def _describe(label: str, values: np.ndarray, treated: np.ndarray) -> DescriptiveRow:
    a = values[treated == 1]
    b = values[treated == 0]
    return DescriptiveRow(label, float(a.mean()), float(a.std(ddof=1)), float(b.mean()),
                          float(b.std(ddof=1)), float(a.mean() - b.mean()), welch_pvalue(a, b))


def descriptives(ds: Dataset, labels: Mapping[str, str] | None = None,
                 extra: Mapping[str, np.ndarray] | None = None,
                 extra_outcomes: Mapping[str, np.ndarray] | None = None) -> DescriptiveTable:
    """Means, standard deviations, differences and Welch p-values by group.

    Covariates come from ``ds`` (relabelled through ``labels``); ``extra``
    columns (e.g. survey year) form a leading "Time" section and the outcome
    plus any ``extra_outcomes`` form the closing section.
    """
    labels = labels or {}
    d = ds.treated
    sections = []
    if extra:
        sections.append(("Time", [_describe(k, np.asarray(v, float), d) for k, v in extra.items()]))
    cov_rows = [_describe(labels.get(name, name), ds.covariates[:, j], d)
                for j, name in enumerate(ds.covariate_names)]
    if cov_rows:
        sections.append(("Control variables", cov_rows))
    outcome_rows = [_describe(ds.outcome_name, ds.outcome, d)]
    for k, v in (extra_outcomes or {}).items():
        outcome_rows.append(_describe(k, np.asarray(v, float), d))
    sections.append(("Outcome variables", outcome_rows))
    return DescriptiveTable(sections, int(np.sum(d == 1)), int(np.sum(d == 0)))


def format_pvalue(p: float, std_error: float, decimals: int = 4) -> str:
    """Fixed-decimal p-value; a positive p that would print as zero shows as "<0.0001".

    At fewer than four decimals the plain rounded value is printed, matching
    conventional two-decimal tables.
    """
    text = f"{p:.{decimals}f}"
    if decimals >= 4 and p > 0 and std_error > 0 and float(text) == 0.0:
        return "<" + f"{10.0 ** -decimals:.{decimals}f}"
    return text


@dataclass
class ResultsTable:
    panels: list  # (caption or None, [(label, InferenceResult)])
    footnote: str = BOOTSTRAP_NOTE
    caption: str | None = None
    p_decimals: int = 4
    manifest: str | None = None

    def row_cells(self, label: str, res: InferenceResult) -> list[str]:
        return [label, f"{res.effect:.2f}", f"{res.std_error:.2f}",
                format_pvalue(res.p_value, res.std_error, self.p_decimals), f"{res.n_obs:,}"]

    def rows(self) -> list[list[str]]:
        return [self.row_cells(lbl, res) for _, rows in self.panels for lbl, res in rows]

    def render_text(self) -> str:
        lines = [self.caption] if self.caption else []
        for k, (caption, rows) in enumerate(self.panels):
            if k:
                lines.append("")
            if caption:
                lines.append(caption)
            body = [[""] + list(RESULT_COLUMNS)] + [self.row_cells(l, r) for l, r in rows]
            lines.extend(_aligned(body))
        lines.append(self.footnote)
        if self.manifest:
            lines.append(f"Manifest: {self.manifest}")
        return "\n".join(lines) + "\n"

    def to_csv(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        w.writerow(["panel", "outcome"] + list(RESULT_COLUMNS) + ["CI low", "CI high"])
        for caption, rows in self.panels:
            for label, res in rows:
                w.writerow([caption or "", label, repr(res.effect), repr(res.std_error),
                            repr(res.p_value), res.n_obs, repr(res.ci95[0]), repr(res.ci95[1])])
        w.writerow([f"# {self.footnote}"])
        if self.manifest:
            w.writerow([f"# manifest: {self.manifest}"])
        return buf.getvalue()


def results_table(results, caption: str | None = None, clustered: bool | None = None,
                  p_decimals: int = 4) -> ResultsTable:
    """Effect, standard error, p-value and sample size, one row per outcome.

    ``results`` is a sequence of ``(label, InferenceResult)`` pairs, or a
    mapping from panel caption to such a sequence. The footnote switches to
    the clustered wording when any result used a cluster bootstrap.
    """
    if isinstance(results, Mapping):
        panels = [(cap, list(rows)) for cap, rows in results.items()]
    else:
        panels = [(None, list(results))]
    if not panels or any(not rows for _, rows in panels):
        raise ValueError("results_table needs at least one result per panel")
    if clustered is None:
        clustered = any(res.clustered for _, rows in panels for _, res in rows)
    return ResultsTable(panels, CLUSTER_NOTE if clustered else BOOTSTRAP_NOTE, caption, p_decimals)


def _aligned(rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return lines


def summary_rows_text(rows: Sequence[tuple[str, float]], title: str | None = None) -> str:
    body = [[k, _fmt(v)] for k, v in rows]
    lines = ([title] if title else []) + _aligned([["statistic", "value"]] + body)
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.4f}"
