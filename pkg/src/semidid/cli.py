"""Command-line entry point: estimate, placebo, describe, simulate, make-data."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .atet import estimate_atet
from .core import DesignConfig
from .dgp import SimConfig, monte_carlo, simulate_survey, write_survey_csv
from .inference import bootstrap_inference
from .propensity import overlap_diagnostics
from .report import descriptives, results_table, summary_rows_text
from .survey import (DESCRIPTIVE_ORDER, LABELS, COVARIATES, DEFAULT_MISSING, StudyDesign,
                     VariableMapping, apply_design, load_table)

log = logging.getLogger("semidid")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class RunManifest:
    command: str
    configuration: dict
    input_digest: str | None
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass
class StudyConfig:
    design: StudyDesign
    mapping: VariableMapping
    delimiter: str = ","
    missing: tuple = DEFAULT_MISSING
    estimation: dict | None = None


def load_config(path) -> StudyConfig:
    """Read the YAML study configuration (design, columns, outcomes, input)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if "design" not in raw:
        raise ValueError("configuration needs a 'design' section")
    d = raw["design"]
    design = StudyDesign(str(d["treatment_country"]), str(d["control_country"]),
                         int(d["pre_year"]), int(d["post_year"]),
                         None if d.get("policy_year") is None else int(d["policy_year"]))
    inp = raw.get("input", {}) or {}
    mapping = VariableMapping.from_dict(raw.get("columns"), raw.get("outcomes"),
                                        inp.get("height_unit", "m"))
    missing = tuple(str(m) for m in inp.get("missing", DEFAULT_MISSING))
    return StudyConfig(design, mapping, inp.get("delimiter", ","), missing,
                       raw.get("estimation") or {})


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _trim_arg(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 0.5:
        raise argparse.ArgumentTypeError(f"trim threshold must lie in [0, 0.5), got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _overlap_text(label: str, diag: dict) -> str:
    lines = [f"Overlap diagnostics: {label}",
             f"threshold {diag['threshold']:.4f}  pi_hat {diag['pi_hat']:.4f}  "
             f"support_warning {diag['support_warning']}"]
    for cell, s in diag["cells"].items():
        q = s["quantiles"]
        lines.append(f"rho{cell[0]}{cell[1]}  min {s['min']:.4f}  p05 {q[0.05]:.4f}  "
                     f"median {q[0.5]:.4f}  p95 {q[0.95]:.4f}  max {s['max']:.4f}  "
                     f"trimmed {s['trimmed_share']:.4f}")
    lines.append(f"sum of rho  min {diag['rho_sum']['min']:.4f}  max {diag['rho_sum']['max']:.4f}")
    return "\n".join(lines) + "\n"


def _design_config(args, est_defaults: dict, outcome_label: str) -> DesignConfig:
    def pick(flag, key, default):
        value = getattr(args, flag)
        return est_defaults.get(key, default) if value is None else value
    return DesignConfig(
        outcome_name=outcome_label,
        covariate_names=COVARIATES,
        trim_threshold=pick("trim", "trim", 0.05),
        bootstrap_reps=pick("bootstrap", "bootstrap", 1999),
        cluster_by=pick("cluster", "cluster", None),
        seed=pick("seed", "seed", 0),
        normalize=bool(args.normalize or est_defaults.get("normalize", False)),
        n_jobs=args.jobs,
    )


def _result_settings(cfg: DesignConfig) -> dict:
    # worker count does not change any output, so it stays out of the manifest
    out = asdict(cfg)
    out.pop("n_jobs")
    return out


def _estimation_run(args, command: str, design: StudyDesign, caption: str) -> int:
    study = _stage("config", load_config, args.config)
    records = _stage("ingest", load_table, args.input, study.mapping, study.delimiter,
                     study.missing)
    outcomes = args.outcome or list(study.mapping.outcomes)
    unknown = [o for o in outcomes if o not in study.mapping.outcomes]
    if unknown:
        raise StageError("config", f"unknown outcome(s) {unknown}; configured: "
                                   f"{list(study.mapping.outcomes)}")
    out_dir = Path(args.out_dir)
    rows, resolved = [], {}
    overlap = []
    for key in outcomes:
        label = study.mapping.outcomes[key].label
        cfg = _design_config(args, study.estimation, label)
        resolved[key] = _result_settings(cfg)
        ds, report = _stage("design", apply_design, records, design, key, study.mapping,
                            cfg.cluster_by or "school_year")
        log.info("%s: %d rows retained of %d (%d missing outcome, %d child, %d household)",
                 key, report.retained, report.input_rows, report.missing_outcome,
                 report.missing_child, report.missing_household)
        point = _stage("estimate", estimate_atet, ds, cfg)
        log.info("%s: effect %.4f, %d rows trimmed", key, point.effect,
                 point.trim_report.dropped_count)
        res = _stage("bootstrap", bootstrap_inference, ds, cfg, point)
        rows.append((label, res))
        diag = overlap_diagnostics(point.propensity, cfg.trim_threshold, cfg.trim_rule)
        if diag["support_warning"]:
            log.warning("%s: more than 5%% of treated-post rows fall outside common support", key)
        overlap.append(_overlap_text(label, diag))
    manifest = RunManifest(command, {"design": asdict(design), "mapping": asdict(study.mapping),
                                     "estimation": resolved},
                           file_digest(args.input))
    table = _stage("render", results_table, {caption: rows}, p_decimals=args.p_decimals)
    table.manifest = manifest.digest
    _write(out_dir, f"{command}_results.txt", table.render_text())
    _write(out_dir, f"{command}_results.csv", table.to_csv())
    _write(out_dir, f"{command}_overlap.txt", "\n".join(overlap))
    _write(out_dir, f"{command}_manifest.json", manifest.to_json())
    sys.stdout.write(table.render_text())
    return 0


def cmd_estimate(args) -> int:
    study = _stage("config", load_config, args.config)
    d = study.design
    if args.control_country:
        # robustness rerun against an alternative control group
        d = _stage("config", replace, d, control_country=args.control_country)
    return _estimation_run(args, "estimate", d,
                           f"Panel: {d.treatment_country} and {d.control_country}")


def cmd_placebo(args) -> int:
    study = _stage("config", load_config, args.config)
    d = study.design
    policy = args.policy_year if args.policy_year is not None else d.policy_year
    if policy is None:
        raise StageError("config", "placebo needs the policy year (--policy-year or design.policy_year)")
    if args.fake_post_year >= policy:
        raise StageError("config", f"fake post year {args.fake_post_year} is not before the "
                                   f"policy year {policy}")
    if args.pre_year >= args.fake_post_year:
        raise StageError("config", "--pre-year must precede --fake-post-year")
    fake = StudyDesign(d.treatment_country, d.control_country, args.pre_year,
                       args.fake_post_year, policy)
    return _estimation_run(args, "placebo", fake,
                           f"Panel: {d.treatment_country} and {d.control_country} "
                           f"(fake treatment {args.pre_year} vs {args.fake_post_year})")


def cmd_describe(args) -> int:
    study = _stage("config", load_config, args.config)
    records = _stage("ingest", load_table, args.input, study.mapping, study.delimiter,
                     study.missing)
    keys = list(study.mapping.outcomes)
    ds, report = _stage("design", apply_design, records, study.design, keys[0], study.mapping,
                        None, keys[1:])
    kept_rows = set(ds.unit_id.tolist())
    kept = [r for r in records if r["row"] in kept_rows]
    years = np.array([r["year"] for r in kept], dtype=float)
    extra_outcomes = {study.mapping.outcomes[k].label: np.array([r[k] for r in kept], float)
                      for k in keys[1:]}
    order = [COVARIATES.index(k) for k in DESCRIPTIVE_ORDER]
    ordered = ds.__class__(ds.outcome, ds.treated, ds.post, ds.covariates[:, order],
                           tuple(DESCRIPTIVE_ORDER), None, ds.unit_id, ds.outcome_name)
    table = _stage("render", descriptives, ordered, LABELS, {"Year": years}, extra_outcomes)
    d = study.design
    table.caption = f"Descriptive statistics: {d.treatment_country} (treated) and " \
                    f"{d.control_country} (non-treated)"
    manifest = RunManifest("describe", {"design": asdict(d), "mapping": asdict(study.mapping)},
                           file_digest(args.input))
    table.manifest = manifest.digest
    out_dir = Path(args.out_dir)
    _write(out_dir, "describe_descriptives.txt", table.render_text())
    _write(out_dir, "describe_descriptives.csv", table.to_csv())
    _write(out_dir, "describe_manifest.json", manifest.to_json())
    sys.stdout.write(table.render_text())
    return 0


def cmd_simulate(args) -> int:
    if args.reps < 50:
        raise StageError("config", f"replications ≥ 50 required, got {args.reps}")
    sim = _stage("config", SimConfig, n=args.n, true_atet=args.tau,
                 covariate_count=args.covariates, selection_strength=args.selection,
                 trend_violation=args.trend_violation, anticipation=args.anticipation,
                 seed=args.seed, link=args.link, window=args.window)
    design = DesignConfig(trim_threshold=args.trim, bootstrap_reps=args.bootstrap,
                          normalize=args.normalize, n_jobs=args.jobs)
    summary = _stage("simulate", monte_carlo, sim, args.reps, design)
    manifest = RunManifest("simulate", {"sim": asdict(sim), "estimation": _result_settings(design)},
                           None)
    text = summary_rows_text(summary.as_rows(), "Monte Carlo summary") + \
        f"Manifest: {manifest.digest}\n"
    csv_lines = ["statistic,value"] + [f"{k},{v!r}" for k, v in summary.as_rows()]
    csv_lines.append(f"# manifest: {manifest.digest}")
    out_dir = Path(args.out_dir)
    _write(out_dir, "simulate_summary.txt", text)
    _write(out_dir, "simulate_summary.csv", "\n".join(csv_lines) + "\n")
    _write(out_dir, "simulate_manifest.json", manifest.to_json())
    sys.stdout.write(text)
    return 0


def cmd_make_data(args) -> int:
    rows = simulate_survey(n_per_cell=args.n_per_cell, tau=args.tau, seed=args.seed,
                           trend_violation=args.trend_violation, missing_rate=args.missing_rate)
    write_survey_csv(args.output, rows, "\t" if args.tab else ",")
    log.info("wrote %d rows to %s", len(rows), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semidid", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def estimation_flags(sp):
        sp.add_argument("--input", required=True)
        sp.add_argument("--config", required=True)
        sp.add_argument("--outcome", action="append", help="outcome key (repeatable)")
        sp.add_argument("--trim", type=_trim_arg, default=None, help="default 0.05")
        sp.add_argument("--bootstrap", type=_positive_int, default=None, help="default 1999")
        sp.add_argument("--cluster", default=None, help="e.g. school_year")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--normalize", action="store_true",
                        help="normalise weights within each cell")
        sp.add_argument("--jobs", type=_positive_int, default=1)
        sp.add_argument("--p-decimals", type=int, default=4)
        sp.add_argument("--out-dir", default="out")

    est = sub.add_parser("estimate", help="IPW DiD effects with bootstrap inference")
    estimation_flags(est)
    est.add_argument("--control-country", default=None,
                     help="override the configured control country")
    est.set_defaults(func=cmd_estimate)

    pla = sub.add_parser("placebo", help="fake treatment between two pre-policy years")
    estimation_flags(pla)
    pla.add_argument("--pre-year", type=int, required=True)
    pla.add_argument("--fake-post-year", type=int, required=True)
    pla.add_argument("--policy-year", type=int, default=None)
    pla.set_defaults(func=cmd_placebo)

    des = sub.add_parser("describe", help="two-group descriptive statistics")
    des.add_argument("--input", required=True)
    des.add_argument("--config", required=True)
    des.add_argument("--out-dir", default="out")
    des.set_defaults(func=cmd_describe)

    sim = sub.add_parser("simulate", help="Monte Carlo study on synthetic data")
    sim.add_argument("--n", type=int, default=4000)
    sim.add_argument("--tau", type=float, default=1.0)
    sim.add_argument("--reps", type=int, default=300)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--covariates", type=int, default=3)
    sim.add_argument("--selection", type=float, default=0.5)
    sim.add_argument("--trend-violation", type=float, default=0.0)
    sim.add_argument("--anticipation", type=float, default=0.0)
    sim.add_argument("--link", choices=("logit", "probit"), default="logit")
    sim.add_argument("--window", choices=("main", "placebo"), default="main")
    sim.add_argument("--trim", type=_trim_arg, default=0.05)
    sim.add_argument("--bootstrap", type=_positive_int, default=199)
    sim.add_argument("--normalize", action="store_true")
    sim.add_argument("--jobs", type=_positive_int, default=1)
    sim.add_argument("--out-dir", default="out")
    sim.set_defaults(func=cmd_simulate)

    mk = sub.add_parser("make-data", help="write a synthetic survey extract")
    mk.add_argument("--output", required=True)
    mk.add_argument("--n-per-cell", type=int, default=1500)
    mk.add_argument("--tau", type=float, default=1.0)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--trend-violation", type=float, default=0.0)
    mk.add_argument("--missing-rate", type=float, default=0.02)
    mk.add_argument("--tab", action="store_true")
    mk.set_defaults(func=cmd_make_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
