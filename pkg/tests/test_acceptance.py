"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``. The Monte Carlo
criteria (2 to 4) take several minutes each on one core.
"""
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from semidid import (CELLS, Dataset, DesignConfig, InferenceResult, SimConfig, bootstrap_inference,
                     estimate_atet, estimate_cell_probabilities, generate, monte_carlo, simple_did,
                     std_normal_cdf, t_test_pvalue, trim)
from semidid.cli import main
from semidid.dgp import derived_seed, simulate_survey, write_survey_csv
from semidid.probit import add_intercept, fit_probit, probit_nll
from semidid.report import BOOTSTRAP_NOTE, RESULT_COLUMNS, results_table

from conftest import ACCEPTANCE_LINES, random_dataset

MC_BOOTSTRAP = 199


def report(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, line


def test_criterion_1_intercept_only_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for k in range(100):
        rng = np.random.default_rng(derived_seed(1, k))
        ds = random_dataset(rng, n=int(rng.integers(12, 2000)), p=0)
        ds = ds.with_outcome(ds.outcome * rng.uniform(0.1, 10) + rng.uniform(-50, 50))
        worst = max(worst, abs(estimate_atet(ds).effect - simple_did(ds)))
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-10 and elapsed < 10,
           f"max |ipw - did| = {worst:.2e} (< 1e-10) over 100 datasets in {elapsed:.1f}s (< 10s)")


def test_criterion_2_oracle_recovery():
    start = time.perf_counter()
    s = monte_carlo(SimConfig(n=4000, true_atet=1.0, selection_strength=0.5, seed=2002), 300,
                    DesignConfig(bootstrap_reps=MC_BOOTSTRAP))
    elapsed = time.perf_counter() - start
    ok = abs(s.bias) < 0.05 and 0.93 <= s.coverage <= 0.97 and elapsed < 600
    report(2, ok, f"bias {s.bias:+.4f} (|.| < 0.05), coverage {s.coverage:.3f} in [0.93, 0.97], "
                  f"mean SE {s.mean_se:.4f} vs empirical SD {s.empirical_sd:.4f}, "
                  f"300 reps B={MC_BOOTSTRAP} in {elapsed:.0f}s (< 600s)")


def test_criterion_3_size_control():
    s = monte_carlo(SimConfig(n=4000, true_atet=0.0, selection_strength=0.5, seed=3003), 300,
                    DesignConfig(bootstrap_reps=MC_BOOTSTRAP))
    report(3, 0.02 <= s.rejection_rate <= 0.09,
           f"rejection rate {s.rejection_rate:.3f} in [0.02, 0.09] over 300 reps, "
           f"bias {s.bias:+.4f}")


def test_criterion_4_placebo():
    design = DesignConfig(bootstrap_reps=99)
    parallel = monte_carlo(SimConfig(n=4000, window="placebo", seed=4004), 200, design)
    violated = monte_carlo(SimConfig(n=4000, window="placebo", trend_violation=0.5, seed=4005),
                           200, design)
    ok = parallel.rejection_rate <= 0.09 and violated.rejection_rate >= 0.50
    report(4, ok, f"placebo rejection {parallel.rejection_rate:.3f} (<= 0.09) under parallel "
                  f"trends, {violated.rejection_rate:.3f} (>= 0.50) with trend_violation=0.5, "
                  f"200 reps each, B=99")


def _fd(f, beta, h=1e-6):
    out = []
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        out.append((f(beta + e) - f(beta - e)) / (2 * h))
    return np.array(out)


def test_criterion_5_probit():
    rng = np.random.default_rng(55)
    X = add_intercept(rng.standard_normal((300, 3)))
    y = (X @ np.array([0.1, 0.7, -0.5, 0.2]) + rng.standard_normal(300) > 0).astype(float)
    g_err = h_err = 0.0
    for _ in range(20):
        beta = rng.normal(0, 0.6, 4)
        _, grad, hess = probit_nll(beta, X, y)
        fd_g = _fd(lambda b: probit_nll(b, X, y)[0], beta)
        fd_h = np.column_stack([_fd(lambda b: probit_nll(b, X, y)[1][j], beta) for j in range(4)])
        g_err = max(g_err, np.max(np.abs(grad - fd_g)) / np.max(np.abs(fd_g)))
        h_err = max(h_err, np.max(np.abs(hess - fd_h)) / np.max(np.abs(fd_h)))

    yi = (rng.random(1000) < 0.3).astype(float)
    target = float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(int(yi.sum())) / 1000 - 1))
    icpt_err = abs(fit_probit(np.zeros((1000, 0)), yi).coefficients[0] - target)

    truth = np.array([0.5, -1.0])
    xs = rng.standard_normal((50_000, 1))
    ys = (add_intercept(xs) @ truth + rng.standard_normal(50_000) > 0).astype(float)
    fit = fit_probit(xs, ys)
    se = np.sqrt(np.diag(np.linalg.inv(probit_nll(fit.coefficients, add_intercept(xs), ys)[2])))
    z = np.abs(fit.coefficients - truth) / se
    ok = g_err < 1e-6 and h_err < 1e-4 and icpt_err < 1e-8 and np.all(z < 3)
    report(5, ok, f"gradient rel err {g_err:.1e} (< 1e-6), Hessian rel err {h_err:.1e} (< 1e-4), "
                  f"intercept err {icpt_err:.1e} (< 1e-8), recovery |z| = "
                  f"{z[0]:.2f}, {z[1]:.2f} (< 3)")


def test_criterion_6_normal_cdf():
    mpmath.mp.dps = 40
    dens = lambda u: mpmath.exp(-u * u / 2) / mpmath.sqrt(2 * mpmath.pi)
    grid = np.linspace(-8.0, 8.0, 1000)
    got = std_normal_cdf(grid)
    err = max(abs(float(mpmath.mpf("0.5") + mpmath.quad(dens, [0, x])) - g)
              for x, g in zip(grid, got))
    report(6, err <= 1e-12, f"max |Phi - quadrature| = {err:.2e} (<= 1e-12) on 1000 points")


def test_criterion_7_trimming():
    mismatches = 0
    monotone = True
    for k in range(30):
        ds, _ = generate(SimConfig(n=1500, selection_strength=0.5 + 0.07 * k, seed=derived_seed(7, k)))
        fit = estimate_cell_probabilities(ds)
        kept = set(trim(ds, fit, 0.05).kept_indices.tolist())
        brute = set()
        for i in range(ds.n):
            r11, r10, r01, r00 = fit.rho[i]
            drop = min(r10, r01, r00) < 0.05 or (ds.treated[i] == 1 and ds.post[i] == 1 and r11 < 0.05)
            if not drop:
                brute.add(i)
        mismatches += len(kept ^ brute)
        previous = None
        for threshold in np.linspace(0, 0.45, 19):
            current = set(trim(ds, fit, threshold).kept_indices.tolist())
            if previous is not None and not current <= previous:
                monotone = False
            previous = current
    report(7, mismatches == 0 and monotone,
           f"{mismatches} rows differ from brute force over 30 fits; monotone in threshold: {monotone}")


def test_criterion_8_determinism(tmp_path):
    data = tmp_path / "survey.csv"
    write_survey_csv(data, simulate_survey(n_per_cell=600, seed=8))
    config = tmp_path / "study.yaml"
    config.write_text("design:\n  treatment_country: Treatland\n  control_country: Controlia\n"
                      "  pre_year: 2010\n  post_year: 2014\n  policy_year: 2011\n")

    def files(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    runs = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / f"est_{name}"
        assert main(["estimate", "--input", str(data), "--config", str(config), "--bootstrap", "59",
                     "--seed", "8", "--out-dir", str(out), "--jobs", str(jobs)]) == 0
        runs.append(files(out))
    sims = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / f"sim_{name}"
        assert main(["simulate", "--n", "400", "--reps", "50", "--bootstrap", "19", "--seed", "8",
                     "--out-dir", str(out), "--jobs", str(jobs)]) == 0
        sims.append(files(out))
    ok = runs[0] == runs[1] == runs[2] and sims[0] == sims[1] == sims[2]
    report(8, ok, "estimate and simulate outputs byte-identical across two serial runs and a "
                  "2-worker run")


def test_criterion_9_table_fidelity():
    res = InferenceResult(0.35, 0.07, t_test_pvalue(0.35, 0.07), (0.2128, 0.4872), 1999, 0, 0,
                          18712, 18712)
    table = results_table([("Frequency of sodas", res)], p_decimals=2)
    text = table.render_text()
    header = [h for h in text.splitlines()[0].split("  ") if h.strip()]
    row = table.rows()[0]
    ok = ([h.strip() for h in header] == ["Effect", "Standard error", "P-value",
                                          "Number of observations"]
          and list(RESULT_COLUMNS) == [h.strip() for h in header]
          and row == ["Frequency of sodas", "0.35", "0.07", "0.00", "18,712"]
          and text.rstrip().endswith(BOOTSTRAP_NOTE))
    report(9, ok, f"row {' | '.join(row)}; footnote '{BOOTSTRAP_NOTE}'")


def test_criterion_10_cluster_bootstrap():
    ds, _ = generate(SimConfig(n=4000, seed=1010))
    labels = np.array([f"u{i}" for i in np.random.default_rng(10).permutation(ds.n)], dtype=object)
    ds = Dataset(ds.outcome, ds.treated, ds.post, ds.covariates, ds.covariate_names, labels)
    iid = bootstrap_inference(ds, DesignConfig(bootstrap_reps=1999, seed=10))
    clustered = bootstrap_inference(ds, DesignConfig(bootstrap_reps=1999, seed=10, cluster_by="u"))
    ratio = clustered.std_error / iid.std_error
    report(10, abs(ratio - 1) <= 0.10,
           f"clustered SE {clustered.std_error:.4f} vs iid SE {iid.std_error:.4f}, "
           f"ratio {ratio:.3f} (within 10%), B=1999")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
