"""Synthetic repeated cross-sections with a known treatment effect.

Periods are indexed 0 (early pre), 1 (pre) and 2 (post). The ``"main"``
window compares periods 1 and 2; the ``"placebo"`` window compares 0 and 1,
where the true effect is zero. Outcomes follow

    Y = a*D + g*k + tau*D*1{k=2} + X'beta + trend*D*k + antic*D*1{k=1} + e

so a non-zero ``trend_violation`` breaks parallel trends and a non-zero
``anticipation`` shifts the treated group just before the policy.

Cells are assigned by the argmax of four latent utilities whose systematic
parts are linear in X, scaled by ``selection_strength``. With Gumbel noise
(``link="logit"``, the default) the cell log-odds are linear in X; Gaussian
noise (``link="probit"``) gives a multinomial probit, which the four binary
probits of the estimator fit noticeably worse and serves as a stress case.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .atet import estimate_atet
from .core import CELLS, Dataset, DesignConfig, DesignError
from .inference import bootstrap_inference

OUTCOME_BETA = 0.3
MAX_REGENERATIONS = 10


@dataclass(frozen=True)
class SimConfig:
    n: int = 4000
    true_atet: float = 1.0
    group_effect: float = 0.5
    time_effect: float = 0.3
    covariate_count: int = 3
    selection_strength: float = 0.5
    noise_sd: float = 1.0
    trend_violation: float = 0.0
    anticipation: float = 0.0
    seed: int = 0
    link: str = "logit"
    window: str = "main"

    def __post_init__(self):
        if self.n < 40:
            raise ValueError(f"n must be >= 40, got {self.n}")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.covariate_count < 0:
            raise ValueError("covariate_count must be >= 0")
        if self.link not in ("probit", "logit"):
            raise ValueError(f"unknown link {self.link!r}")
        if self.window not in ("main", "placebo"):
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def estimand(self) -> float:
        """True effect in the selected window (zero for the placebo window)."""
        return self.true_atet if self.window == "main" else 0.0


def selection_loadings(p: int) -> dict:
    """Covariate loadings of the latent utility of each non-baseline cell."""
    if p == 0:
        return {cell: np.zeros(0) for cell in CELLS}
    alt = np.array([(-1.0) ** j for j in range(p)])
    scale = 1.0 / math.sqrt(p)
    return {
        (1, 1): np.ones(p) * scale,
        (1, 0): alt * scale,
        (0, 1): -alt * scale,
        (0, 0): np.zeros(p),
    }


def _draw(cfg: SimConfig, rng: np.random.Generator):
    n, p = cfg.n, cfg.covariate_count
    X = rng.standard_normal((n, p))
    loadings = selection_loadings(p)
    utility = np.column_stack([cfg.selection_strength * (X @ loadings[c]) for c in CELLS])
    if cfg.link == "logit":
        utility += rng.gumbel(size=(n, 4))
    else:
        utility += rng.standard_normal((n, 4))
    cell = np.argmax(utility, axis=1)
    cells = np.array(CELLS)
    d = cells[cell, 0]
    t = cells[cell, 1]
    k = t + (1 if cfg.window == "main" else 0)
    y = (cfg.group_effect * d + cfg.time_effect * k + cfg.true_atet * d * (k == 2)
         + X @ np.full(p, OUTCOME_BETA) + cfg.trend_violation * d * k
         + cfg.anticipation * d * (k == 1) + cfg.noise_sd * rng.standard_normal(n))
    return y, d, t, X


def generate(cfg: SimConfig) -> tuple[Dataset, float]:
    """Draw one dataset; returns it with the true effect for its window."""
    rng = np.random.default_rng(cfg.seed)
    names = tuple(f"x{j + 1}" for j in range(cfg.covariate_count))
    for _ in range(MAX_REGENERATIONS):
        y, d, t, X = _draw(cfg, rng)
        try:
            ds = Dataset(y, d, t, X, names, np.arange(cfg.n), None, "y")
        except DesignError:
            continue
        return ds, cfg.estimand
    raise DesignError(f"empty cell in {MAX_REGENERATIONS} consecutive draws; increase n")


def derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=path).generate_state(1)[0])


@dataclass(frozen=True)
class MonteCarloSummary:
    replications: int
    true_atet: float
    mean_estimate: float
    bias: float
    rmse: float
    empirical_sd: float
    mean_se: float
    coverage: float
    rejection_rate: float
    failed: int  # failed bootstrap replicates, summed over replications
    estimates: np.ndarray
    std_errors: np.ndarray
    p_values: np.ndarray

    def as_rows(self) -> list[tuple[str, float]]:
        return [
            ("replications", self.replications),
            ("true_atet", self.true_atet),
            ("mean_estimate", self.mean_estimate),
            ("bias", self.bias),
            ("rmse", self.rmse),
            ("empirical_sd", self.empirical_sd),
            ("mean_se", self.mean_se),
            ("coverage_95", self.coverage),
            ("rejection_rate_5pct", self.rejection_rate),
            ("failed_bootstrap_replicates", self.failed),
        ]


def _replication(cfg: SimConfig, r: int, design: DesignConfig, covariates: bool):
    ds, _ = generate(replace(cfg, seed=derived_seed(cfg.seed, r, 0)))
    if not covariates:
        ds = ds.without_covariates()
    cfg_r = replace(design, seed=derived_seed(cfg.seed, r, 1), n_jobs=1)
    try:
        point = estimate_atet(ds, cfg_r)
        res = bootstrap_inference(ds, cfg_r, point)
    except Exception as exc:
        raise type(exc)(f"replication {r}: {exc}") from exc
    return (res.effect, res.std_error, res.p_value, res.ci95[0], res.ci95[1],
            res.failed_replications)


def monte_carlo(cfg: SimConfig, replications: int, design: DesignConfig | None = None,
                covariates: bool = True) -> MonteCarloSummary:
    """Repeat generate -> estimate -> bootstrap and summarise against the truth.

    Each replication uses its own data and bootstrap seeds derived from
    ``cfg.seed``, so the summary does not depend on ``design.n_jobs``, which
    spreads replications over worker processes. ``covariates=False``
    estimates with an intercept only.
    """
    if replications < 50:
        raise ValueError(f"replications ≥ 50 required, got {replications}")
    design = design or DesignConfig(bootstrap_reps=199)
    args = ([cfg] * replications, range(replications), [design] * replications,
            [covariates] * replications)
    if design.n_jobs == 1:
        out = list(map(_replication, *args))
    else:
        with ProcessPoolExecutor(max_workers=design.n_jobs) as pool:
            out = list(pool.map(_replication, *args, chunksize=max(1, replications // (4 * design.n_jobs))))
    est, se, pv, lo, hi, nfail = (np.array(col) for col in zip(*out))
    tau = cfg.estimand
    return MonteCarloSummary(
        replications=replications,
        true_atet=tau,
        mean_estimate=float(est.mean()),
        bias=float(est.mean() - tau),
        rmse=float(np.sqrt(np.mean((est - tau) ** 2))),
        empirical_sd=float(est.std(ddof=1)),
        mean_se=float(se.mean()),
        coverage=float(np.mean((lo <= tau) & (tau <= hi))),
        rejection_rate=float(np.mean(pv < 0.05)),
        failed=int(nfail.sum()),
        estimates=est,
        std_errors=se,
        p_values=pv,
    )


SURVEY_COLUMNS = ("country", "year", "school_id", "female", "age", "tv_weekday", "mother_home",
                  "father_home", "family_cars", "own_bedroom", "computers", "family_well_off",
                  "weight_kg", "height_m", "bmi", "soda_freq")


def simulate_survey(n_per_cell: int = 1500, tau: float = 1.0, seed: int = 0,
                    treatment_country: str = "Treatland", control_country: str = "Controlia",
                    other_country: str | None = "Elsewhere", years=(2006, 2010, 2014),
                    policy_year: int = 2011, trend_violation: float = 0.0,
                    missing_rate: float = 0.02, schools_per_cell: int = 40) -> list[dict]:
    """Rows of a synthetic survey extract in the default column layout.

    Covariate distributions shift by country and year, so the raw DiD of
    means is confounded while the covariate-adjusted soda effect is ``tau``
    for the treated country after ``policy_year``; BMI has no effect. BMI is
    left blank in the first survey year so it must be derived from weight
    and height. Values are blanked, or set to "NA"/"-99", at ``missing_rate``.
    """
    rng = np.random.default_rng(seed)
    countries = [treatment_country, control_country] + ([other_country] if other_country else [])
    rows = []
    for ci, country in enumerate(countries):
        treated = country == treatment_country
        shift = (0.0, 0.4, -0.3)[ci]
        for yi, year in enumerate(years):
            n = n_per_cell
            drift = 0.25 * yi
            female = rng.binomial(1, 0.5, n)
            age = np.round(11.0 + 4.0 * rng.random(n) + 0.2 * shift, 1)
            tv = np.clip(np.round(2.0 + shift + 0.3 * drift + 1.5 * rng.standard_normal(n)), 0, 7)
            mother = rng.binomial(1, 0.95, n)
            father = rng.binomial(1, np.clip(0.8 + 0.1 * shift, 0.05, 0.95), n)
            cars = np.clip(np.round(1.3 - 0.3 * shift + 0.6 * rng.standard_normal(n)), 0, 3)
            bedroom = rng.binomial(1, np.clip(0.75 - 0.05 * shift + 0.03 * yi, 0.05, 0.95), n)
            computers = np.clip(np.round(1.5 + drift * (1.5 if treated else 0.5)
                                         + 0.8 * rng.standard_normal(n)), 0, 4)
            well_off = np.clip(np.round(2.4 + 0.3 * shift + 0.8 * rng.standard_normal(n)), 1, 5)
            post = year > policy_year
            soda = (3.2 + 0.3 * (1 - female) + 0.1 * (age - 13) + 0.2 * tv + 0.15 * computers
                    - 0.1 * well_off + 0.2 * shift + 0.1 * yi
                    + tau * (treated and post) + trend_violation * treated * yi
                    + 1.2 * rng.standard_normal(n))
            bmi = (19.0 + 0.6 * (age - 13) + 0.15 * tv - 0.3 * shift + 0.05 * yi
                   + 2.5 * rng.standard_normal(n))
            height = np.round(1.55 + 0.05 * (age - 13) + 0.07 * rng.standard_normal(n), 3)
            weight = np.round(bmi * height ** 2, 1)
            school = rng.integers(0, schools_per_cell, n)
            for i in range(n):
                rows.append({
                    "country": country, "year": year,
                    "school_id": f"{country[:2].upper()}{school[i]:03d}",
                    "female": int(female[i]), "age": float(age[i]), "tv_weekday": int(tv[i]),
                    "mother_home": int(mother[i]), "father_home": int(father[i]),
                    "family_cars": int(cars[i]), "own_bedroom": int(bedroom[i]),
                    "computers": int(computers[i]), "family_well_off": int(well_off[i]),
                    "weight_kg": float(weight[i]), "height_m": float(height[i]),
                    "bmi": "" if yi == 0 else round(float(weight[i] / height[i] ** 2), 3),
                    "soda_freq": round(float(soda[i]), 3),
                })
    blankable = [c for c in SURVEY_COLUMNS if c not in ("country", "year", "school_id", "bmi")]
    sentinels = ("", "NA", "-99")
    for row in rows:
        for col in blankable:
            if rng.random() < missing_rate:
                row[col] = sentinels[int(rng.integers(0, 3))]
    return rows


def write_survey_csv(path, rows: list[dict], delimiter: str = ",") -> None:
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(SURVEY_COLUMNS), delimiter=delimiter,
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
