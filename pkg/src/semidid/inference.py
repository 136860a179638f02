"""Bootstrap standard errors, t-test p-values and confidence intervals."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .atet import AtetEstimate, estimate_atet
from .core import CELLS, Dataset, DesignConfig, DesignError
from .probit import ProbitDesign, std_normal_cdf

# Normal critical value used for the 95% interval.
Z_95 = 1.96
# Largest tolerated share of failed bootstrap replicates.
MAX_FAILED_SHARE = 0.20


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InferenceResult:
    effect: float
    std_error: float
    p_value: float
    ci95: tuple[float, float]
    replications_used: int
    failed_replications: int
    seed: int
    n_obs: int = 0
    n_used: int = 0
    clustered: bool = False
    replicate_effects: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def t_test_pvalue(effect: float, std_error: float) -> float:
    """Two-sided normal p-value of effect / std_error.

    A zero standard error gives 1 for a zero effect and 0 otherwise.
    """
    if std_error < 0 or math.isnan(std_error):
        raise ValueError(f"std_error must be non-negative, got {std_error}")
    if std_error == 0:
        return 1.0 if effect == 0 else 0.0
    # 2 * Phi(-|z|) equals 2 * (1 - Phi(|z|)) without cancellation in the tail
    return min(1.0, 2.0 * std_normal_cdf(-abs(effect) / std_error))


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index``; identical in any process."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _cluster_codes(ds: Dataset):
    if ds.cluster_id is None:
        raise ValueError("cluster bootstrap requested but the dataset has no cluster_id")
    _, codes = np.unique(ds.cluster_id.astype(str), return_inverse=True)
    return codes.reshape(-1)


def resample_weights(rng: np.random.Generator, n: int, cluster_codes=None) -> np.ndarray:
    """Frequency weights of one bootstrap resample.

    Without clusters, rows are drawn i.i.d.; with cluster codes, the number of
    clusters is held fixed and every member row of a drawn cluster enters as
    many times as the cluster was drawn.
    """
    if cluster_codes is None:
        return np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
    g = int(cluster_codes.max()) + 1
    counts = np.bincount(rng.integers(0, g, g), minlength=g)
    return counts[cluster_codes].astype(float)


def _run_replicates(ds, config, start, indices, cluster_codes):
    design = ProbitDesign(ds.covariates)
    cells = [ds.cell_mask(*c) for c in CELLS]
    out = np.full(len(indices), np.nan)
    for k, b in enumerate(indices):
        w = resample_weights(replicate_rng(config.seed, b), ds.n, cluster_codes)
        if any(not np.any(w[m] > 0) for m in cells):
            continue
        try:
            out[k] = estimate_atet(ds, config, weights=w, start=start, design=design).effect
        except (ArithmeticError, ValueError, DesignError):
            continue
    return out


def bootstrap_replicates(ds: Dataset, config: DesignConfig, start: dict | None = None) -> np.ndarray:
    """Replicate effects indexed by replicate number; failed replicates are NaN."""
    codes = _cluster_codes(ds) if config.cluster_by else None
    B = config.bootstrap_reps
    if config.n_jobs == 1:
        return _run_replicates(ds, config, start, range(B), codes)
    chunks = [list(c) for c in np.array_split(np.arange(B), config.n_jobs) if len(c)]
    with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
        parts = list(pool.map(_run_replicates, [ds] * len(chunks), [config] * len(chunks),
                              [start] * len(chunks), chunks, [codes] * len(chunks)))
    return np.concatenate(parts)


def bootstrap_inference(ds: Dataset, config: DesignConfig,
                        estimate: AtetEstimate | None = None) -> InferenceResult:
    """Bootstrap the whole chain (propensities, trimming, weighting).

    Rows are resampled i.i.d. unless ``config.cluster_by`` is set, in which
    case whole clusters are resampled. The standard error is the sample
    standard deviation of the replicate effects.
    """
    estimate = estimate or estimate_atet(ds, config)
    start = {c: f.coefficients for c, f in estimate.propensity.rho_fits.items()}
    reps = bootstrap_replicates(ds, config, start)
    ok = reps[np.isfinite(reps)]
    failed = int(reps.shape[0] - ok.shape[0])
    if failed > MAX_FAILED_SHARE * reps.shape[0]:
        raise BootstrapError(f"unstable bootstrap: {failed} of {reps.shape[0]} replicates failed")
    effect = estimate.effect
    se = float(np.std(ok, ddof=1)) if ok.shape[0] > 1 else 0.0
    if se == 0.0 and effect != 0.0:
        warnings.warn("bootstrap standard error is zero for a non-zero effect; p-value set to 0")
    p = t_test_pvalue(effect, se)
    if config.ci_method == "percentile" and ok.shape[0] > 1:
        lo, hi = np.quantile(ok, [0.025, 0.975])
        ci = (float(lo), float(hi))
    else:
        ci = (effect - Z_95 * se, effect + Z_95 * se)
    return InferenceResult(effect, se, p, ci, int(ok.shape[0]), failed, config.seed,
                           estimate.n_total, estimate.n_used, bool(config.cluster_by), reps)
