"""Inverse-probability-weighted difference-in-differences ATET.

Each observation gets the signed multiplier

    DT/Pi - D(1-T) r11/(r10 Pi) - (1-D)T r11/(r01 Pi) + (1-D)(1-T) r11/(r00 Pi)

where ``r_dt = Pr(D=d, T=t | X)`` and ``Pi = Pr(D=1, T=1)``; the effect is
the sample mean of multiplier times outcome over the rows kept by trimming.
``Pi`` is the treated-post share of those kept rows, so trimming that hits
the cells unevenly does not rescale the effect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CELLS, Dataset, DesignConfig, Observation, cell_means
from .propensity import PropensityFit, TrimReport, estimate_cell_probabilities, trim

# Sign each cell contributes to the DiD contrast.
CELL_SIGN = {(1, 1): 1.0, (1, 0): -1.0, (0, 1): -1.0, (0, 0): 1.0}


class EstimationError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class AtetEstimate:
    effect: float
    n_used: int
    n_total: int
    trim_report: TrimReport
    weights_summary: dict
    propensity: PropensityFit | None = None
    pi_used: float = float("nan")


def ipw_weight(obs: Observation, fit: PropensityFit) -> float:
    """Signed weight of a single observation, evaluating the probits at its covariates."""
    rho = fit.predict(np.asarray(obs.covariates, dtype=float))
    return _weight(obs.treated, obs.post, rho[(1, 1)], rho[(1, 0)], rho[(0, 1)], rho[(0, 0)],
                   fit.pi_hat)


def _weight(d, t, r11, r10, r01, r00, pi):
    if d == 1 and t == 1:
        return 1.0 / pi
    denom = {(1, 0): r10, (0, 1): r01, (0, 0): r00}[(d, t)]
    if denom == 0.0 or pi == 0.0:
        raise ZeroDivisionError(f"zero probability in the weight for cell ({d}, {t})")
    return CELL_SIGN[(d, t)] * r11 / (denom * pi)


def ipw_weights(fit: PropensityFit, pi: float | None = None) -> np.ndarray:
    """Signed weights for every row the propensities were fitted on.

    ``pi`` defaults to the fit's full-sample treated-post share.
    """
    pi = fit.pi_hat if pi is None else pi
    d = fit.treated.astype(bool)
    t = fit.post.astype(bool)
    r11 = fit.rho_cell(1, 1)
    w = np.empty(fit.n)
    w[d & t] = 1.0 / pi
    with np.errstate(divide="raise", invalid="raise"):
        for cell in ((1, 0), (0, 1), (0, 0)):
            m = (d == bool(cell[0])) & (t == bool(cell[1]))
            w[m] = CELL_SIGN[cell] * r11[m] / (fit.rho_cell(*cell)[m] * pi)
    return w


def _weighted_effect(y, w, freq, kept, cells, normalize):
    if normalize:
        # cell means of centred outcomes: the centring cancels across the
        # +,-,-,+ contrast and makes a constant outcome give exactly zero
        centre = math.fsum(freq[kept] * y[kept]) / math.fsum(freq[kept])
        effect = 0.0
        for j, cell in enumerate(CELLS):
            m = kept & (cells == j)
            aw = freq[m] * np.abs(w[m])
            effect += CELL_SIGN[cell] * math.fsum(aw * (y[m] - centre)) / math.fsum(aw)
        return effect
    return math.fsum(freq[kept] * w[kept] * y[kept]) / math.fsum(freq[kept])


def cell_codes(ds: Dataset) -> np.ndarray:
    codes = np.empty(ds.n, dtype=np.int8)
    for j, cell in enumerate(CELLS):
        codes[ds.cell_mask(*cell)] = j
    return codes


def estimate_atet(ds: Dataset, config: DesignConfig | None = None, weights=None,
                  start: dict | None = None, design=None) -> AtetEstimate:
    """Fit propensities, trim, and return the IPW DiD effect.

    Propensities come from the full sample and are not refitted after
    trimming unless ``config.refit_after_trim`` is set; the treated-post share
    in the weights is recomputed on the kept rows.
    ``weights`` are frequency weights, which is how bootstrap resamples are
    represented.
    """
    config = config or DesignConfig()
    freq = np.ones(ds.n) if weights is None else np.asarray(weights, dtype=float)
    fit = estimate_cell_probabilities(ds, freq, start, design)
    report = trim(ds, fit, config.trim_threshold, config.trim_rule)
    kept = report.kept_mask & (freq > 0)
    if config.refit_after_trim and report.dropped_count:
        refit = estimate_cell_probabilities(ds, np.where(kept, freq, 0.0), start, design)
        fit = PropensityFit(refit.rho_fits, refit.pi_hat, refit.rho, fit.treated, fit.post)

    cells = cell_codes(ds)
    for j, cell in enumerate(CELLS):
        if not np.any(kept & (cells == j)):
            if cell == (1, 1):
                raise EstimationError("no effective treated sample: every treated-post row was trimmed")
            raise EstimationError(f"every row of cell {cell} was trimmed")

    pi_kept = math.fsum(freq[kept & (cells == 0)]) / math.fsum(freq[kept])
    w = ipw_weights(fit, pi_kept)
    y = ds.outcome
    effect = _weighted_effect(y, w, freq, kept, cells, config.normalize)
    if not math.isfinite(effect):
        raise EstimationError("non-finite effect")
    summary = {}
    for j, cell in enumerate(CELLS):
        cw = w[kept & (cells == j)]
        summary[cell] = {"min": float(cw.min()), "max": float(cw.max()), "mean": float(cw.mean())}
    return AtetEstimate(effect, int(round(freq[kept].sum())), int(round(freq.sum())), report,
                        summary, fit, pi_kept)


def simple_did(ds: Dataset) -> float:
    """(Y11 - Y10) - (Y01 - Y00) from raw cell means."""
    m = cell_means(ds)
    return (m[(1, 1)] - m[(1, 0)]) - (m[(0, 1)] - m[(0, 0)])
