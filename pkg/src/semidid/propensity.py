"""Cell-membership probabilities rho_{d,t}(x), the treated-post share and trimming."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import CELLS, Dataset
from .probit import ProbitDesign, ProbitFit, fit_probit, predict_probit

# Column order of the per-observation probability matrix.
CELL_COLUMN = {cell: j for j, cell in enumerate(CELLS)}
# Share of treated-post rows that may be trimmed before overlap is flagged.
SUPPORT_WARNING_SHARE = 0.05


@dataclass(frozen=True, eq=False)
class PropensityFit:
    """Four binary probits, one per cell indicator, fitted on the full sample.

    ``rho`` is an ``(n, 4)`` matrix of fitted probabilities with columns in
    :data:`semidid.core.CELLS` order: (1,1), (1,0), (0,1), (0,0). With
    covariates the four columns need not sum to one; no renormalisation is
    applied.
    """

    rho_fits: dict
    pi_hat: float
    rho: np.ndarray
    treated: np.ndarray
    post: np.ndarray

    def rho_cell(self, d: int, t: int) -> np.ndarray:
        return self.rho[:, CELL_COLUMN[(d, t)]]

    def predict(self, x) -> dict:
        """rho_{d,t}(x) for a single covariate vector, keyed by cell."""
        return {cell: predict_probit(self.rho_fits[cell], x) for cell in CELLS}

    @property
    def n(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True, eq=False)
class TrimReport:
    threshold: float
    dropped_count: int
    dropped_by_cell: dict
    kept_indices: np.ndarray
    rule: str = "symmetric"

    @property
    def kept_mask(self) -> np.ndarray:
        mask = np.zeros(self.dropped_count + self.kept_indices.shape[0], dtype=bool)
        mask[self.kept_indices] = True
        return mask


def estimate_cell_probabilities(ds: Dataset, weights=None, start: dict | None = None,
                                design: ProbitDesign | None = None) -> PropensityFit:
    """Fit a probit of 1{D=d, T=t} on the covariates for each of the four cells.

    ``weights`` are optional frequency weights (used by the bootstrap);
    ``start`` optionally maps cells to starting coefficient vectors.
    """
    X = ds.covariates
    design = design or ProbitDesign(X)
    d = ds.treated.astype(float)
    t = ds.post.astype(float)
    w = np.ones(ds.n) if weights is None else np.asarray(weights, dtype=float)
    fits = {}
    rho = np.empty((ds.n, 4))
    for cell in CELLS:
        indicator = ((d == cell[0]) & (t == cell[1])).astype(float)
        try:
            fit = fit_probit(design, indicator, weights=w,
                             start=None if start is None else start.get(cell))
        except ArithmeticError as exc:
            raise type(exc)(f"propensity model for cell {cell}: {exc}") from exc
        fits[cell] = fit
        rho[:, CELL_COLUMN[cell]] = special.ndtr(design.Z @ fit.coefficients)
    # keep every stored probability strictly inside (0, 1)
    np.clip(rho, np.finfo(float).tiny, 1.0 - np.finfo(float).eps, out=rho)
    pi_hat = float(np.sum(w * d * t) / np.sum(w))
    return PropensityFit(fits, pi_hat, rho, ds.treated.copy(), ds.post.copy())


def _drop_mask(fit: PropensityFit, threshold: float, rule: str) -> np.ndarray:
    denominators = np.column_stack([fit.rho_cell(1, 0), fit.rho_cell(0, 1), fit.rho_cell(0, 0)])
    drop = np.any(denominators < threshold, axis=1)
    if rule == "symmetric":
        treated_post = (fit.treated == 1) & (fit.post == 1)
        drop |= treated_post & (fit.rho_cell(1, 1) < threshold)
    elif rule != "denominators":
        raise ValueError(f"unknown trim rule {rule!r}")
    return drop


def trim(ds: Dataset, fit: PropensityFit, threshold: float = 0.05, rule: str = "symmetric") -> TrimReport:
    """Drop rows with extreme propensities.

    A row is dropped when any of rho_{1,0}, rho_{0,1}, rho_{0,0} at its
    covariates is below ``threshold``. Under the default ``"symmetric"``
    rule, treated-post rows are also dropped when rho_{1,1} is below it.
    """
    if not 0.0 <= threshold < 0.5:
        raise ValueError(f"trim threshold must lie in [0, 0.5), got {threshold}")
    if fit.n != ds.n:
        raise ValueError("propensity fit was computed on a different dataset")
    drop = _drop_mask(fit, threshold, rule)
    by_cell = {cell: int(np.sum(drop & ds.cell_mask(*cell))) for cell in CELLS}
    return TrimReport(threshold, int(drop.sum()), by_cell, np.flatnonzero(~drop), rule)


def overlap_diagnostics(fit: PropensityFit, threshold: float = 0.05, rule: str = "symmetric") -> dict:
    """Distribution of each fitted rho, trimmed shares by cell and a support flag."""
    qs = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    summary = {"threshold": threshold, "pi_hat": fit.pi_hat, "cells": {}}
    drop = _drop_mask(fit, threshold, rule)
    for cell in CELLS:
        r = fit.rho_cell(*cell)
        in_cell = (fit.treated == cell[0]) & (fit.post == cell[1])
        summary["cells"][cell] = {
            "min": float(r.min()),
            "max": float(r.max()),
            "quantiles": dict(zip(qs, np.quantile(r, qs).tolist())),
            "trimmed_share": float(drop[in_cell].mean()),
        }
    total = fit.rho.sum(axis=1)
    summary["rho_sum"] = {"min": float(total.min()), "max": float(total.max())}
    treated_share = summary["cells"][(1, 1)]["trimmed_share"]
    summary["support_warning"] = treated_share > SUPPORT_WARNING_SHARE
    return summary
