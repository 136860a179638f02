import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidid import (CELLS, Dataset, DesignConfig, DesignError, ValidationError,
                     build_dataset, cell_means)

from conftest import random_dataset


def _records(cells, covs=None):
    rows = []
    for i, (d, t) in enumerate(cells):
        rec = {"y": float(i), "treated": d, "post": t}
        if covs is not None:
            rec.update(covs[i])
        rows.append(rec)
    return rows


def test_minimal_design_has_one_row_per_cell():
    ds = build_dataset(_records(CELLS), DesignConfig())
    assert ds.cell_counts == {c: 1 for c in CELLS}
    assert ds.covariates.shape == (4, 0)


def test_non_binary_treatment_rejected():
    rows = _records(CELLS)
    rows[0]["treated"] = 2
    with pytest.raises(ValidationError, match="record 0"):
        build_dataset(rows, DesignConfig())


def test_only_post_period_names_empty_cells():
    rows = _records([(1, 1), (0, 1), (1, 1)])
    with pytest.raises(DesignError) as err:
        build_dataset(rows, DesignConfig())
    assert "(0, 0)" in str(err.value) and "(1, 0)" in str(err.value)


def test_missing_field_lists_record_index():
    rows = _records(CELLS, [{"age": 1.0}, {"age": 2.0}, {}, {"age": 3.0}])
    with pytest.raises(ValidationError, match="record 2.*age"):
        build_dataset(rows, DesignConfig(covariate_names=("age",)))


def test_covariate_order_follows_config_and_no_intercept():
    covs = [{"b": 10.0 * i, "a": float(i)} for i in range(4)]
    ds = build_dataset(_records(CELLS, covs), DesignConfig(covariate_names=("a", "b")))
    assert ds.covariate_names == ("a", "b")
    np.testing.assert_array_equal(ds.covariates[:, 1], 10 * ds.covariates[:, 0])
    assert not np.all(ds.covariates == 1.0, axis=0).any()


def test_config_bounds():
    with pytest.raises(ValueError):
        DesignConfig(trim_threshold=0.5)
    with pytest.raises(ValueError):
        DesignConfig(bootstrap_reps=0)
    cfg = DesignConfig()
    assert cfg.trim_threshold == 0.05 and cfg.bootstrap_reps == 1999


def test_non_finite_outcome_rejected():
    with pytest.raises(ValidationError):
        Dataset.from_arrays([1.0, np.nan, 0.0, 1.0], [1, 1, 0, 0], [1, 0, 1, 0])


def test_dataset_is_read_only(rng):
    ds = random_dataset(rng)
    with pytest.raises(ValueError):
        ds.outcome[0] = 1.0


def test_cell_means_singletons():
    ds = Dataset.from_arrays([4, 3, 2, 2], [1, 1, 0, 0], [1, 0, 1, 0])
    assert cell_means(ds) == {(1, 1): 4, (1, 0): 3, (0, 1): 2, (0, 0): 2}


def test_cell_means_constant():
    ds = Dataset.from_arrays([5.0] * 8, [1, 1, 0, 0] * 2, [1, 0, 1, 0] * 2)
    assert set(cell_means(ds).values()) == {5.0}


def test_cell_means_brute_force(rng):
    ds = random_dataset(rng, n=100)
    totals = {c: 0.0 for c in CELLS}
    counts = {c: 0 for c in CELLS}
    for obs in ds.observations:
        totals[(obs.treated, obs.post)] += obs.outcome
        counts[(obs.treated, obs.post)] += 1
    means = cell_means(ds)
    for c in CELLS:
        assert means[c] == pytest.approx(totals[c] / counts[c], abs=1e-12)
    assert ds.cell_counts == counts


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(8, 120), p=st.integers(0, 3))
def test_rebuild_from_observations_is_idempotent(seed, n, p):
    ds = random_dataset(np.random.default_rng(seed), n=n, p=p)
    names = ds.covariate_names
    rows = [dict(y=o.outcome, treated=o.treated, post=o.post, unit_id=o.unit_id,
                 **dict(zip(names, o.covariates))) for o in ds.observations]
    again = build_dataset(rows, DesignConfig(covariate_names=names))
    np.testing.assert_array_equal(again.outcome, ds.outcome)
    np.testing.assert_array_equal(again.covariates, ds.covariates)
    np.testing.assert_array_equal(again.treated, ds.treated)
    assert again.cell_counts == ds.cell_counts


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(8, 200))
def test_cell_means_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=n, p=1)
    perm = rng.permutation(n)
    assert cell_means(ds.subset(perm)) == cell_means(ds)


@given(d=st.lists(st.integers(0, 1), min_size=1, max_size=30),
       t=st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_valid_dataset_always_has_four_cells(d, t):
    n = min(len(d), len(t))
    try:
        ds = Dataset.from_arrays(np.zeros(n), d[:n], t[:n])
    except DesignError:
        assert len(set(zip(d[:n], t[:n]))) < 4
        return
    assert all(v > 0 for v in ds.cell_counts.values())
    assert sum(ds.cell_counts.values()) == n
