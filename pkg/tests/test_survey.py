import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidid import DesignConfig, DesignError, estimate_atet
from semidid.dgp import SURVEY_COLUMNS, simulate_survey, write_survey_csv
from semidid.survey import (COVARIATES, IngestError, StudyDesign, VariableMapping, apply_design,
                            derive_bmi, load_table)

DESIGN = StudyDesign("Treatland", "Controlia", 2010, 2014, 2011)


def row(**overrides):
    base = {"country": "Treatland", "year": 2010, "school_id": "TR001", "female": 1, "age": 13.5,
            "tv_weekday": 2, "mother_home": 1, "father_home": 1, "family_cars": 1,
            "own_bedroom": 1, "computers": 2, "family_well_off": 3, "weight_kg": 45.0,
            "height_m": 1.5, "bmi": 20.0, "soda_freq": 4.0}
    base.update(overrides)
    return base


def write(path, rows, columns=SURVEY_COLUMNS, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), delimiter=delimiter,
                           extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def four_cells(**overrides):
    rows = []
    for country in ("Treatland", "Controlia"):
        for year in (2010, 2014):
            rows.append(row(country=country, year=year, **overrides))
    return rows


def test_three_rows_load(tmp_path):
    recs = load_table(write(tmp_path / "a.csv", [row(), row(age=12), row(age=14)]))
    assert len(recs) == 3
    assert [r["age"] for r in recs] == [13.5, 12.0, 14.0]
    assert recs[0]["country"] == "Treatland" and recs[0]["year"] == 2010


def test_missing_country_column_is_named(tmp_path):
    cols = [c for c in SURVEY_COLUMNS if c != "country"]
    with pytest.raises(IngestError, match="country"):
        load_table(write(tmp_path / "a.csv", [row()], cols))


@pytest.mark.parametrize("sentinel", ["NA", "", "-99"])
def test_sentinels_flag_missing(tmp_path, sentinel):
    recs = load_table(write(tmp_path / "a.csv", [row(age=sentinel)]))
    assert recs[0]["age"] is None and "age" in recs[0]["missing"]


def test_custom_sentinels(tmp_path):
    recs = load_table(write(tmp_path / "a.csv", [row(age="999")]), missing=("999",))
    assert recs[0]["age"] is None


def test_unparseable_number_reports_row_and_column(tmp_path):
    with pytest.raises(IngestError, match=r"row 3.*'age'"):
        load_table(write(tmp_path / "a.csv", [row(), row(age="twelve")]))


def test_unreadable_file(tmp_path):
    with pytest.raises(IngestError, match="cannot read"):
        load_table(tmp_path / "absent.csv")


def test_tab_delimited(tmp_path):
    recs = load_table(write(tmp_path / "a.tsv", [row()], delimiter="\t"), delimiter="\t")
    assert recs[0]["soda"] == 4.0


def test_bmi_formula():
    assert derive_bmi(60.0, 1.5) == pytest.approx(26.666666666666668, abs=1e-12)
    assert derive_bmi(45.0, 1.5) == 20.0
    assert derive_bmi(45.0, 0.0) is None
    assert derive_bmi(-1.0, 1.5) is None
    assert derive_bmi(None, 1.5) is None


@given(st.floats(10, 150), st.floats(0.8, 2.2), st.floats(0.1, 10))
def test_bmi_homogeneous_in_height(w, h, c):
    assert derive_bmi(w, c * h) == pytest.approx(derive_bmi(w, h) / c ** 2, rel=1e-12)


def test_bmi_derived_when_blank(tmp_path):
    recs = load_table(write(tmp_path / "a.csv", [row(bmi="", weight_kg=60.0, height_m=1.5)]))
    assert recs[0]["bmi"] == pytest.approx(60 / 1.5 ** 2)


def test_bmi_from_centimetres(tmp_path):
    mapping = VariableMapping(height_unit="cm")
    recs = load_table(write(tmp_path / "a.csv", [row(bmi="", height_m=150)]), mapping)
    assert recs[0]["bmi"] == pytest.approx(20.0)


def test_zero_height_leaves_bmi_missing_but_soda_row_kept(tmp_path):
    rows = four_cells() + [row(bmi="", height_m=0)]
    recs = load_table(write(tmp_path / "a.csv", rows))
    assert recs[-1]["bmi"] is None
    _, soda = apply_design(recs, DESIGN, "soda")
    _, bmi = apply_design(recs, DESIGN, "bmi")
    assert soda.retained == 5 and bmi.retained == 4 and bmi.missing_outcome == 1


def test_design_filter_and_exclusion_counts(tmp_path):
    rows = four_cells() + [
        row(country="Elsewhere"),            # outside the design
        row(year=2006),                      # outside the design
        row(tv_weekday="NA"),                # child covariate
        row(own_bedroom=""),                 # child covariate
        row(computers="-99"),                # household covariate
        row(soda_freq="NA"),                 # outcome
        row(soda_freq="NA", age="NA"),       # attributed to the outcome first
    ]
    recs = load_table(write(tmp_path / "a.csv", rows))
    ds, rep = apply_design(recs, DESIGN, "soda")
    assert rep.outside_design == 2
    assert (rep.missing_outcome, rep.missing_child, rep.missing_household) == (2, 2, 1)
    assert rep.dropped + rep.retained == rep.input_rows == 9
    assert ds.n == 4 and ds.covariate_names == COVARIATES
    assert apply_design(recs, DESIGN, "soda")[1] == rep


def test_labels_and_clusters(tmp_path):
    recs = load_table(write(tmp_path / "a.csv", four_cells()))
    ds, _ = apply_design(recs, DESIGN, "soda")
    assert ds.treated.tolist() == [1, 1, 0, 0]
    assert ds.post.tolist() == [0, 1, 0, 1]
    assert ds.cluster_id.tolist() == ["TR001|2010", "TR001|2014"] * 2
    assert ds.outcome_name == "Frequency of sodas"


def test_empty_cell_is_design_error(tmp_path):
    rows = [r for r in four_cells() if not (r["country"] == "Controlia" and r["year"] == 2014)]
    recs = load_table(write(tmp_path / "a.csv", rows))
    with pytest.raises(DesignError, match=r"\(0, 1\)"):
        apply_design(recs, DESIGN, "soda")


def test_study_design_validation():
    with pytest.raises(ValueError):
        StudyDesign("A", "B", 2014, 2010)
    with pytest.raises(ValueError):
        StudyDesign("A", "A", 2010, 2014)


def test_mapping_from_dict():
    m = VariableMapping.from_dict({"country": "land"}, {"soda": {"column": "s", "label": "Soda"}})
    assert m.country == "land" and m.outcomes["soda"].label == "Soda"
    with pytest.raises(ValueError, match="unknown mapping"):
        VariableMapping.from_dict({"colour": "c"})


def test_round_trip_through_synthetic_file(tmp_path):
    path = tmp_path / "survey.csv"
    write_survey_csv(path, simulate_survey(n_per_cell=1500, tau=1.0, seed=2))
    recs = load_table(path)
    first = load_table(path)
    ds, rep = apply_design(recs, DESIGN, "soda")
    assert apply_design(first, DESIGN, "soda")[1] == rep
    assert min(ds.cell_counts.values()) > 1000
    est = estimate_atet(ds, DesignConfig(covariate_names=COVARIATES))
    assert abs(est.effect - 1.0) < 0.3
