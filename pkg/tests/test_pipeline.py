import filecmp
import json
import os
import shutil
import warnings

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from tradenet import pipeline
from tradenet.centrality import compute_all, records_frame
from tradenet.exceptions import DataWarning, EstimationError, ValidationError
from tradenet.pipeline import (
    MEASURES,
    PipelineConfig,
    StageError,
    emit_figure_series,
    read_results_csv,
    run_pipeline,
)
from tradenet.synthetic import SyntheticSpec, write_dataset


@pytest.fixture(autouse=True)
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture(scope="module")
def sample_runs(tmp_path_factory):
    from conftest import SAMPLE_DIR

    cfg = PipelineConfig.from_ini(os.path.join(SAMPLE_DIR, "config.ini"))
    base = tmp_path_factory.mktemp("runs")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = run_pipeline(cfg, base / "a")
        b = run_pipeline(cfg, base / "b")
    return cfg, base, a, b


def test_reruns_are_byte_identical(sample_runs):
    _, base, a, b = sample_runs
    assert a == b and a[-1] == "manifest.json"
    match, mismatch, errors = filecmp.cmpfiles(base / "a", base / "b", a, shallow=False)
    assert mismatch == [] and errors == []


def test_artifact_set(sample_runs):
    cfg, base, written, _ = sample_runs
    names = set(written)
    assert {"panel.csv", "evolution.csv", "corr.csv", "descriptives.csv", "figure_series.csv"} <= names
    assert {f"rankings_{m}.csv" for m in MEASURES} <= names
    assert {f"centrality_{y}.csv" for y in range(2000, 2008)} <= names
    assert {f"results_{m}_{e}.csv" for m in MEASURES for e in cfg.estimators} <= names
    manifest = json.loads((base / "a" / "manifest.json").read_text())
    assert set(manifest["outputs"]) == names - {"manifest.json"}
    assert {"numpy", "pandas", "scipy", "tradenet"} <= set(manifest["versions"])
    assert len(manifest["config_sha256"]) == 64
    assert not any(p.name.startswith(".tradenet-") for p in base.iterdir())


def test_panel_and_centrality_files(sample_runs):
    _, base, _, _ = sample_runs
    panel = pd.read_csv(base / "a" / "panel.csv")
    # 20 countries, 2 with a missing macro cell, 6 panel years
    assert len(panel) == 18 * 6
    assert panel["year"].min() == 2002 and panel["year"].max() == 2007
    cent = pd.read_csv(base / "a" / "centrality_2003.csv")
    assert_allclose(cent["pagerank"].sum(), 1.0, rtol=1e-10)
    corr = pd.read_csv(base / "a" / "corr.csv", index_col=0)
    assert_allclose(np.diag(corr.to_numpy()), 1.0)


def test_results_file_round_trip(sample_runs):
    _, base, _, _ = sample_runs
    coefs, diag = read_results_csv(base / "a" / "results_pagerank_system_gmm.csv")
    assert list(coefs.columns) == ["coef", "std_err", "stat", "pvalue"]
    assert "L1.pagerank" in coefs.index
    assert {"obs", "hansen_p", "ar1_p", "ar2_p"} <= set(diag)
    assert int(diag["obs"]) == 18 * 6
    coefs, diag = read_results_csv(base / "a" / "results_s_in_fixed_effects.csv")
    assert np.isfinite(coefs["coef"]).all()


def test_stage_chain_reproduces_run(sample_runs, tmp_path):
    cfg, base, written, _ = sample_runs
    inputs = pipeline.stage_ingest(cfg)
    graphs = pipeline.stage_graphs(cfg, inputs)
    centrality = pipeline.stage_centralities(cfg, graphs)
    covariates = pipeline.stage_indices(cfg, inputs)
    bundle = pipeline.stage_panel(cfg, centrality, covariates)
    estimation = pipeline.stage_estimators(cfg, bundle, inputs)
    names = pipeline.stage_reports(cfg, graphs, centrality, bundle, estimation, str(tmp_path))
    assert names == written[:-1]
    for name in names:
        assert filecmp.cmp(tmp_path / name, base / "a" / name, shallow=False), name


def test_small_synthetic_panel_rows(tmp_path):
    spec = SyntheticSpec(n_countries=10, first_year=2000, last_year=2005, seed=11, n_incomplete=1)
    paths = write_dataset(spec, tmp_path / "data", panel_start=2000)
    cfg = PipelineConfig.from_ini(paths["config"], estimators=("pooled_ols", "fixed_effects"), diagnostics=False)
    run_pipeline(cfg, tmp_path / "out")
    panel = pd.read_csv(tmp_path / "out" / "panel.csv")
    assert panel["country"].nunique() == 9
    assert len(panel) == 9 * 6
    # no crisis year in 2000-2005, so the dummy is constant and dropped
    _, diag = read_results_csv(tmp_path / "out" / "results_pagerank_pooled_ols.csv")
    assert "crisis" in diag["dropped"]


def test_missing_file_fails_before_computation(tmp_path, sample_dir, monkeypatch):
    called = []
    monkeypatch.setattr(pipeline, "stage_ingest", lambda cfg: called.append(cfg))
    cfg = PipelineConfig.from_ini(os.path.join(sample_dir, "config.ini"), flows=str(tmp_path / "nope.csv"))
    with pytest.raises(ValidationError, match="not found"):
        cfg.validate()
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, tmp_path / "out")
    assert info.value.stage == "validate" and isinstance(info.value.cause, ValidationError)
    assert called == [] and not (tmp_path / "out").exists()


def test_stage_failure_leaves_no_partial_outputs(tmp_path, sample_dir, monkeypatch):
    def boom(cfg, bundle, inputs):
        raise EstimationError("singular design")

    monkeypatch.setattr(pipeline, "stage_estimators", boom)
    cfg = PipelineConfig.from_ini(os.path.join(sample_dir, "config.ini"))
    with pytest.raises(StageError, match="estimators") as info:
        run_pipeline(cfg, tmp_path / "out")
    assert info.value.stage == "estimators"
    assert not (tmp_path / "out").exists()
    assert list(tmp_path.iterdir()) == []


def test_config_errors(tmp_path, sample_dir):
    text = open(os.path.join(sample_dir, "config.ini")).read()
    bad = tmp_path / "bad.ini"
    for extra, pattern in [
        ("\n[network]\nbogus = 1\n", "bogus"),
        ("\n[mystery]\nx = 1\n", "mystery"),
    ]:
        bad.write_text(text.replace("[network]\n", "[network]\nbogus = 1\n") if "bogus" in extra else text + extra)
        with pytest.raises(ValidationError, match=pattern):
            PipelineConfig.from_ini(bad)
    with pytest.raises(ValidationError, match="not found"):
        PipelineConfig.from_ini(tmp_path / "missing.ini")
    cfg = PipelineConfig.from_ini(os.path.join(sample_dir, "config.ini"))
    for field, value in [("damping", 1.0), ("year_range", (2005, 2004)), ("estimators", ("lasso",))]:
        with pytest.raises(ValidationError):
            PipelineConfig(**{**cfg.__dict__, field: value}).validate()


def test_config_hash_ignores_output_location(sample_dir):
    path = os.path.join(sample_dir, "config.ini")
    a = PipelineConfig.from_ini(path, out_dir="x")
    b = PipelineConfig.from_ini(path, out_dir="y")
    c = PipelineConfig.from_ini(path, damping=0.8)
    assert a.hash_payload() == b.hash_payload() != c.hash_payload()


def test_emit_figure_series():
    recs = pd.DataFrame(
        {"country": ["AAA", "BBB", "CCC"] * 2, "year": [2000] * 3 + [2001] * 3, "pagerank": np.arange(6) / 10.0}
    ).assign(kcore=1)
    out = emit_figure_series(recs, ["pagerank"], ["AAA", "CCC"])
    assert list(out.columns) == ["measure", "country", "year", "value"]
    assert len(out) == 4
    assert len(emit_figure_series(recs, ["pagerank", "kcore"], ["AAA"]).query("year == 2000")) == 2
    assert len(emit_figure_series(recs, ["pagerank"])) == 6
    with pytest.warns(DataWarning, match="ZZZ"):
        out = emit_figure_series(recs, ["pagerank"], ["AAA", "ZZZ"])
    assert set(out["country"]) == {"AAA"}


def test_figure_series_matches_pivot(sample_runs):
    _, base, _, _ = sample_runs
    series = pd.read_csv(base / "a" / "figure_series.csv")
    wide = pd.concat(
        [pd.read_csv(base / "a" / f"centrality_{y}.csv") for y in range(2000, 2008)], ignore_index=True
    )
    ref = wide.melt(id_vars=["country", "year"], value_vars=list(MEASURES), var_name="measure")
    merged = series.merge(ref, on=["measure", "country", "year"], suffixes=("", "_ref"))
    assert len(merged) == len(series) == len(ref)
    assert_allclose(merged["value"], merged["value_ref"], rtol=1e-11)


def test_figure_series_from_records():
    from conftest import make_graph

    g = make_graph(["AAA", "BBB", "CCC"], [("AAA", "BBB", 2.0), ("BBB", "CCC", 1.0)])
    recs = compute_all(g)
    a = emit_figure_series(recs, ["s_out"], ["BBB"])
    assert a["value"].tolist() == [1.0]
    assert_allclose(
        emit_figure_series(records_frame(recs), ["s_out"])["value"], emit_figure_series(recs, ["s_out"])["value"]
    )
