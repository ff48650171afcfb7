import csv

import numpy as np
import pytest

from caps.bench import (
    CSV_COLUMNS,
    METRIC_COLS,
    DataFormatError,
    ExperimentConfig,
    aggregate,
    load_csv_dataset,
    make_instance,
    run_experiment,
    run_real,
    sniff_header,
    time_stage,
    write_rows,
)
from caps.graph import write_edge_list
from caps.synthesis import write_dataset_csv

small = dict(d=4, n=200, linear_proportions=[0.0, 1.0], seeds=[0, 1, 2])


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.d, cfg.n, cfg.lam, cfg.eta) == (10, 2000, 50, 0.01)
        assert cfg.dataset_name.startswith("SynER1")

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"dd": 3})

    @pytest.mark.parametrize("bad", [{"seeds": []}, {"linear_proportions": [1.5]}, {"method": "ges"}])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_time_stage():
    out, dt = time_stage("x", lambda: 7)
    assert out == 7 and dt >= 0


def test_instances_independent_of_grid():
    a = make_instance(ExperimentConfig(**small), 0.0, 2)
    b = make_instance(ExperimentConfig(d=4, n=200, linear_proportions=[0.0], seeds=[2]), 0.0, 2)
    assert a[1].tobytes() == b[1].tobytes()


@pytest.fixture(scope="module")
def rows():
    return run_experiment(ExperimentConfig(**small))


class TestExperiment:
    def test_row_counts(self, rows):
        assert sum(r["kind"] == "raw" for r in rows) == 6
        assert sum(r["kind"] == "aggregate" for r in rows) == 2

    def test_aggregate_matches_raw(self, rows):
        for agg in (r for r in rows if r["kind"] == "aggregate"):
            raw = [r for r in rows if r["kind"] == "raw" and r["linear_proportion"] == agg["linear_proportion"]]
            for m in METRIC_COLS:
                vals = np.array([r[m] for r in raw], dtype=float)
                assert abs(agg[m] - vals.mean()) < 1e-12
                assert abs(agg[f"{m}_std"] - vals.std()) < 1e-12
            assert agg["n_cells"] == 3

    def test_csv(self, rows, tmp_path):
        write_rows(rows, tmp_path / "b.csv")
        with open(tmp_path / "b.csv", newline="") as fh:
            back = list(csv.DictReader(fh))
        assert tuple(back[0]) == CSV_COLUMNS
        assert len(back) == len(rows)

    def test_failed_cells_recorded(self):
        cfg = ExperimentConfig(d=3, n=200, linear_proportions=[1.0], seeds=[0], estimator="analytic_plugin",
                               method="sortnregress")
        ok = run_experiment(cfg)
        assert not ok[0].get("error")
        bad = {"kind": "raw", "dataset": "x", "method": "caps", "linear_proportion": 1.0, "error": "boom"}
        agg = aggregate([bad], [1.0])
        assert agg[0]["n_cells"] == 0

    def test_parallel_matches_serial(self):
        cfg = dict(small, seeds=[0, 1])
        a = run_experiment(ExperimentConfig(**cfg))
        b = run_experiment(ExperimentConfig(**cfg, jobs=2))
        key = lambda rows: [(r["seed"], r["shd"], r["sid"]) for r in rows if r["kind"] == "raw"]
        assert key(a) == key(b)


class TestCsvLoading:
    def test_ragged_row(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2\n3\n")
        with pytest.raises(DataFormatError, match=":2:"):
            load_csv_dataset(tmp_path / "x.csv")

    def test_bad_number(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2\n3,abc\n")
        with pytest.raises(DataFormatError, match=":2:"):
            load_csv_dataset(tmp_path / "x.csv")

    def test_non_finite(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,nan\n")
        with pytest.raises(DataFormatError, match=":1:"):
            load_csv_dataset(tmp_path / "x.csv")

    def test_header_sniffing(self, tmp_path):
        (tmp_path / "h.csv").write_text("a,b\n1,2\n")
        (tmp_path / "n.csv").write_text("1,2\n")
        assert sniff_header(tmp_path / "h.csv") and not sniff_header(tmp_path / "n.csv")
        assert load_csv_dataset(tmp_path / "h.csv", True).shape == (1, 2)


def test_run_real_round_trip(tmp_path):
    spec, X = make_instance(ExperimentConfig(d=5, n=500, linear_proportions=[1.0], seeds=[0]), 1.0, 0)
    write_dataset_csv(X, tmp_path / "d.csv")
    write_edge_list(spec.graph, tmp_path / "t.txt")
    report, dag = run_real(tmp_path / "d.csv", tmp_path / "t.txt")
    assert dag.d == 5 and report.dataset == "d"
    assert report.shd >= 0


def test_run_real_dimension_mismatch(tmp_path):
    (tmp_path / "d.csv").write_text("1,2\n3,5\n")
    (tmp_path / "t.txt").write_text("# d=3\n0 1\n")
    with pytest.raises(ValueError):
        run_real(tmp_path / "d.csv", tmp_path / "t.txt")
