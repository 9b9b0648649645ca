import numpy as np
import pytest

from aase.errors import ConfigError
from aase.harness import BenchConfig, RunConfig, run_bench, run_table, write_table_outputs


def _small(**kw):
    base = dict(scenarios=3, horizon=40, trials=2, timing=False, fractions=[0.0, 0.5, 1.0])
    base.update(kw)
    return RunConfig(**base)


def test_same_config_same_bytes():
    a = run_table(_small()).to_csv()
    assert a == run_table(_small()).to_csv()
    assert a == run_table(_small(workers=2)).to_csv()
    assert a != run_table(_small(seed=1)).to_csv()


def test_report_shape_and_flags():
    cfg = _small()
    report = run_table(cfg)
    assert len(report.rows) == len(cfg.patterns) * len(cfg.fractions) * len(cfg.methods)
    for r in report.rows:
        assert 0.0 <= r.mean_accuracy <= 1.0
        assert (r.flag == "degenerate") == (r.method == "HMM" and r.fraction == 1.0)
        random_kind = r.pattern in ("ContRandom", "DiscontRandom")
        assert r.trials == (2 if random_kind else 1)
        assert (r.stderr is not None) == random_kind


def test_five_trials_populate_stderr():
    report = run_table(_small(patterns=["DiscontRandom"], fractions=[0.5], trials=5))
    for r in report.rows:
        assert r.trials == 5 and r.stderr is not None


def test_timing_column():
    report = run_table(_small(patterns=["ContStart"], fractions=[0.0], timing=True))
    assert all(r.mean_infer_ms > 0 for r in report.rows)


def test_zero_agent_aase_column_equals_hmm():
    report = run_table(_small(scenarios=4, agents_per_direction=(0, 0)))
    for r in report.rows:
        if r.method == "AASE":
            assert r.mean_accuracy == report.cell(r.pattern, r.fraction, "HMM").mean_accuracy


def test_full_evidence_agents_do_not_hurt():
    report = run_table(RunConfig(scenarios=100, patterns=["ContStart"], fractions=[0.0], trials=1, timing=False))
    aase = report.cell("ContStart", 0.0, "AASE").mean_accuracy
    hmm = report.cell("ContStart", 0.0, "HMM").mean_accuracy
    assert aase >= hmm - 0.02


def test_outputs_written(tmp_path):
    report = run_table(_small(patterns=["ContStart", "ContEnd"]))
    paths = write_table_outputs(report, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["table.csv", "table_ContEnd.csv", "table_ContEnd.svg", "table_ContStart.csv", "table_ContStart.svg"]
    header = (tmp_path / "table.csv").read_text().splitlines()[0]
    assert header == "pattern,fraction,method,trials,mean_accuracy,stderr,mean_infer_ms,flag"
    svg = (tmp_path / "table_ContStart.svg").read_bytes()
    write_table_outputs(report, tmp_path)
    assert (tmp_path / "table_ContStart.svg").read_bytes() == svg


@pytest.mark.parametrize(
    "kw", [{"methods": []}, {"fractions": [1.2]}, {"scenarios": 0}, {"patterns": ["Fog"]}, {"methods": ["KALMAN"]}]
)
def test_invalid_run_config(kw):
    with pytest.raises(ConfigError):
        run_table(_small(**kw))


def test_run_config_unknown_key():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"scenario_count": 3})


def test_bench_small():
    report = run_bench(BenchConfig(n_list=[0, 2, 4], horizon=30, repeats=2))
    assert report.n_list == [0, 2, 4] and len(report.median_ms) == 3
    assert all(np.isfinite(report.median_ms)) and 0.0 <= report.r_squared <= 1.0
    assert report.to_csv().startswith("n,median_ms\n0,")


def test_bench_needs_three_sorted_counts():
    with pytest.raises(ConfigError):
        run_bench(BenchConfig(n_list=[8, 4, 16]))
    with pytest.raises(ConfigError):
        run_bench(BenchConfig(n_list=[4, 8]))
