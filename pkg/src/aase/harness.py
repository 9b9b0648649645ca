"""Occlusion-grid experiment and runtime scaling benchmark.

The grid experiment is a synthetic surrogate for a real driving corpus:
each scenario draws agent counts, samples a trajectory from the traffic
model, and every method is scored on the same occluded trace (paired design).
"""
from __future__ import annotations

import csv
import gc
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConfigError
from .inference import exact_smooth, hmm_smooth, map_sequence, sum_product_smooth
from .model import AgentAwareModel
from .simkit import OCCLUSION_KINDS, OcclusionPattern, accuracy, apply_occlusion, majority_baseline, simulate
from .traffic import TrafficConfig, build_traffic_model

METHODS = ("AASE", "HMM", "EXACT")
RANDOM_KINDS = ("ContRandom", "DiscontRandom")
REPORT_COLUMNS = ("pattern", "fraction", "method", "trials", "mean_accuracy", "stderr", "mean_infer_ms", "flag")


def _check_keys(cls, doc: dict, section: str) -> dict:
    known = {f.name for f in fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field")
    return dict(doc)


@dataclass
class RunConfig:
    """Settings for the occlusion-grid experiment.

    ``agents_per_direction`` is the inclusive range each scenario draws its
    per-direction agent counts from; it is ignored when ``model_file`` is set.
    ``timing=False`` leaves ``mean_infer_ms`` empty so the report depends on
    the seed alone.
    """

    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    model_file: str | None = None
    horizon: int = 300
    scenarios: int = 21
    patterns: list = field(default_factory=lambda: list(OCCLUSION_KINDS))
    fractions: list = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    methods: list = field(default_factory=lambda: ["AASE", "HMM"])
    trials: int = 5
    seed: int = 0
    agents_per_direction: tuple = (1, 4)
    workers: int = 1
    timing: bool = True
    occlude_agents: bool = False

    @classmethod
    def from_dict(cls, doc: dict, traffic: dict | None = None) -> "RunConfig":
        kw = _check_keys(cls, doc, "run")
        if traffic is not None:
            kw["traffic"] = TrafficConfig.from_dict(traffic)
        elif isinstance(kw.get("traffic"), dict):
            kw["traffic"] = TrafficConfig.from_dict(kw["traffic"])
        if "agents_per_direction" in kw:
            kw["agents_per_direction"] = tuple(kw["agents_per_direction"])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"run.methods: {self.methods!r} must be a non-empty subset of {METHODS}")
        if any(p not in OCCLUSION_KINDS for p in self.patterns) or not self.patterns:
            raise ConfigError(f"run.patterns: {self.patterns!r} must be a non-empty subset of {OCCLUSION_KINDS}")
        if not self.fractions or any(not 0.0 <= f <= 1.0 for f in self.fractions):
            raise ConfigError("run.fractions: values must lie in [0, 1]")
        if self.scenarios < 1 or self.trials < 1 or self.horizon < 1:
            raise ConfigError("run: scenarios, trials and horizon must be >= 1")
        lo, hi = self.agents_per_direction
        if not 0 <= lo <= hi:
            raise ConfigError("run.agents_per_direction: need 0 <= low <= high")


# --------------------------------------------------------------------------
# one scenario


def _scenario_model(cfg: RunConfig, rng: np.random.Generator) -> AgentAwareModel:
    if cfg.model_file:
        from .io import load_model

        return load_model(cfg.model_file)
    lo, hi = cfg.agents_per_direction
    n_par, n_perp = (int(x) for x in rng.integers(lo, hi + 1, size=2))
    traffic = TrafficConfig.from_dict({**cfg.traffic.to_dict(), "nParallel": n_par, "nPerpendicular": n_perp})
    return build_traffic_model(traffic)


def _infer(method: str, model: AgentAwareModel, trace):
    if method == "AASE":
        return sum_product_smooth(model, trace)
    if method == "HMM":
        return hmm_smooth(model.global_chain, trace.global_obs)
    return exact_smooth(model, trace)


def run_scenario(cfg: RunConfig, index: int) -> dict:
    """Score every (pattern, fraction, trial, method) cell on one scenario.

    A pure function of ``(cfg, index)``: all randomness comes from the
    ``index``-th child of ``SeedSequence(cfg.seed)``.
    """
    seq = np.random.SeedSequence(cfg.seed).spawn(cfg.scenarios)[index]
    model_seq, sim_seq, occ_seq = seq.spawn(3)
    model = _scenario_model(cfg, np.random.default_rng(model_seq))
    truth, trace = simulate(model, cfg.horizon, np.random.default_rng(sim_seq))
    labels = truth.global_labels(model)
    occ_seeds = occ_seq.generate_state(len(cfg.patterns) * len(cfg.fractions) * cfg.trials)

    records = []
    j = 0
    for pattern in cfg.patterns:
        for fraction in cfg.fractions:
            for trial in range(cfg.trials):
                seed = int(occ_seeds[j])
                j += 1
                if pattern not in RANDOM_KINDS and trial > 0:
                    continue
                occluded = apply_occlusion(trace, OcclusionPattern(pattern, fraction, seed), cfg.occlude_agents)
                for method in cfg.methods:
                    t0 = time.perf_counter()
                    post = _infer(method, model, occluded)
                    ms = (time.perf_counter() - t0) * 1000.0
                    acc = accuracy(map_sequence(post), labels)
                    records.append((pattern, float(fraction), trial, method, acc, ms))
    return {"index": index, "n_agents": model.n_agents, "truth": labels, "records": records, "order": model.global_chain.space.labels}


# --------------------------------------------------------------------------
# aggregation


@dataclass
class ReportRow:
    pattern: str
    fraction: float
    method: str
    trials: int
    mean_accuracy: float
    stderr: float | None
    mean_infer_ms: float | None
    flag: str = ""


@dataclass
class ExperimentReport:
    rows: list
    majority_label: str
    majority_accuracy: float
    scenarios: int

    def cell(self, pattern: str, fraction: float, method: str) -> ReportRow:
        for r in self.rows:
            if r.pattern == pattern and math.isclose(r.fraction, fraction) and r.method == method:
                return r
        raise KeyError((pattern, fraction, method))

    def to_csv(self, pattern: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            if pattern is None or r.pattern == pattern:
                w.writerow(
                    [
                        r.pattern,
                        repr(r.fraction),
                        r.method,
                        r.trials,
                        repr(r.mean_accuracy),
                        "" if r.stderr is None else repr(r.stderr),
                        "" if r.mean_infer_ms is None else f"{r.mean_infer_ms:.3f}",
                        r.flag,
                    ]
                )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "scenarios": self.scenarios,
            "majority_label": self.majority_label,
            "majority_accuracy": self.majority_accuracy,
            "rows": [r.__dict__ for r in self.rows],
        }


def aggregate(cfg: RunConfig, results: list) -> ExperimentReport:
    """Reduce scenario results in a fixed key order.

    For each trial the accuracy is pooled over all scenarios; the reported
    mean and standard error are taken over trials.
    """
    results = sorted(results, key=lambda r: r["index"])
    acc: dict = {}
    ms: dict = {}
    for res in results:
        for pattern, fraction, trial, method, a, t in res["records"]:
            acc.setdefault((pattern, fraction, method), {}).setdefault(trial, []).append(a)
            ms.setdefault((pattern, fraction, method), []).append(t)

    rows = []
    for pattern in cfg.patterns:
        for fraction in cfg.fractions:
            for method in cfg.methods:
                key = (pattern, float(fraction), method)
                per_trial = np.array([np.mean(v) for _, v in sorted(acc[key].items())])
                n = len(per_trial)
                stderr = float(np.std(per_trial, ddof=1) / math.sqrt(n)) if n > 1 else None
                rows.append(
                    ReportRow(
                        pattern,
                        float(fraction),
                        method,
                        n,
                        float(per_trial.mean()),
                        stderr,
                        float(np.mean(ms[key])) if cfg.timing else None,
                        "degenerate" if method == "HMM" and fraction == 1.0 else "",
                    )
                )

    truths = [r["truth"] for r in results]
    label = majority_baseline(truths, order=results[0]["order"])
    maj_acc = float(np.mean([accuracy([label] * len(t), t) for t in truths]))
    return ExperimentReport(rows, label, maj_acc, len(results))


def run_table(cfg: RunConfig) -> ExperimentReport:
    cfg.validate()
    indices = range(cfg.scenarios)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run_scenario, [cfg] * cfg.scenarios, indices))
    else:
        results = [run_scenario(cfg, i) for i in indices]
    return aggregate(cfg, results)


def plot_pattern(report: ExperimentReport, pattern: str, path) -> None:
    """Accuracy against occlusion fraction, one line per method, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "aase"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    methods = list(dict.fromkeys(r.method for r in report.rows))
    for method in methods:
        rows = [r for r in report.rows if r.pattern == pattern and r.method == method]
        x = [r.fraction * 100 for r in rows]
        y = [r.mean_accuracy * 100 for r in rows]
        err = [0.0 if r.stderr is None else r.stderr * 100 for r in rows]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=method)
    ax.axhline(report.majority_accuracy * 100, color="grey", ls="--", lw=1, label="majority")
    ax.set_xlabel("occluded light observations (%)")
    ax.set_ylabel("accuracy (%)")
    ax.set_title(pattern)
    ax.set_ylim(0, 100)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_table_outputs(report: ExperimentReport, out_dir, fmt: str = "csv", plots: bool = True) -> list[Path]:
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        p = out / "table.json"
        p.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        p = out / "table.csv"
        p.write_text(report.to_csv())
    written.append(p)
    for pattern in dict.fromkeys(r.pattern for r in report.rows):
        p = out / f"table_{pattern}.csv"
        p.write_text(report.to_csv(pattern))
        written.append(p)
        if plots:
            p = out / f"table_{pattern}.svg"
            plot_pattern(report, pattern, p)
            written.append(p)
    return written


# --------------------------------------------------------------------------
# scaling benchmark


@dataclass
class BenchConfig:
    n_list: list = field(default_factory=lambda: [4, 8, 16, 32])
    horizon: int = 300
    repeats: int = 5
    seed: int = 0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)

    @classmethod
    def from_dict(cls, doc: dict, traffic: dict | None = None) -> "BenchConfig":
        kw = _check_keys(cls, doc, "bench")
        if traffic is not None:
            kw["traffic"] = TrafficConfig.from_dict(traffic)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if len(self.n_list) < 3 or list(self.n_list) != sorted(self.n_list):
            raise ConfigError("bench.n_list: need at least 3 agent counts in ascending order")
        if self.repeats < 1 or self.horizon < 1:
            raise ConfigError("bench: repeats and horizon must be >= 1")


@dataclass
class BenchReport:
    n_list: list
    median_ms: list
    slope: float
    intercept: float
    r_squared: float

    def ratio(self, n_hi: int, n_lo: int) -> float:
        return self.median_ms[self.n_list.index(n_hi)] / self.median_ms[self.n_list.index(n_lo)]

    def to_csv(self) -> str:
        lines = ["n,median_ms"] + [f"{n},{t:.3f}" for n, t in zip(self.n_list, self.median_ms)]
        lines.append(f"# slope_ms_per_agent={self.slope:.4f} intercept_ms={self.intercept:.4f} r2={self.r_squared:.6f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Median wall time of ``sum_product_smooth`` per agent count, with a linear fit.

    Agents are split ``n // 2`` parallel and the rest perpendicular; every
    ``n`` simulates its trace from the same seed.  Each case gets one warm-up
    call.  Timed calls then go round-robin over the agent counts, so a change
    in machine speed during the run hits every ``n`` alike, and the garbage
    collector stays paused while they run.
    """
    cfg.validate()
    cases = []
    for n in cfg.n_list:
        traffic = TrafficConfig.from_dict({**cfg.traffic.to_dict(), "nParallel": n // 2, "nPerpendicular": n - n // 2})
        model = build_traffic_model(traffic)
        _, trace = simulate(model, cfg.horizon, cfg.seed)
        sum_product_smooth(model, trace)
        cases.append((model, trace))

    times = [[] for _ in cases]
    gc.collect()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(cfg.repeats):
            for j, (model, trace) in enumerate(cases):
                t0 = time.perf_counter()
                sum_product_smooth(model, trace)
                times[j].append((time.perf_counter() - t0) * 1000.0)
    finally:
        if was_enabled:
            gc.enable()
    medians = [float(np.median(t)) for t in times]
    fit = stats.linregress(cfg.n_list, medians)
    return BenchReport(list(cfg.n_list), medians, float(fit.slope), float(fit.intercept), float(fit.rvalue**2))
