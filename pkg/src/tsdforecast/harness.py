"""Experiment orchestration: train variants, sweep mask conditions, report.

An experiment trains each requested variant for each seed on a shared
synthetic dataset, then evaluates every checkpoint on a grid of masking
conditions (random rates x continuous observed lengths). Evaluation masks
depend only on (eval seed, cell, scenario id), never on the variant or the
training seed, so comparisons across variants are paired by construction; a
fingerprint of the masks is stored and cross-checked.

Output layout:
    out/<variant>/<seed>/ckpt.bin          checkpoint + JSON manifest
    out/<variant>/<seed>/losses.csv        per-step loss components
    out/<variant>/<seed>/eval/<cell>.csv   one row per mask condition
    out/report.md                          tables + significance tests
    out/plots/*.svg                        metric sweeps
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .distill import VARIANTS, TrainConfig, TrainingError, train
from .masking import continuous_mask, no_mask, random_mask
from .metrics import EvalResult, evaluate, paired_t_test
from .model import ForecastModel
from .plots import plot_metric_sweep
from .scenario import GeneratorConfig, generate_scenario, save_dataset

METRICS = ("min_ade", "min_fde", "miss_rate")


@dataclass
class ExperimentSpec:
    dataset: GeneratorConfig = field(default_factory=GeneratorConfig)
    train_count: int = 2000
    eval_count: int = 500
    variants: list[str] = field(default_factory=lambda: ["baseline", "target_only", "tsd_no_mmd", "tsd"])
    random_rates: list[float] = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8])
    continuous_lengths: list[int] = field(default_factory=lambda: [1, 5, 10, 15, 20])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_seed: int = 2024
    k_eval: int = 6
    out: str = "out"

    def validate(self) -> "ExperimentSpec":
        if not self.variants or not self.seeds:
            raise ValueError("variants and seeds must be non-empty")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; allowed: {sorted(VARIANTS)}")
        if not self.random_rates and not self.continuous_lengths:
            raise ValueError("the evaluation grid is empty")
        if self.train_count < 1 or self.eval_count < 1:
            raise ValueError("train_count and eval_count must be >= 1")
        self.dataset.validate()
        self.train.validate()
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        kwargs = dict(d)
        if "dataset" in kwargs:
            kwargs["dataset"] = GeneratorConfig.from_dict(kwargs["dataset"])
        if "train" in kwargs:
            kwargs["train"] = TrainConfig.from_dict(kwargs["train"])
        return cls(**kwargs).validate()

    def cells(self) -> list[tuple[str, float]]:
        return ([("random", float(r)) for r in self.random_rates]
                + [("continuous", int(l)) for l in self.continuous_lengths])


def cell_name(pattern: str, param) -> str:
    if pattern == "random":
        return f"random_{int(round(float(param) * 100)):02d}"
    return f"obs_{int(param):02d}"


def _cell_mask(pattern: str, param, t_obs: int, num_neighbors: int,
               eval_seed: int, scenario_id: int):
    if pattern == "random":
        if float(param) == 0.0:
            return no_mask(t_obs, num_neighbors)
        seed = int(np.random.SeedSequence(
            [eval_seed, 1, int(round(float(param) * 1000)), scenario_id]).generate_state(1)[0])
        return random_mask(t_obs, num_neighbors, float(param), seed)
    if pattern == "continuous":
        return continuous_mask(t_obs, num_neighbors, int(param))
    if pattern == "none":
        return no_mask(t_obs, num_neighbors)
    raise ValueError(f"unknown mask pattern {pattern!r}")


def cell_masks(pattern: str, param, scenarios, eval_seed: int):
    return [_cell_mask(pattern, param, s.t_obs, s.num_neighbors, eval_seed, s.scenario_id)
            for s in scenarios]


def mask_fingerprint(masks) -> str:
    h = hashlib.sha256()
    for m in masks:
        h.update(np.ascontiguousarray(m.focal).tobytes())
        h.update(np.ascontiguousarray(m.neighbors).tobytes())
    return h.hexdigest()


def evaluate_cell(model: ForecastModel, use_targets: bool, scenarios,
                  pattern: str, param, eval_seed: int, k_eval: int) -> tuple[EvalResult, str]:
    masks = cell_masks(pattern, param, scenarios, eval_seed)
    forecast = model.forecast_scenarios(scenarios, masks, use_targets=use_targets)
    gt = np.array([[[st.x, st.y] for st in s.focal_future] for s in scenarios])
    return evaluate(forecast, gt, k_eval=k_eval), mask_fingerprint(masks)


def _write_cell_csv(path: Path, variant: str, pattern: str, param, res: EvalResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variant", "mask_pattern", "parameter",
                    "min_ade", "min_fde", "miss_rate", "n"])
        w.writerow([variant, pattern, format(float(param), ".9g"),
                    format(res.min_ade, ".9g"), format(res.min_fde, ".9g"),
                    format(res.miss_rate, ".9g"), res.n_scenarios])


def run_experiment(spec: ExperimentSpec) -> Path:
    """Run the full train/eval sweep; returns the report path."""
    spec.validate()
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)

    train_set = [generate_scenario(spec.dataset, i) for i in range(spec.train_count)]
    eval_set = [generate_scenario(spec.dataset, spec.train_count + i)
                for i in range(spec.eval_count)]
    save_dataset(train_set, out / "data" / "train.jsonl")
    save_dataset(eval_set, out / "data" / "eval.jsonl")

    cells = spec.cells()
    expected_hash: dict[str, str] = {}
    for variant in spec.variants:
        for seed in spec.seeds:
            run_dir = out / variant / str(seed)
            cfg = replace(spec.train, seed=seed, variant=variant)
            try:
                model, _ = train(train_set, cfg, out_dir=run_dir)
            except TrainingError as err:
                run_dir.mkdir(parents=True, exist_ok=True)
                (run_dir / "error.txt").write_text(str(err) + "\n")
                continue
            use_targets = VARIANTS[variant].use_targets
            hashes = {}
            for pattern, param in cells:
                name = cell_name(pattern, param)
                res, fingerprint = evaluate_cell(
                    model, use_targets, eval_set, pattern, param,
                    spec.eval_seed, spec.k_eval)
                _write_cell_csv(run_dir / "eval" / f"{name}.csv",
                                variant, pattern, param, res)
                hashes[name] = fingerprint
                if expected_hash.setdefault(name, fingerprint) != fingerprint:
                    raise AssertionError(
                        f"evaluation masks for cell {name} differ across runs")
            with open(run_dir / "eval" / "mask_hashes.json", "w") as f:
                json.dump(hashes, f, indent=1, sort_keys=True)

    return write_report(out, out)


# ---------------------------------------------------------------------------
# Report generation from the on-disk layout.
# ---------------------------------------------------------------------------

def load_results(results_dir) -> list[dict]:
    """Rows of per-(variant, seed, cell) metrics found under results_dir."""
    results_dir = Path(results_dir)
    rows = []
    for csv_path in sorted(results_dir.glob("*/*/eval/*.csv")):
        variant = csv_path.parents[2].name
        seed = csv_path.parents[1].name
        with open(csv_path) as f:
            for rec in csv.DictReader(f):
                rows.append({
                    "variant": variant,
                    "seed": int(seed),
                    "pattern": rec["mask_pattern"],
                    "param": float(rec["parameter"]),
                    "min_ade": float(rec["min_ade"]),
                    "min_fde": float(rec["min_fde"]),
                    "miss_rate": float(rec["miss_rate"]),
                    "n": int(rec["n"]),
                })
    return rows


def seed_mean_table(rows: list[dict], pattern: str, metric: str) -> dict[str, list[tuple[float, float]]]:
    """variant -> sorted [(param, metric mean over seeds)] for one pattern."""
    acc: dict[tuple[str, float], list[float]] = {}
    for r in rows:
        if r["pattern"] == pattern:
            acc.setdefault((r["variant"], r["param"]), []).append(r[metric])
    table: dict[str, list[tuple[float, float]]] = {}
    for (variant, param), values in acc.items():
        table.setdefault(variant, []).append((param, sum(values) / len(values)))
    for variant in table:
        table[variant].sort()
    return table


def _column_order(pattern: str, params: list[float]) -> list[float]:
    # Mirror the benchmark tables: random sweeps go easy-to-hard left to
    # right; continuous sweeps list full observation first, then shorter.
    return sorted(params, reverse=(pattern == "continuous"))


def _pattern_report(rows: list[dict], pattern: str, lines: list[str]) -> None:
    params = sorted({r["param"] for r in rows if r["pattern"] == pattern})
    if not params:
        return
    variants = sorted({r["variant"] for r in rows if r["pattern"] == pattern})
    order = _column_order(pattern, params)
    if pattern == "random":
        title = "Random masking"
        headers = ["Fully Obs." if p == 0.0 else f"Mask Rate = {int(round(p * 100))}%"
                   for p in order]
    else:
        title = "Continuous masking"
        headers = [f"Obs. = {int(p)}" for p in order]
    lines.append(f"## {title}")
    lines.append("")
    lines.append("Cells are minADE / minFDE / MR, averaged over seeds.")
    lines.append("")
    lines.append("| Method | " + " | ".join(headers) + " |")
    lines.append("|---" * (len(order) + 1) + "|")
    tables = {m: seed_mean_table(rows, pattern, m) for m in METRICS}
    for variant in variants:
        cells = []
        for p in order:
            vals = []
            for m in METRICS:
                entry = dict(tables[m].get(variant, []))
                vals.append(f"{entry[p]:.3f}" if p in entry else "-")
            cells.append("/".join(vals))
        lines.append("| " + variant + " | " + " | ".join(cells) + " |")
    lines.append("")


def _significance_report(rows: list[dict], lines: list[str]) -> None:
    variants = {r["variant"] for r in rows}
    if not {"baseline", "tsd"} <= variants:
        return
    lines.append("## Paired t-tests (baseline vs tsd)")
    lines.append("")
    lines.append("| pattern | metric | t | p |")
    lines.append("|---|---|---|---|")
    for pattern in ("random", "continuous"):
        for metric in METRICS:
            table = seed_mean_table(rows, pattern, metric)
            base = dict(table.get("baseline", []))
            tsd = dict(table.get("tsd", []))
            shared = sorted(set(base) & set(tsd))
            if len(shared) < 2:
                continue
            a = [base[p] for p in shared]
            b = [tsd[p] for p in shared]
            try:
                t_stat, p_val = paired_t_test(a, b)
                lines.append(f"| {pattern} | {metric} | {t_stat:.4f} | {p_val:.4f} |")
            except ValueError:
                lines.append(f"| {pattern} | {metric} | - | - |")
    lines.append("")


def write_report(results_dir, out_dir=None) -> Path:
    """Aggregate eval CSVs into report.md and SVG sweep plots."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir is not None else results_dir
    rows = load_results(results_dir)
    if not rows:
        raise FileNotFoundError(f"no evaluation results under {results_dir}")

    lines = ["# Masked-observation forecasting results", ""]
    _pattern_report(rows, "random", lines)
    _pattern_report(rows, "continuous", lines)
    _significance_report(rows, lines)

    plot_dir = out_dir / "plots"
    for pattern in ("random", "continuous"):
        for metric in METRICS:
            table = seed_mean_table(rows, pattern, metric)
            if table:
                plot_metric_sweep(table, pattern, metric,
                                  plot_dir / f"{pattern}_{metric}.svg")

    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.md"
    report_path.write_text("\n".join(lines))
    return report_path
