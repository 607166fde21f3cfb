"""Command-line interface.

Subcommands:
    gen         generate a synthetic scenario dataset (JSONL)
    train       train one variant on a dataset
    eval        evaluate a checkpoint under a mask condition
    experiment  full train/eval sweep with report and plots
    report      rebuild report.md and plots from existing results

All randomness is routed through config seeds, so identical invocations
produce identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .checkpoint import load_checkpoint
from .distill import TrainConfig, train
from .harness import ExperimentSpec, evaluate_cell, run_experiment, write_report
from .metrics import evaluate  # noqa: F401  (re-exported for scripting)
from .model import ForecastModel
from .scenario import GeneratorConfig, generate_dataset, load_dataset, save_dataset


def _load_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def _cmd_gen(args) -> int:
    cfg_dict = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = GeneratorConfig.from_dict(cfg_dict)
    scenarios = generate_dataset(cfg, args.count)
    save_dataset(scenarios, args.out)
    print(f"wrote {len(scenarios)} scenarios to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg_dict = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    if args.variant is not None:
        cfg_dict["variant"] = args.variant
    cfg = TrainConfig.from_dict(cfg_dict)
    dataset = load_dataset(args.data)
    train(dataset, cfg, out_dir=args.out)
    print(f"trained {cfg.variant} for {cfg.epochs} epochs; checkpoint in {args.out}")
    return 0


def _schedule_to_cell(schedule: dict) -> tuple[str, float]:
    pattern = schedule.get("pattern", "none")
    if pattern == "none":
        return "none", 0.0
    if pattern == "random":
        return "random", float(schedule["rate"])
    if pattern == "continuous":
        return "continuous", int(schedule["observed_len"])
    raise ValueError(f"eval supports none/random/continuous patterns, got {pattern!r}")


def _cmd_eval(args) -> int:
    model = ForecastModel.load(args.ckpt)
    _, manifest = load_checkpoint(args.ckpt)
    variant = manifest.get("model", {}).get("variant", "tsd")
    from .distill import VARIANTS

    use_targets = VARIANTS.get(variant, VARIANTS["tsd"]).use_targets
    scenarios = load_dataset(args.data)
    pattern, param = _schedule_to_cell(json.loads(args.mask) if args.mask else {"pattern": "none"})
    result, fingerprint = evaluate_cell(model, use_targets, scenarios, pattern, param,
                                        args.eval_seed, args.k)
    row = [variant, pattern, format(float(param), ".9g"),
           format(result.min_ade, ".9g"), format(result.min_fde, ".9g"),
           format(result.miss_rate, ".9g"), result.n_scenarios]
    header = ["variant", "mask_pattern", "parameter", "min_ade", "min_fde", "miss_rate", "n"]
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerow(row)
    print(",".join(str(v) for v in row) + f"  mask_sha256={fingerprint[:12]}")
    if args.dump_forecasts:
        from .harness import cell_masks
        from .decoder import forecast_records

        masks = cell_masks(pattern, param, scenarios, args.eval_seed)
        fc = model.forecast_scenarios(scenarios, masks, use_targets=use_targets)
        records = forecast_records(fc, [s.scenario_id for s in scenarios])
        with open(args.dump_forecasts, "w") as f:
            json.dump(records, f)
    return 0


def _cmd_experiment(args) -> int:
    spec_dict = _load_json(args.config)
    spec = ExperimentSpec.from_dict(spec_dict)
    if args.out is not None:
        spec = replace(spec, out=args.out)
    if args.seed is not None:
        spec = replace(spec, seeds=[args.seed])
    report = run_experiment(spec)
    print(f"report written to {report}")
    return 0


def _cmd_report(args) -> int:
    report = write_report(args.input, args.out)
    print(f"report written to {report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdforecast",
        description="Self-distilled trajectory forecasting under partial observation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a scenario dataset")
    p.add_argument("--config", help="GeneratorConfig JSON")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train one variant")
    p.add_argument("--config", help="TrainConfig JSON")
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=["baseline", "target_only", "tsd_no_mmd", "tsd"])
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mask", help='mask JSON, e.g. {"pattern":"random","rate":0.4}')
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--eval-seed", type=int, default=2024)
    p.add_argument("--out", help="write the result row to this CSV")
    p.add_argument("--dump-forecasts", help="write per-scenario mu/b/pi JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="full train/eval sweep")
    p.add_argument("--config", required=True, help="ExperimentSpec JSON")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="replace the seed list with one seed")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="rebuild report from results")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def cli_main(argv=None) -> int:
    import torch

    torch.set_num_threads(1)  # small tensors: threading overhead dominates
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean message, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
