"""Command-line entry point.

Commands map onto the experiment harness; every run directory receives the
resolved config, its hash, metrics and result records. Overrides use one
flat dotted namespace (e.g. --set hparams.lambda_rec=5), with environment
overrides via CROSSGRAFT_SET_<KEY> ('__' for '.').
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import experiments
from .config import RunConfig, load_config_file, resolve_config
from .datasets import DatasetSpec, prepare
from .errors import CrossgraftError
from .trainer import MetricsWriter, Trainer


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-key override, repeatable")
    p.add_argument("--profile", choices=["full", "desk", "tiny"], default=None)
    p.add_argument("--source", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--mode", default=None)
    p.add_argument("--split", default=None, help="decoder split, e.g. H4L2")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossgraft",
                                     description="cross-grafted transition learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="materialize a dataset into the cache")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train", choices=["train", "test"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size-cap", type=int, default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None)

    for name, help_text in [
        ("train", "train one adaptation run"),
        ("eval", "evaluate a checkpoint"),
        ("sweep", "accuracy across decoder splits"),
        ("ablate", "content/gan ablation"),
        ("migrate", "cross-task fine-tune from a home checkpoint"),
        ("semi", "semi-supervised run with labeled target samples"),
        ("export-features", "write flattened representations for embedding"),
        ("plot", "emit plots from run artifacts"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "train":
            p.add_argument("--resume", default=None, help="checkpoint to resume from")
        if name == "eval":
            p.add_argument("--checkpoint", required=True)
        if name == "sweep":
            p.add_argument("--splits", required=True, help="comma-separated, e.g. H1L5,H3L3,H5L1")
        if name == "ablate":
            p.add_argument("--which", required=True, choices=["content", "gan"])
        if name == "migrate":
            p.add_argument("--home-checkpoint", required=True)
        if name == "semi":
            p.add_argument("--labeled-per-class", type=int, required=True)
        if name == "export-features":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--layer", required=True, choices=list(experiments.LAYERS))
            p.add_argument("--out-file", required=True)
        if name == "plot":
            p.add_argument("--metrics", default=None, help="metrics.jsonl to plot")
            p.add_argument("--results", default=None, help="results.jsonl for accuracy bars")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides: dict[str, object] = {}
    for item in args.overrides:
        if "=" not in item:
            raise CrossgraftError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    flag_map = {
        "source": args.source, "target": args.target, "mode": args.mode,
        "split": args.split, "steps": args.steps, "seed": args.seed,
        "out_dir": args.out_dir, "hparams.batch_size": args.batch,
        "data.dir": args.data_dir,
    }
    if getattr(args, "labeled_per_class", None) is not None:
        flag_map["mode"] = "semi_supervised"
        flag_map["labeled_target_per_class"] = args.labeled_per_class
    overrides.update({k: v for k, v in flag_map.items() if v is not None})
    return resolve_config(file_values, overrides, profile=args.profile)


def _cmd_prepare(args) -> int:
    spec = DatasetSpec(args.dataset, args.split, args.size_cap, args.seed)
    path = prepare(spec, args.data_dir)
    print(f"prepared {spec.cache_key()} -> {path}")
    return 0


def _cmd_train(args) -> int:
    cfg = config_from_args(args)
    out = Path(cfg.out_dir)
    if args.resume:
        from .config import write_run_dir

        write_run_dir(cfg, out)
        data = experiments.load_task_data(cfg)
        trainer = experiments.build_trainer(cfg, data)
        trainer.restore(args.resume)
        metrics = MetricsWriter(out / "metrics.jsonl")
        trainer.fit(cfg.steps, metrics=metrics, checkpoint_path=out / "checkpoint.pt",
                    checkpoint_every=cfg.checkpoint_every)
        metrics.close()
        record = experiments._evaluate_and_record(cfg, trainer, data, t0=0.0)
        experiments.append_result(out, record)
    else:
        record = experiments.run(cfg, out_dir=out)
    print(record.to_json())
    return 0


def _cmd_eval(args) -> int:
    cfg = config_from_args(args)
    record = experiments.evaluate_checkpoint(cfg, args.checkpoint, out_dir=cfg.out_dir)
    print(record.to_json())
    return 0


def _cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    rows = experiments.sweep_splits(cfg, splits, out_dir=cfg.out_dir)
    print(json.dumps(rows))
    return 0


def _cmd_ablate(args) -> int:
    cfg = config_from_args(args)
    record = experiments.ablate(cfg, args.which, out_dir=cfg.out_dir)
    print(record.to_json())
    return 0


def _cmd_migrate(args) -> int:
    cfg = config_from_args(args)
    record = experiments.migrate(args.home_checkpoint, cfg, out_dir=cfg.out_dir)
    print(record.to_json())
    return 0


def _cmd_semi(args) -> int:
    cfg = config_from_args(args)
    record = experiments.run(cfg, out_dir=cfg.out_dir)
    print(record.to_json())
    return 0


def _cmd_export(args) -> int:
    cfg = config_from_args(args)
    data = experiments.load_task_data(cfg)
    trainer = experiments.build_trainer(cfg, data)
    trainer.restore(args.checkpoint)
    path = experiments.export_features(
        trainer.model, data["source_test"], data["target_test"], args.layer, args.out_file,
        task=f"{cfg.source}->{cfg.target}",
    )
    print(f"wrote {path}")
    return 0


def _cmd_plot(args) -> int:
    from . import plots

    cfg = config_from_args(args)
    out = Path(cfg.out_dir)
    emitted = []
    metrics_path = Path(args.metrics) if args.metrics else out / "metrics.jsonl"
    if metrics_path.exists():
        emitted.append(plots.plot_training_curves(metrics_path, out / "training_curves.png"))
    results_path = Path(args.results) if args.results else out / "results.jsonl"
    if results_path.exists():
        records = [json.loads(line) for line in results_path.read_text().splitlines() if line.strip()]
        if records:
            emitted.append(plots.plot_accuracy_bars(records, out / "accuracy_bars.png"))
    if not emitted:
        print("nothing to plot: no metrics.jsonl or results.jsonl found", file=sys.stderr)
        return 1
    for p in emitted:
        print(f"wrote {p}")
    return 0


_COMMANDS = {
    "prepare-data": _cmd_prepare,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
    "migrate": _cmd_migrate,
    "semi": _cmd_semi,
    "export-features": _cmd_export,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    from .runtime import configure_torch

    configure_torch()
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CrossgraftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
