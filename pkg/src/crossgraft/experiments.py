"""Study harness: adaptation runs, reference bounds, distance reports,
split sweeps, ablations, cross-task migration, semi-supervised runs and
feature export.

A run directory is self-describing: resolved config + hash, metrics.jsonl,
checkpoint.pt and results.jsonl suffice to reproduce the run bit-exactly.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .alignment import AlignedTransitions
from .config import RunConfig, config_hash, write_run_dir
from .datasets import ArrayDataset, BatchFeed, DatasetSpec, eval_batches, load_dataset
from .errors import ConfigError
from .model import TransitionModel
from .references import FULL_SCALE_REFERENCE
from .taskhead import evaluate as channel_accuracy
from .trainer import ClassifierTrainer, MetricsWriter, Trainer, derive_seed, make_generator

RESULTS_SCHEMA_VERSION = 1
EVAL_BATCH = 256


@dataclass
class ResultRecord:
    accuracy_st: float
    accuracy_ts: float
    l2_raw: float | None
    l2_transition: float | None
    l2_aligned: float | None
    config_hash: str
    mode: str
    source: str
    target: str
    split: str
    steps: int
    seed: int
    data_source: str
    runtime: float
    tag: str = ""
    reference_delta: dict | None = None
    schema_version: int = RESULTS_SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))


def append_result(out_dir: str | Path, record: ResultRecord) -> None:
    path = Path(out_dir) / "results.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as f:
        f.write(record.to_json() + "\n")


# -- data assembly -----------------------------------------------------------


def load_task_data(cfg: RunConfig) -> dict[str, ArrayDataset]:
    d = cfg.data
    kw = dict(data_dir=d.dir, backgrounds_dir=d.backgrounds_dir)
    data = {
        "source_train": load_dataset(DatasetSpec(cfg.source, "train", d.source_cap, d.seed), **kw),
        "target_train": load_dataset(DatasetSpec(cfg.target, "train", d.target_cap, d.seed), **kw),
        "source_test": load_dataset(DatasetSpec(cfg.source, "test", d.eval_cap, d.seed), **kw),
        "target_test": load_dataset(DatasetSpec(cfg.target, "test", d.eval_cap, d.seed), **kw),
    }
    if cfg.mode == "semi_supervised":
        subset = data["target_train"].subset_per_class(cfg.labeled_target_per_class, cfg.seed)
        data["source_train"] = ArrayDataset.concatenate(data["source_train"], subset)
    return data


def build_feeds(cfg: RunConfig, data: dict[str, ArrayDataset]) -> tuple[BatchFeed, BatchFeed]:
    ch = cfg.arch.in_channels
    feed_s = BatchFeed(
        data["source_train"], cfg.hparams.batch_size, derive_seed(cfg.seed, "order-source"),
        channels=ch, with_labels=True,
    )
    feed_t = BatchFeed(
        data["target_train"], cfg.hparams.batch_size, derive_seed(cfg.seed, "order-target"),
        channels=ch, with_labels=False,  # unsupervised: target labels never enter training
    )
    return feed_s, feed_t


def build_trainer(cfg: RunConfig, data: dict[str, ArrayDataset], *, frozen_groups=()) -> Trainer:
    run_cfg = cfg
    if cfg.mode == "ablate_content":
        run_cfg = dataclasses.replace(cfg, hparams=dataclasses.replace(cfg.hparams, lambda_content=0.0))
    feed_s, feed_t = build_feeds(run_cfg, data)
    return Trainer(run_cfg, feed_s, feed_t, use_gan=cfg.mode != "ablate_gan", frozen_groups=frozen_groups)


# -- evaluation ---------------------------------------------------------------


@torch.no_grad()
def evaluate_adaptation(model: TransitionModel, target_test: ArrayDataset, *, aligned: bool = True) -> tuple[float, float]:
    """Accuracy of the classifier on target-initiated transitions, per channel.

    Target labels are consumed here only (test-time metric). `aligned=False`
    evaluates raw transitions (the no-alignment ablation).
    """
    was_training = model.training
    model.eval()
    target_test.audit.phase = "eval"
    hits = {"st": 0.0, "ts": 0.0}
    total = 0
    ch = model.arch.in_channels
    for batch in eval_batches(target_test, EVAL_BATCH, channels=ch, with_labels=True):
        n = len(batch)
        z_t = model.encode(batch.images, "t", eps=torch.zeros(n, model.arch.latent_dim))
        x_t_st = model.graft_st(z_t.sample)
        x_t_ts = model.graft_ts(z_t.sample)
        if aligned:
            pair = AlignedTransitions(model.gen_st(x_t_st), model.gen_ts(x_t_ts))
        else:
            pair = AlignedTransitions(x_t_st, x_t_ts)
        for chan in ("st", "ts"):
            hits[chan] += channel_accuracy(model.classifier, chan, pair, batch.labels) * n
        total += n
    target_test.audit.phase = "train"
    if was_training:
        model.train()
    return hits["st"] / total, hits["ts"] / total


@torch.no_grad()
def l2_report(model: TransitionModel, source_test: ArrayDataset, target_test: ArrayDataset) -> tuple[float, float, float]:
    """Mean squared distances over paired test batches, st channel:
    (raw domains, transitions, transitions after alignment)."""
    was_training = model.training
    model.eval()
    ch = model.arch.in_channels
    sums = np.zeros(3)
    count = 0
    s_iter = eval_batches(source_test, EVAL_BATCH, channels=ch, with_labels=False)
    t_iter = eval_batches(target_test, EVAL_BATCH, channels=ch, with_labels=False)
    for bs, bt in zip(s_iter, t_iter):
        n = min(len(bs), len(bt))
        x_s, x_t = bs.images[:n], bt.images[:n]
        z_s = model.encode(x_s, "s", eps=torch.zeros(n, model.arch.latent_dim))
        z_t = model.encode(x_t, "t", eps=torch.zeros(n, model.arch.latent_dim))
        x_s_st = model.graft_st(z_s.sample)
        x_t_st = model.graft_st(z_t.sample)
        aligned = model.gen_st(x_t_st)
        sums += np.array(
            [
                float((x_s - x_t).pow(2).mean()) * n,
                float((x_s_st - x_t_st).pow(2).mean()) * n,
                float((x_s_st - aligned).pow(2).mean()) * n,
            ]
        )
        count += n
    if was_training:
        model.train()
    raw, transition, aligned_d = (sums / max(count, 1)).tolist()
    return raw, transition, aligned_d


# -- run ----------------------------------------------------------------------


def _reference_delta(cfg: RunConfig, acc_st: float, acc_ts: float) -> dict | None:
    if cfg.profile != "full":
        return None
    ref = FULL_SCALE_REFERENCE.get((cfg.source, cfg.target))
    if not ref:
        return None
    out = {}
    if "datl_st" in ref:
        out["accuracy_st_minus_reference"] = round(acc_st - ref["datl_st"], 4)
    if "datl_ts" in ref:
        out["accuracy_ts_minus_reference"] = round(acc_ts - ref["datl_ts"], 4)
    return out or None


def run(cfg: RunConfig, *, out_dir: str | Path | None = None) -> ResultRecord:
    """Train per mode, evaluate both channels, persist and return the record."""
    t0 = time.time()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    write_run_dir(cfg, out)
    data = load_task_data(cfg)
    metrics = MetricsWriter(out / "metrics.jsonl")

    if cfg.mode in ("source_only", "target_only"):
        train_ds = data["source_train"] if cfg.mode == "source_only" else data["target_train"]
        if cfg.mode == "target_only":
            train_ds.audit.phase = "eval"  # bound mode: target labels are sanctioned
        feed = BatchFeed(
            train_ds, cfg.hparams.batch_size, derive_seed(cfg.seed, "order-source"),
            channels=cfg.arch.in_channels, with_labels=True,
        )
        ct = ClassifierTrainer(cfg, feed)
        ct.fit(cfg.steps, metrics)
        acc = ct.evaluate(data["target_test"])
        raw = _raw_l2(cfg, data)
        record = ResultRecord(
            accuracy_st=acc, accuracy_ts=acc,
            l2_raw=raw, l2_transition=None, l2_aligned=None,
            config_hash=config_hash(cfg), mode=cfg.mode, source=cfg.source, target=cfg.target,
            split=cfg.split, steps=cfg.steps, seed=cfg.seed,
            data_source=data["source_train"].source, runtime=time.time() - t0,
        )
    else:
        trainer = build_trainer(cfg, data)
        trainer.fit(cfg.steps, metrics=metrics, checkpoint_path=out / "checkpoint.pt",
                    checkpoint_every=cfg.checkpoint_every)
        record = _evaluate_and_record(cfg, trainer, data, t0)
    metrics.close()
    append_result(out, record)
    return record


def _raw_l2(cfg: RunConfig, data: dict[str, ArrayDataset]) -> float:
    ch = cfg.arch.in_channels
    sums, count = 0.0, 0
    s_iter = eval_batches(data["source_test"], EVAL_BATCH, channels=ch, with_labels=False)
    t_iter = eval_batches(data["target_test"], EVAL_BATCH, channels=ch, with_labels=False)
    for bs, bt in zip(s_iter, t_iter):
        n = min(len(bs), len(bt))
        sums += float((bs.images[:n] - bt.images[:n]).pow(2).mean()) * n
        count += n
    return sums / max(count, 1)


def _evaluate_and_record(cfg: RunConfig, trainer: Trainer, data: dict[str, ArrayDataset], t0: float,
                         tag: str = "") -> ResultRecord:
    aligned = cfg.mode != "ablate_gan"
    acc_st, acc_ts = evaluate_adaptation(trainer.model, data["target_test"], aligned=aligned)
    l2_raw, l2_tr, l2_al = l2_report(trainer.model, data["source_test"], data["target_test"])
    return ResultRecord(
        accuracy_st=acc_st, accuracy_ts=acc_ts,
        l2_raw=l2_raw, l2_transition=l2_tr, l2_aligned=l2_al,
        config_hash=config_hash(cfg), mode=cfg.mode, source=cfg.source, target=cfg.target,
        split=cfg.split, steps=cfg.steps, seed=cfg.seed,
        data_source=data["source_train"].source, runtime=time.time() - t0, tag=tag,
        reference_delta=_reference_delta(cfg, acc_st, acc_ts),
    )


def evaluate_checkpoint(cfg: RunConfig, checkpoint_path: str | Path, *, out_dir: str | Path | None = None) -> ResultRecord:
    """Evaluate a stored checkpoint without further training."""
    t0 = time.time()
    data = load_task_data(cfg)
    trainer = build_trainer(cfg, data)
    trainer.restore(checkpoint_path)
    record = _evaluate_and_record(cfg, trainer, data, t0)
    if out_dir is not None:
        append_result(out_dir, record)
    return record


# -- studies -------------------------------------------------------------------


def sweep_splits(cfg: RunConfig, splits: list[str], *, out_dir: str | Path | None = None) -> list[dict]:
    """One run per split; returns a table of per-channel accuracies."""
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    rows = []
    for split in splits:
        sub_cfg = dataclasses.replace(cfg, split=split, out_dir=str(out / f"split_{split}"))
        record = run(sub_cfg)
        rows.append({"split": split, "accuracy_st": record.accuracy_st, "accuracy_ts": record.accuracy_ts})
    table_path = out / "sweep.csv"
    table_path.parent.mkdir(parents=True, exist_ok=True)
    with open(table_path, "w") as f:
        f.write("split,accuracy_st,accuracy_ts\n")
        for r in rows:
            f.write(f"{r['split']},{r['accuracy_st']:.4f},{r['accuracy_ts']:.4f}\n")
    from .plots import plot_sweep

    plot_sweep(rows, out / "sweep.png")
    return rows


def ablate(cfg: RunConfig, which: str, *, out_dir: str | Path | None = None) -> ResultRecord:
    if which not in ("content", "gan"):
        raise ConfigError(f"ablate: expected 'content' or 'gan', got {which!r}")
    mode = "ablate_content" if which == "content" else "ablate_gan"
    sub = dataclasses.replace(cfg, mode=mode, labeled_target_per_class=None)
    return run(sub, out_dir=out_dir)


def migrate(home_checkpoint: str | Path, cfg: RunConfig, *, out_dir: str | Path | None = None) -> ResultRecord:
    """Fine-tune a pretrained model on a new task with the grafted decoder
    stacks frozen; only encoder, adversarial pairs and classifier move."""
    t0 = time.time()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    write_run_dir(cfg, out)
    data = load_task_data(cfg)
    trainer = build_trainer(cfg, data, frozen_groups=("decoder",))
    trainer.load_weights(home_checkpoint)
    metrics = MetricsWriter(out / "metrics.jsonl")
    trainer.fit(cfg.steps, metrics=metrics, checkpoint_path=out / "checkpoint.pt")
    metrics.close()
    record = _evaluate_and_record(cfg, trainer, data, t0, tag=f"migrated-from:{Path(home_checkpoint)}")
    append_result(out, record)
    return record


def semi_supervised(cfg: RunConfig, labeled_target_per_class: int, *, out_dir: str | Path | None = None) -> ResultRecord:
    sub = dataclasses.replace(cfg, mode="semi_supervised", labeled_target_per_class=labeled_target_per_class)
    return run(sub, out_dir=out_dir)


# -- feature export -------------------------------------------------------------


LAYERS = ("raw", "transition", "aligned")


@torch.no_grad()
def export_features(
    model: TransitionModel,
    source_test: ArrayDataset,
    target_test: ArrayDataset,
    layer: str,
    out_path: str | Path,
    *,
    max_samples: int = 2_000,
    task: str = "",
) -> Path:
    """Write flattened representations plus domain tags for external
    embedding tools. Tag 0 = source-initiated, 1 = target-initiated."""
    if layer not in LAYERS:
        raise ConfigError(f"export_features: layer must be one of {LAYERS}, got {layer!r}")
    was_training = model.training
    model.eval()
    ch = model.arch.in_channels
    feats: list[np.ndarray] = []
    tags: list[np.ndarray] = []
    per_domain = max_samples // 2
    for tag, ds, domain in ((0, source_test, "s"), (1, target_test, "t")):
        taken = 0
        for batch in eval_batches(ds, EVAL_BATCH, channels=ch, with_labels=False):
            x = batch.images[: per_domain - taken]
            if len(x) == 0:
                break
            if layer == "raw":
                rep = x
            else:
                z = model.encode(x, domain, eps=torch.zeros(len(x), model.arch.latent_dim))
                rep = model.graft_st(z.sample)
                if layer == "aligned" and domain == "t":
                    rep = model.gen_st(rep)
            feats.append(rep.flatten(1).numpy().astype(np.float32))
            tags.append(np.full(len(x), tag, dtype=np.int8))
            taken += len(x)
            if taken >= per_domain:
                break
    features = np.concatenate(feats, axis=0)
    domain_tag = np.concatenate(tags, axis=0)
    meta = {"n": int(features.shape[0]), "d": int(features.shape[1]), "layer": layer, "task": task}
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez(out, features=features, domain_tag=domain_tag, meta=json.dumps(meta))
    if was_training:
        model.train()
    return out if out.suffix == ".npz" else out.with_suffix(out.suffix + ".npz")
