"""Three-phase alternating training.

Per step: (1) the VAE phase updates encoder+decoder on the within-domain
objective; (2) the discriminator phase updates discriminators+classifier on
the negated adversarial value plus the task loss; (3) the generator phase
updates generators+encoder on the non-saturating surrogate plus content and
task terms. Groups outside a phase's update set are untouched (enforced by
requires_grad gating and per-group optimizers).

Checkpoints are versioned, checksummed containers restoring parameters,
optimizer moments, step counter, noise-stream position and data-feed
cursors bit-exactly.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import torch

from .alignment import content_loss
from .autoencoding import encode, vae_loss
from .config import HParams, RunConfig
from .datasets import BatchFeed, LabeledBatch, eval_batches
from .errors import CheckpointError, ConfigError, ContractError, DivergenceError
from .model import GROUP_NAMES, TransitionModel
from .networks import ClassifierHead, init_parameters, trunk_block

CHECKPOINT_VERSION = 1


def derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def make_generator(seed: int, label: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(derive_seed(seed, label))
    return g


def lr_at(step: int, hp: HParams) -> float:
    """Step-decayed learning rate: lr0 * decay^(step // decay_every)."""
    if step < 0:
        raise ContractError(f"step must be >= 0, got {step}")
    return hp.lr0 * hp.lr_decay ** (step // hp.lr_decay_every)


@dataclass(frozen=True)
class PhaseSpec:
    name: str
    groups: tuple[str, ...]
    inner_iters: int = 1


def build_phases(use_gan: bool, inner_iters: tuple[int, int, int]) -> tuple[PhaseSpec, ...]:
    if use_gan:
        return (
            PhaseSpec("vae", ("encoder", "decoder"), inner_iters[0]),
            PhaseSpec("disc", ("discriminator", "classifier"), inner_iters[1]),
            PhaseSpec("gen", ("generator", "encoder"), inner_iters[2]),
        )
    return (
        PhaseSpec("vae", ("encoder", "decoder"), inner_iters[0]),
        PhaseSpec("cls", ("classifier",), inner_iters[1]),
    )


@dataclass
class StepTensors:
    """One step's shared generation: latents, transitions, aligned images."""

    z_s: object
    z_t: object
    ts: "TransitionSet"
    aligned: "AlignedTransitions"

    def detached(self) -> "StepTensors":
        from .alignment import AlignedTransitions
        from .grafting import TransitionSet

        ts = TransitionSet(*(t.detach() for t in (self.ts.x_s_st, self.ts.x_t_st, self.ts.x_s_ts, self.ts.x_t_ts)))
        al = AlignedTransitions(self.aligned.x_t_st_aligned.detach(), self.aligned.x_t_ts_aligned.detach())
        return StepTensors(self.z_s, self.z_t, ts, al)


def generate_step_tensors(
    model: TransitionModel,
    x_s: torch.Tensor,
    x_t: torch.Tensor,
    eps_s: torch.Tensor,
    eps_t: torch.Tensor,
) -> StepTensors:
    """Encode both domains and run each grafted decoder once on the stacked
    latents (one pass instead of two per graft)."""
    from .alignment import AlignedTransitions
    from .grafting import TransitionSet

    n = x_s.shape[0]
    if x_t.shape[0] != n:
        raise ContractError(f"source/target batch sizes differ: {n} vs {x_t.shape[0]}")
    z_s = encode(model.encoders, x_s, "s", eps=eps_s)
    z_t = encode(model.encoders, x_t, "t", eps=eps_t)
    z_all = torch.cat([z_s.sample, z_t.sample], dim=0)
    st_all = model.graft_st(z_all)
    ts_all = model.graft_ts(z_all)
    ts = TransitionSet(x_s_st=st_all[:n], x_t_st=st_all[n:], x_s_ts=ts_all[:n], x_t_ts=ts_all[n:])
    aligned = AlignedTransitions(model.gen_st(ts.x_t_st), model.gen_ts(ts.x_t_ts))
    return StepTensors(z_s, z_t, ts, aligned)


def _batched_task_loss(model: TransitionModel, ts, labels_s: torch.Tensor) -> torch.Tensor:
    import torch.nn.functional as F

    n_classes = model.classifier.head.out_features
    if labels_s.min() < 0 or labels_s.max() >= n_classes:
        raise ContractError(f"labels outside [0, {n_classes})")
    n = ts.x_s_st.shape[0]
    logits = model.classifier(torch.cat([ts.x_s_st, ts.x_s_ts], dim=0))
    return F.cross_entropy(logits[:n], labels_s) + F.cross_entropy(logits[n:], labels_s)


def _channel_disc(model: TransitionModel, channel: str, real: torch.Tensor, fake: torch.Tensor):
    import torch.nn.functional as F

    disc = model.disc_st if channel == "st" else model.disc_ts
    n = real.shape[0]
    logit = disc.logits(torch.cat([real, fake], dim=0))
    # log D(real) = -softplus(-l), log(1 - D(fake)) = -softplus(l): exact and
    # stable, and gradients survive discriminator saturation
    value = -F.softplus(-logit[:n]).mean() - F.softplus(logit[n:]).mean()
    return -value, value


def _real_fake(st: StepTensors, channel: str, real_player: str):
    real = st.ts.x_s_st if channel == "st" else st.ts.x_s_ts
    fake = st.aligned.x_t_st_aligned if channel == "st" else st.aligned.x_t_ts_aligned
    return (real, fake) if real_player == "source" else (fake, real)


def disc_objective(
    model: TransitionModel, st: StepTensors, labels_s: torch.Tensor, hp: HParams, real_player: str
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Discriminator phase: negated adversarial value plus the task loss."""
    loss_d1, v_st = _channel_disc(model, "st", *_real_fake(st, "st", real_player))
    loss_d2, v_ts = _channel_disc(model, "ts", *_real_fake(st, "ts", real_player))
    disc = hp.lambda_gan * (loss_d1 + loss_d2)
    task = _batched_task_loss(model, st.ts, labels_s)
    total = disc + task
    return total, {"disc": disc, "task": task, "adv": hp.lambda_gan * (v_st + v_ts)}


def gen_objective(
    model: TransitionModel, st: StepTensors, labels_s: torch.Tensor, hp: HParams, real_player: str
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Generator phase: non-saturating surrogate plus content and task terms."""
    import torch.nn.functional as F

    _, fake_st = _real_fake(st, "st", real_player)
    _, fake_ts = _real_fake(st, "ts", real_player)
    # -log D(fake) = softplus(-logit): the non-saturating surrogate
    loss_g1 = F.softplus(-model.disc_st.logits(fake_st)).mean()
    loss_g2 = F.softplus(-model.disc_ts.logits(fake_ts)).mean()
    gen = hp.lambda_gan * (loss_g1 + loss_g2)
    content = content_loss(st.ts, hp.lambda_content)
    task = _batched_task_loss(model, st.ts, labels_s)
    total = gen + content + task
    return total, {"gen": gen, "content": content, "task_gen": task}


def cls_objective(
    model: TransitionModel, st: StepTensors, labels_s: torch.Tensor
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """No-alignment ablation: classifier trains on raw source transitions."""
    task = _batched_task_loss(model, st.ts, labels_s)
    return task, {"task": task}


def phase_loss(
    model: TransitionModel,
    phase: str,
    batch_s: LabeledBatch,
    batch_t: LabeledBatch,
    hp: HParams,
    *,
    eps_s: torch.Tensor,
    eps_t: torch.Tensor,
    real_player: str = "source",
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Composite objective of one phase; the exact function the trainer
    descends (also the oracle surface for finite-difference checks)."""
    x_s, x_t = batch_s.images, batch_t.images
    if phase == "vae":
        total, comps = vae_loss(
            model.encoders, model.decoder_s, model.decoder_t, x_s, x_t, hp, eps_s=eps_s, eps_t=eps_t
        )
        return total, {"vae": total, "rec": comps["rec"], "prior": comps["prior"]}
    if phase in ("disc", "cls"):
        with torch.no_grad():
            st = generate_step_tensors(model, x_s, x_t, eps_s, eps_t)
        if phase == "cls":
            return cls_objective(model, st, batch_s.labels)
        return disc_objective(model, st, batch_s.labels, hp, real_player)
    if phase == "gen":
        st = generate_step_tensors(model, x_s, x_t, eps_s, eps_t)
        return gen_objective(model, st, batch_s.labels, hp, real_player)
    raise ContractError(f"unknown phase {phase!r}")


class MetricsWriter:
    """Append-only line-delimited records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a")

    def append(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_metrics(path: str | Path) -> list[dict]:
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                out.append(json.loads(line))
    return out


def metrics_equal(path_a: str | Path, path_b: str | Path) -> bool:
    """Record-wise equality ignoring wall_time (the only nondeterministic field)."""
    strip = lambda recs: [{k: v for k, v in r.items() if k != "wall_time"} for r in recs]
    return strip(read_metrics(path_a)) == strip(read_metrics(path_b))


class Trainer:
    """Owns one TrainState: model, per-group Adam moments, step, noise stream."""

    def __init__(
        self,
        cfg: RunConfig,
        feed_s: BatchFeed,
        feed_t: BatchFeed,
        *,
        use_gan: bool = True,
        frozen_groups: tuple[str, ...] = (),
        model: TransitionModel | None = None,
    ):
        self.cfg = cfg
        self.hp = cfg.hparams
        self.feed_s = feed_s
        self.feed_t = feed_t
        self.use_gan = use_gan
        self.frozen_groups = tuple(frozen_groups)
        self.phases = build_phases(use_gan, cfg.inner_iters)
        self.model = model or TransitionModel(
            cfg.arch, cfg.stack_split(), init_generator=make_generator(cfg.seed, "init")
        )
        self.noise_gen = make_generator(cfg.seed, "noise")
        self.step = 0
        self._groups = self.model.param_groups()
        for g in self.frozen_groups:
            if g not in GROUP_NAMES:
                raise ConfigError(f"frozen group {g!r} not one of {GROUP_NAMES}")
            for p in self._groups[g]:
                p.requires_grad_(False)
        self.optimizers = {
            name: torch.optim.Adam(
                params, lr=self.hp.lr0, betas=(self.hp.adam_beta1, self.hp.adam_beta2), foreach=True
            )
            for name, params in self._groups.items()
            if name not in self.frozen_groups and params
        }
        self.phase_hook = None  # optional callable(phase_name, model), used by audits
        self._apply_train_mode()

    def _apply_train_mode(self) -> None:
        self.model.train()
        if "decoder" in self.frozen_groups:
            # keep the grafted generator function fixed: no stat drift
            self.model.decoder_s.eval()
            self.model.decoder_t.eval()

    def _set_lr(self, lr: float) -> None:
        for opt in self.optimizers.values():
            for pg in opt.param_groups:
                pg["lr"] = lr

    def _gate_grads(self, active: tuple[str, ...]) -> None:
        for name, params in self._groups.items():
            flag = name in active and name not in self.frozen_groups
            for p in params:
                p.requires_grad_(flag)

    def _ungate_grads(self) -> None:
        for name, params in self._groups.items():
            flag = name not in self.frozen_groups
            for p in params:
                p.requires_grad_(flag)

    def _draw_eps(self, batch: LabeledBatch) -> torch.Tensor:
        return torch.randn((batch.images.shape[0], self.cfg.arch.latent_dim), generator=self.noise_gen)

    def _apply(self, phase: PhaseSpec, loss: torch.Tensor, comps: dict, record: dict) -> None:
        for cname, cval in comps.items():
            v = float(cval.detach())
            if not math.isfinite(v):
                raise DivergenceError(phase.name, cname, v)
            record[cname] = v
        loss.backward()
        for g in phase.groups:
            if g in self.optimizers:
                self.optimizers[g].step()

    def _begin(self, phase: PhaseSpec) -> None:
        self._gate_grads(phase.groups)
        for g in phase.groups:
            if g in self.optimizers:
                self.optimizers[g].zero_grad(set_to_none=True)

    def train_step(self) -> dict[str, float]:
        """One alternating step over fresh mini-batches; increments the counter.

        Transitions are generated once per step (after the VAE update, from
        the run's noise stream) and shared: the discriminator phase consumes
        detached views, the generator phase backpropagates through the graph.
        """
        batch_s = self.feed_s.next_batch()
        batch_t = self.feed_t.next_batch()
        lr = lr_at(self.step, self.hp)
        self._set_lr(lr)
        record: dict[str, float] = {}
        vae_phase, *rest = self.phases

        for _ in range(vae_phase.inner_iters):
            eps_s, eps_t = self._draw_eps(batch_s), self._draw_eps(batch_t)
            self._begin(vae_phase)
            loss, comps = phase_loss(
                self.model, "vae", batch_s, batch_t, self.hp, eps_s=eps_s, eps_t=eps_t
            )
            self._apply(vae_phase, loss, comps, record)
        self._ungate_grads()
        if self.phase_hook is not None:
            self.phase_hook("vae", self.model)

        eps_s, eps_t = self._draw_eps(batch_s), self._draw_eps(batch_t)
        self._gate_grads(tuple(g for p in rest for g in p.groups))
        shared = generate_step_tensors(self.model, batch_s.images, batch_t.images, eps_s, eps_t)
        self._ungate_grads()

        for phase in rest:
            for it in range(phase.inner_iters):
                self._begin(phase)
                if phase.name in ("disc", "cls"):
                    st = shared.detached()
                    obj = cls_objective(self.model, st, batch_s.labels) if phase.name == "cls" else \
                        disc_objective(self.model, st, batch_s.labels, self.hp, self.cfg.real_player)
                else:
                    if it > 0:  # the shared graph is consumed by the first backward
                        eps_s, eps_t = self._draw_eps(batch_s), self._draw_eps(batch_t)
                        shared = generate_step_tensors(
                            self.model, batch_s.images, batch_t.images, eps_s, eps_t
                        )
                    obj = gen_objective(self.model, shared, batch_s.labels, self.hp, self.cfg.real_player)
                self._apply(phase, obj[0], obj[1], record)
                self._ungate_grads()
            if self.phase_hook is not None:
                self.phase_hook(phase.name, self.model)

        self.step += 1
        record["lr"] = lr
        return record

    def fit(
        self,
        total_steps: int,
        *,
        metrics: MetricsWriter | None = None,
        checkpoint_path: str | Path | None = None,
        checkpoint_every: int = 0,
        stop_after_step: int | None = None,
    ) -> int:
        """Run until `total_steps` (or `stop_after_step`), appending one
        metrics record per step. Returns the final step count."""
        while self.step < total_steps:
            if stop_after_step is not None and self.step >= stop_after_step:
                break
            record = self.train_step()
            if metrics is not None:
                metrics.append({"step": self.step - 1, **record, "wall_time": time.time()})
            if checkpoint_path and checkpoint_every and self.step % checkpoint_every == 0:
                self.save_checkpoint(checkpoint_path)
        if checkpoint_path:
            self.save_checkpoint(checkpoint_path)
        return self.step

    # -- checkpointing -------------------------------------------------------

    def save_checkpoint(self, path: str | Path) -> None:
        from .config import config_hash
        import dataclasses

        payload = {
            "format_version": CHECKPOINT_VERSION,
            "config_hash": config_hash(self.cfg),
            "arch": dataclasses.asdict(self.cfg.arch),
            "split": str(self.cfg.stack_split()),
            "step": self.step,
            "seed": self.cfg.seed,
            "use_gan": self.use_gan,
            "frozen_groups": self.frozen_groups,
            "model": self.model.state_dict(),
            "optimizers": {k: v.state_dict() for k, v in self.optimizers.items()},
            "noise_rng": self.noise_gen.get_state(),
            "feeds": {"source": self.feed_s.state(), "target": self.feed_t.state()},
        }
        buf = io.BytesIO()
        torch.save(payload, buf)
        blob = buf.getvalue()
        envelope = {
            "format_version": CHECKPOINT_VERSION,
            "sha256": hashlib.sha256(blob).hexdigest(),
            "blob": blob,
        }
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(target.suffix + ".tmp")
        torch.save(envelope, tmp)
        tmp.replace(target)

    @staticmethod
    def read_checkpoint(path: str | Path) -> dict:
        target = Path(path)
        if not target.exists():
            raise CheckpointError(f"checkpoint missing: {target}")
        try:
            envelope = torch.load(target, weights_only=False)
        except Exception as exc:
            raise CheckpointError(f"checkpoint unreadable: {target}: {exc}") from exc
        if not isinstance(envelope, dict) or envelope.get("format_version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"checkpoint version mismatch: {target}")
        blob = envelope["blob"]
        if hashlib.sha256(blob).hexdigest() != envelope["sha256"]:
            raise CheckpointError(f"checkpoint checksum failure: {target}")
        return torch.load(io.BytesIO(blob), weights_only=False)

    def restore(self, path: str | Path) -> None:
        payload = self.read_checkpoint(path)
        import dataclasses

        if payload["arch"] != dataclasses.asdict(self.cfg.arch):
            raise CheckpointError(f"checkpoint architecture incompatible with run config: {path}")
        self.model.load_state_dict(payload["model"])
        for name, sd in payload["optimizers"].items():
            if name in self.optimizers:
                self.optimizers[name].load_state_dict(sd)
        self.noise_gen.set_state(payload["noise_rng"])
        self.feed_s.set_state(payload["feeds"]["source"])
        self.feed_t.set_state(payload["feeds"]["target"])
        self.step = payload["step"]
        self._apply_train_mode()

    def load_weights(self, path: str | Path) -> None:
        """Load model parameters only (cross-task migration); fresh moments."""
        payload = self.read_checkpoint(path)
        import dataclasses

        if payload["arch"] != dataclasses.asdict(self.cfg.arch):
            raise CheckpointError(f"checkpoint architecture incompatible with migration target: {path}")
        self.model.load_state_dict(payload["model"])
        self._apply_train_mode()


class ClassifierTrainer:
    """Plain supervised classifier on raw images (bounds and no-graft modes)."""

    def __init__(self, cfg: RunConfig, feed: BatchFeed):
        self.cfg = cfg
        self.hp = cfg.hparams
        self.feed = feed
        gen = make_generator(cfg.seed, "init-classifier")
        stem = trunk_block(cfg.arch.in_channels, cfg.arch.cls_widths[0], cfg.arch.image_size)
        self.classifier = ClassifierHead(cfg.arch, stem)
        init_parameters(self.classifier, gen)
        self.optimizer = torch.optim.Adam(
            self.classifier.parameters(), lr=self.hp.lr0, betas=(self.hp.adam_beta1, self.hp.adam_beta2)
        )
        self.step = 0

    def train_step(self) -> dict[str, float]:
        import torch.nn.functional as F

        batch = self.feed.next_batch()
        lr = lr_at(self.step, self.hp)
        for pg in self.optimizer.param_groups:
            pg["lr"] = lr
        self.optimizer.zero_grad(set_to_none=True)
        loss = F.cross_entropy(self.classifier(batch.images), batch.labels)
        v = float(loss.detach())
        if not math.isfinite(v):
            raise DivergenceError("cls", "cross_entropy", v)
        loss.backward()
        self.optimizer.step()
        self.step += 1
        return {"task": v, "lr": lr}

    def fit(self, total_steps: int, metrics: MetricsWriter | None = None) -> None:
        self.classifier.train()
        while self.step < total_steps:
            record = self.train_step()
            if metrics is not None:
                metrics.append({"step": self.step - 1, **record, "wall_time": time.time()})

    @torch.no_grad()
    def evaluate(self, dataset, batch_size: int = 256) -> float:
        self.classifier.eval()
        correct = total = 0
        for batch in eval_batches(dataset, batch_size, channels=self.cfg.arch.in_channels):
            pred = self.classifier(batch.images).argmax(dim=1)
            correct += int((pred == batch.labels).sum())
            total += len(batch)
        self.classifier.train()
        return correct / max(total, 1)
