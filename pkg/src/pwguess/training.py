"""Pretraining and finetuning loops with reproducible schedules.

Both entry points minimize mean negative log-likelihood per predicted token
(padding excluded) with decoupled weight decay, under either a constant
learning rate or linear warmup followed by linear decay.  Seeds control
initialization, per-epoch shuffling, and dropout; the determinism flag
additionally pins the thread count so repeated runs produce bit-identical
checkpoints on the same platform.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .corpus import Corpus
from .errors import TrainingError
from .model import DecoderModel, ModelConfig, load_checkpoint, sequence_nll
from .vocab import Vocabulary

PRETRAIN_LR = 5e-4
FINETUNE_LR = 5e-5


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float | None = None
    lr_schedule: str = "linear-warmup-decay"
    warmup_steps: int | None = None
    weight_decay: float = 0.01
    seed: int = 0
    mode: str = "pretrain"
    deterministic: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("epochs and batch_size must be at least 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise TrainingError("learning_rate must be positive")
        if self.lr_schedule not in ("constant", "linear-warmup-decay"):
            raise TrainingError(
                f"unknown lr_schedule {self.lr_schedule!r}; "
                "choose constant or linear-warmup-decay"
            )
        if self.mode not in ("pretrain", "finetune"):
            raise TrainingError(f"mode must be pretrain or finetune, got {self.mode!r}")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return FINETUNE_LR if self.mode == "finetune" else PRETRAIN_LR


@dataclass
class StepRecord:
    epoch: int
    step: int
    loss: float
    lr: float
    timestamp: float

    def as_dict(self) -> dict:
        return {"epoch": self.epoch, "step": self.step, "loss": self.loss,
                "lr": self.lr, "timestamp": self.timestamp}


@dataclass
class TrainingReport:
    epoch_losses: list[float] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    checkpoint_path: str | None = None
    eval_loss_before: float | None = None
    eval_loss_after: float | None = None

    @property
    def final_loss(self) -> float:
        if not self.epoch_losses:
            raise TrainingError("no epochs were recorded")
        return self.epoch_losses[-1]

    def write_jsonl(self, path) -> None:
        import json

        with open(path, "w", encoding="utf-8") as f:
            for rec in self.steps:
                f.write(json.dumps(rec.as_dict(), sort_keys=True) + "\n")


def _lr_factor(step: int, total: int, warmup: int) -> float:
    """Linear ramp to 1 over the warmup, then linear decay toward 0."""
    if step < warmup:
        return (step + 1) / max(warmup, 1)
    if total <= warmup:
        return 1.0
    return max(0.0, (total - step) / (total - warmup))


def _run_training(model: DecoderModel, data: Corpus, tc: TrainingConfig,
                  eval_corpus: Corpus | None = None) -> TrainingReport:
    if len(data) < tc.batch_size:
        raise TrainingError(
            f"corpus of {len(data)} passwords is smaller than one batch "
            f"({tc.batch_size}); shrink batch_size or grow the corpus"
        )
    if tc.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(tc.seed)
    shuffle_rng = np.random.default_rng(tc.seed)

    lr = tc.resolved_learning_rate
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr,
                                  weight_decay=tc.weight_decay)
    steps_per_epoch = len(data) // tc.batch_size
    total_steps = steps_per_epoch * tc.epochs
    if tc.lr_schedule == "linear-warmup-decay":
        warmup = tc.warmup_steps if tc.warmup_steps is not None \
            else max(1, round(0.01 * total_steps))
        scheduler = torch.optim.lr_scheduler.LambdaLR(
            optimizer, lambda s: _lr_factor(s, total_steps, warmup))
    else:
        scheduler = None

    report = TrainingReport()
    started = time.time()
    passwords = data.passwords
    global_step = 0
    for epoch in range(tc.epochs):
        model.train()
        order = shuffle_rng.permutation(len(passwords))
        epoch_nll, epoch_tokens = 0.0, 0
        for b in range(steps_per_epoch):
            batch = [passwords[i] for i in order[b * tc.batch_size:(b + 1) * tc.batch_size]]
            ids = model.encode_batch(batch)
            loss = sequence_nll(model, ids, reduction="mean")
            optimizer.zero_grad()
            loss.backward()
            step_lr = optimizer.param_groups[0]["lr"]
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            step_loss = float(loss.detach())
            n_targets = int((ids[:, 1:] != model.vocab.pad_id).sum())
            epoch_nll += step_loss * n_targets
            epoch_tokens += n_targets
            report.steps.append(StepRecord(
                epoch=epoch, step=global_step, loss=step_loss,
                lr=step_lr, timestamp=time.time()))
            global_step += 1
        report.epoch_losses.append(epoch_nll / max(epoch_tokens, 1))
    report.wall_clock_seconds = time.time() - started
    if eval_corpus is not None:
        report.eval_loss_after = model.mean_cross_entropy(eval_corpus.passwords)
    return report


def pretrain(cfg: ModelConfig, data: Corpus, tc: TrainingConfig,
             vocab: Vocabulary | None = None,
             eval_corpus: Corpus | None = None) -> tuple[DecoderModel, TrainingReport]:
    """Train a freshly initialized model on the corpus."""
    if tc.mode != "pretrain":
        raise TrainingError(f"pretrain called with mode {tc.mode!r}")
    model = DecoderModel(cfg, vocab, seed=tc.seed)
    report = _run_training(model, data, tc, eval_corpus)
    return model, report


def finetune(checkpoint_path, data: Corpus, tc: TrainingConfig,
             eval_corpus: Corpus | None = None) -> tuple[DecoderModel, TrainingReport]:
    """Continue training a checkpointed model on a new corpus.

    All weights stay trainable; the default learning rate is one tenth of the
    pretraining default.  When an eval corpus is given, its cross-entropy is
    recorded before and after so transfer effects are visible in the report.
    """
    if tc.mode != "finetune":
        raise TrainingError(f"finetune called with mode {tc.mode!r}")
    model = load_checkpoint(checkpoint_path)
    before = model.mean_cross_entropy(eval_corpus.passwords) if eval_corpus else None
    report = _run_training(model, data, tc, eval_corpus)
    report.eval_loss_before = before
    return model, report
