"""Shared fixtures: small trained models with exact enumeration oracles.

The heavyweight fixtures are session-scoped and lazy, so module tests that
do not need a trained model stay fast.  Seeds are frozen everywhere; every
fixture is deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pytest
import torch

from pwguess import (Corpus, FilterPolicy, ModelConfig, MonteCarloEstimator,
                     TrainingConfig, Vocabulary, build_estimator,
                     corpus_from_passwords, pretrain)

torch.set_num_threads(1)

TOY_CHARSET = "abcdefgh"
TOY_MAX_LEN = 5


def skewed_passwords(n: int, seed: int, charset: str = TOY_CHARSET,
                     weights=None, lengths=(3, 4, 5),
                     length_probs=(0.5, 0.3, 0.2)) -> list[str]:
    """Draw i.i.d. passwords with skewed character and length distributions."""
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = np.array([0.30, 0.22, 0.15, 0.11, 0.08, 0.06, 0.05, 0.03])
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    ls = rng.choice(list(lengths), size=n, p=list(length_probs))
    flat = rng.choice(len(charset), size=int(ls.sum()), p=weights)
    out, pos = [], 0
    for L in ls:
        out.append("".join(charset[i] for i in flat[pos : pos + L]))
        pos += L
    return out


def letter_passwords(n: int, seed: int) -> list[str]:
    """Language A of the transfer experiment: skewed letters a-j, length 4-7."""
    return skewed_passwords(
        n, seed, charset="abcdefghij",
        weights=[0.26, 0.20, 0.14, 0.11, 0.09, 0.07, 0.05, 0.04, 0.02, 0.02],
        lengths=(4, 5, 6, 7), length_probs=(0.35, 0.3, 0.2, 0.15))


def digit_passwords(n: int, seed: int) -> list[str]:
    """Language B: six digits with a strong successor-chain structure."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        d = int(rng.integers(10))
        chars = [str(d)]
        for _ in range(5):
            if rng.random() < 0.7:
                d = (d + 1) % 10
            else:
                d = int(rng.integers(10))
            chars.append(str(d))
        out.append("".join(chars))
    return out


@dataclass
class ToyWorld:
    """A fully enumerable trained model plus its exact rank oracle."""

    vocab: Vocabulary
    cfg: ModelConfig
    model: object
    policy: FilterPolicy
    train_corpus: Corpus
    enum_strings: list[str]
    enum_logps: np.ndarray
    enum_sorted_desc: np.ndarray
    total_mass: float
    estimator: MonteCarloEstimator

    def true_rank(self, logp: float) -> int:
        """Exact count of enumerated strings strictly more probable."""
        ascending = self.enum_sorted_desc[::-1]
        return len(ascending) - int(np.searchsorted(ascending, logp, side="right"))

    def true_ranks(self, logps) -> np.ndarray:
        ascending = self.enum_sorted_desc[::-1]
        return len(ascending) - np.searchsorted(ascending, logps, side="right")


@pytest.fixture(scope="session")
def toy_world() -> ToyWorld:
    vocab = Vocabulary(TOY_CHARSET)
    policy = FilterPolicy(min_length=1, max_length=TOY_MAX_LEN, charset=TOY_CHARSET)
    train = corpus_from_passwords(skewed_passwords(40000, seed=11), "toy-train",
                                  policy)
    cfg = ModelConfig(layers=2, embed_dim=32, intermediate_dim=64, heads=2,
                      vocab_size=len(vocab), max_positions=TOY_MAX_LEN + 2)
    tc = TrainingConfig(epochs=6, batch_size=128, learning_rate=2e-3,
                        lr_schedule="constant", seed=5)
    model, _ = pretrain(cfg, train, tc, vocab=vocab)
    model.eval()

    strings = [""]
    for L in range(1, TOY_MAX_LEN + 1):
        strings.extend("".join(t) for t in itertools.product(TOY_CHARSET, repeat=L))
    logps = model.log_prob_batch(strings, batch_size=2048)
    order = np.sort(logps)[::-1].copy()
    total_mass = float(np.exp(logps).sum())

    estimator = build_estimator(model, 50000, seed=77, model_id="toy-transformer")
    return ToyWorld(vocab=vocab, cfg=cfg, model=model, policy=policy,
                    train_corpus=train, enum_strings=strings, enum_logps=logps,
                    enum_sorted_desc=order, total_mass=total_mass,
                    estimator=estimator)


@dataclass
class FourStringWorld:
    model: object
    target: dict[str, float]
    vocab: Vocabulary


@pytest.fixture(scope="session")
def four_string_world() -> FourStringWorld:
    """A model trained to convergence on a known 4-string distribution."""
    vocab = Vocabulary("abc")
    policy = FilterPolicy(min_length=3, max_length=3, charset="abc")
    target = {"aab": 0.4, "abc": 0.3, "bca": 0.2, "cab": 0.1}
    passwords = []
    for pw, frac in target.items():
        passwords.extend([pw] * int(frac * 2000))
    rng = np.random.default_rng(3)
    passwords = [passwords[i] for i in rng.permutation(len(passwords))]
    corpus = corpus_from_passwords(passwords, "four-strings", policy)
    cfg = ModelConfig(layers=2, embed_dim=32, intermediate_dim=64, heads=2,
                      vocab_size=len(vocab), max_positions=6)
    tc = TrainingConfig(epochs=12, batch_size=128, learning_rate=2e-3,
                        lr_schedule="constant", seed=9)
    model, _ = pretrain(cfg, corpus, tc, vocab=vocab)
    model.eval()
    return FourStringWorld(model=model, target=target, vocab=vocab)


TRANSFER_CHARSET = "abcdefghij0123456789"


@dataclass
class TransferWorld:
    checkpoint_path: str
    vocab: Vocabulary
    cfg: ModelConfig
    policy: FilterPolicy
    pretrain_size: int
    heldout_b: Corpus
    finetune_b: Corpus
    finetune_a: Corpus


@pytest.fixture(scope="session")
def transfer_world(tmp_path_factory) -> TransferWorld:
    """Two-language pretraining world: 90% letters (A), 10% digits (B)."""
    from pwguess import save_checkpoint

    vocab = Vocabulary(TRANSFER_CHARSET)
    policy = FilterPolicy(min_length=4, max_length=8, charset=TRANSFER_CHARSET)
    n_total = 20000
    a = letter_passwords(int(n_total * 0.9), seed=21)
    b = digit_passwords(n_total - len(a), seed=22)
    mixed = a + b
    rng = np.random.default_rng(23)
    mixed = [mixed[i] for i in rng.permutation(len(mixed))]
    train = corpus_from_passwords(mixed, "mixture", policy)

    cfg = ModelConfig(layers=2, embed_dim=32, intermediate_dim=64, heads=2,
                      vocab_size=len(vocab), max_positions=10)
    tc = TrainingConfig(epochs=3, batch_size=128, learning_rate=2e-3,
                        lr_schedule="constant", seed=31)
    model, _ = pretrain(cfg, train, tc, vocab=vocab)
    path = tmp_path_factory.mktemp("transfer") / "pretrained.ckpt"
    save_checkpoint(model, path)

    heldout_b = corpus_from_passwords(digit_passwords(1000, seed=41),
                                      "heldout-b", policy)
    finetune_b = corpus_from_passwords(digit_passwords(20, seed=42),
                                       "finetune-b", policy)
    finetune_a = corpus_from_passwords(letter_passwords(20, seed=43),
                                       "finetune-a", policy)
    return TransferWorld(checkpoint_path=str(path), vocab=vocab, cfg=cfg,
                         policy=policy, pretrain_size=len(train),
                         heldout_b=heldout_b, finetune_b=finetune_b,
                         finetune_a=finetune_a)
