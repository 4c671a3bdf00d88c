"""Causal transformer decoder over password characters.

The model is a standard pre-layer-norm decoder stack: learned token and
position embeddings are summed, each block applies masked multi-head
self-attention then a GELU feed-forward layer (both with residual
connections), and a final layer-norm feeds a linear head that shares its
weight matrix with the token embedding.  Probabilities are natural-log
throughout; base-10 conversions happen only at reporting boundaries.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointError, ModelConfigError, SequenceTooLongError
from .vocab import Vocabulary, default_vocabulary

CHECKPOINT_MAGIC = b"PWCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters for the decoder."""

    layers: int = 6
    embed_dim: int = 256
    intermediate_dim: int = 1024
    heads: int = 4
    vocab_size: int = 100
    max_positions: int = 64
    attention_dropout: float = 0.1
    tie_output_embedding: bool = True

    def __post_init__(self):
        if min(self.layers, self.embed_dim, self.intermediate_dim, self.heads) < 1:
            raise ModelConfigError("layers, dims, and heads must all be positive")
        if self.embed_dim % self.heads != 0:
            raise ModelConfigError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.vocab_size < 1:
            raise ModelConfigError("vocab_size must be positive")
        if self.max_positions < 3:
            raise ModelConfigError("max_positions must fit at least one character")
        if not 0.0 <= self.attention_dropout < 1.0:
            raise ModelConfigError("attention_dropout must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @classmethod
    def small(cls) -> "ModelConfig":
        return cls(layers=6, embed_dim=256, intermediate_dim=1024, heads=4,
                   vocab_size=100, max_positions=64)

    @classmethod
    def base(cls) -> "ModelConfig":
        return cls(layers=12, embed_dim=768, intermediate_dim=3072, heads=12,
                   vocab_size=100, max_positions=1024)

    @classmethod
    def preset(cls, name: str) -> "ModelConfig":
        try:
            return {"small": cls.small, "base": cls.base}[name.lower()]()
        except KeyError:
            raise ModelConfigError(f"unknown preset {name!r}; choose small or base") from None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(**d)
        except TypeError as e:
            raise ModelConfigError(f"bad config dict: {e}") from e


def parameter_count(cfg: ModelConfig) -> int:
    """Exact trainable parameter count for the decoder layout.

    Per block: Q, K, V, and output projections (each E*E + E), feed-forward
    up and down projections (E*I + I and I*E + E), and two layer-norms (2E
    each).  Plus token and position embeddings and the final layer-norm.
    """
    e, i, l = cfg.embed_dim, cfg.intermediate_dim, cfg.layers
    per_block = 4 * (e * e + e) + e * i + i + i * e + e + 4 * e
    total = cfg.vocab_size * e + cfg.max_positions * e + l * per_block + 2 * e
    if not cfg.tie_output_embedding:
        total += cfg.vocab_size * e
    return total


class DecoderBlock(nn.Module):
    """One pre-layer-norm block: masked self-attention then feed-forward."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        e = cfg.embed_dim
        self.cfg = cfg
        self.ln1 = nn.LayerNorm(e)
        self.q_proj = nn.Linear(e, e)
        self.k_proj = nn.Linear(e, e)
        self.v_proj = nn.Linear(e, e)
        self.out_proj = nn.Linear(e, e)
        self.attn_dropout = nn.Dropout(cfg.attention_dropout)
        self.ln2 = nn.LayerNorm(e)
        self.fc1 = nn.Linear(e, cfg.intermediate_dim)
        self.fc2 = nn.Linear(cfg.intermediate_dim, e)

    def attention(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, e = x.shape
        h, dk = self.cfg.heads, self.cfg.head_dim
        # (b, t, e) -> (b, h, t, dk) for each of q, k, v
        q = self.q_proj(x).view(b, t, h, dk).transpose(1, 2)
        k = self.k_proj(x).view(b, t, h, dk).transpose(1, 2)
        v = self.v_proj(x).view(b, t, h, dk).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(dk) + mask
        weights = self.attn_dropout(F.softmax(scores, dim=-1))
        y = (weights @ v).transpose(1, 2).reshape(b, t, e)
        return self.out_proj(y)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attention(self.ln1(x), mask)
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x


def causal_mask(seq_len: int) -> torch.Tensor:
    """0 on and below the diagonal, -inf strictly above (future positions)."""
    m = torch.zeros(seq_len, seq_len)
    return m.masked_fill(torch.triu(torch.ones(seq_len, seq_len, dtype=torch.bool), 1),
                         float("-inf"))


class DecoderModel(nn.Module):
    """The full decoder with tokenizer-aware scoring and sampling."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary | None = None, seed: int = 0):
        super().__init__()
        vocab = vocab or default_vocabulary()
        if len(vocab) != cfg.vocab_size:
            raise ModelConfigError(
                f"config vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}"
            )
        self.cfg = cfg
        self.vocab = vocab
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.embed_dim)
        self.pos_emb = nn.Embedding(cfg.max_positions, cfg.embed_dim)
        self.blocks = nn.ModuleList(DecoderBlock(cfg) for _ in range(cfg.layers))
        self.ln_f = nn.LayerNorm(cfg.embed_dim)
        if not cfg.tie_output_embedding:
            self.head = nn.Linear(cfg.embed_dim, cfg.vocab_size, bias=False)
        self.reset_parameters(seed)
        actual = sum(p.numel() for p in self.parameters())
        expected = parameter_count(cfg)
        if actual != expected:
            raise ModelConfigError(
                f"materialized {actual} parameters but the layout promises {expected}"
            )

    def reset_parameters(self, seed: int = 0) -> None:
        """Seeded init: normal(0, 0.02) weights, zero biases, identity norms."""
        gen = torch.Generator().manual_seed(seed)
        norm_params = set()
        for mod in self.modules():
            if isinstance(mod, nn.LayerNorm):
                norm_params.add(id(mod.weight))
                norm_params.add(id(mod.bias))
        with torch.no_grad():
            for name, p in self.named_parameters():
                if id(p) in norm_params:
                    p.fill_(1.0 if name.endswith("weight") else 0.0)
                elif name.endswith(".bias"):
                    p.zero_()
                else:
                    p.normal_(0.0, 0.02, generator=gen)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Token ids (batch, seq) or (seq,) -> logits of matching shape x vocab."""
        squeeze = ids.dim() == 1
        if squeeze:
            ids = ids.unsqueeze(0)
        b, t = ids.shape
        if t > self.cfg.max_positions:
            raise SequenceTooLongError(
                f"sequence length {t} exceeds max_positions {self.cfg.max_positions}"
            )
        pos = torch.arange(t, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)
        mask = causal_mask(t).to(ids.device)
        for block in self.blocks:
            x = block(x, mask)
        x = self.ln_f(x)
        if self.cfg.tie_output_embedding:
            logits = x @ self.tok_emb.weight.t()
        else:
            logits = self.head(x)
        return logits.squeeze(0) if squeeze else logits

    # ---------------------------------------------------------------- scoring

    def encode_batch(self, passwords) -> torch.Tensor:
        """Encode and right-pad to the longest sequence in the batch."""
        seqs = [self.vocab.encode(pw) for pw in passwords]
        longest = max(len(s) for s in seqs)
        if longest > self.cfg.max_positions:
            raise SequenceTooLongError(
                f"encoded length {longest} exceeds max_positions {self.cfg.max_positions}"
            )
        ids = torch.full((len(seqs), longest), self.vocab.pad_id, dtype=torch.long)
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        return ids

    @torch.no_grad()
    def log_prob_batch(self, passwords, batch_size: int = 256) -> np.ndarray:
        """Natural-log model probability of each complete password.

        Sums per-step log P(token | prefix) over every character and the end
        token; the start token is conditioning only, never a target.
        """
        self.eval()
        out = np.empty(len(passwords), dtype=np.float64)
        passwords = list(passwords)
        for lo in range(0, len(passwords), batch_size):
            chunk = passwords[lo : lo + batch_size]
            ids = self.encode_batch(chunk)
            logits = self.forward(ids)
            logp = F.log_softmax(logits[:, :-1, :].double(), dim=-1)
            targets = ids[:, 1:]
            picked = logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
            keep = (targets != self.vocab.pad_id).double()
            out[lo : lo + len(chunk)] = (picked * keep).sum(dim=1).numpy()
        return out

    def log_prob(self, password: str) -> float:
        return float(self.log_prob_batch([password])[0])

    @torch.no_grad()
    def mean_cross_entropy(self, passwords, batch_size: int = 256) -> float:
        """Mean negative log-likelihood per predicted token, in nats."""
        self.eval()
        total, count = 0.0, 0
        passwords = list(passwords)
        for lo in range(0, len(passwords), batch_size):
            ids = self.encode_batch(passwords[lo : lo + batch_size])
            nll = sequence_nll(self, ids, reduction="sum")
            total += float(nll)
            count += int((ids[:, 1:] != self.vocab.pad_id).sum())
        if count == 0:
            raise ModelConfigError("no target tokens to evaluate")
        return total / count

    # --------------------------------------------------------------- sampling

    @torch.no_grad()
    def sample(self, n: int, seed: int, batch_size: int = 512) -> "SampleResult":
        """Ancestral samples at temperature 1, deterministic per seed.

        Each draw starts at the start token and stops at the end token, at a
        non-terminal special token (recorded as irregular), or at the position
        limit (recorded as truncated).  Log-probabilities accumulate exactly
        the factors of the draws made, so every sample carries the model's own
        log-probability of the emitted sequence.
        """
        self.eval()
        gen = torch.Generator().manual_seed(seed)
        vocab = self.vocab
        specials = {vocab.pad_id, vocab.sos_id, vocab.unk_id, vocab.mask_id}
        all_pw: list[str] = []
        all_lp: list[float] = []
        all_trunc: list[bool] = []
        all_irreg: list[bool] = []
        for lo in range(0, n, batch_size):
            b = min(batch_size, n - lo)
            ids = torch.full((b, 1), vocab.sos_id, dtype=torch.long)
            logp = torch.zeros(b, dtype=torch.float64)
            alive = torch.ones(b, dtype=torch.bool)
            irregular = torch.zeros(b, dtype=torch.bool)
            for _ in range(self.cfg.max_positions - 1):
                logits = self.forward(ids)[:, -1, :]
                step_logp = F.log_softmax(logits.double(), dim=-1)
                nxt = torch.multinomial(step_logp.exp(), 1, generator=gen).squeeze(1)
                nxt = torch.where(alive, nxt, torch.full_like(nxt, vocab.pad_id))
                logp += torch.where(
                    alive, step_logp.gather(1, nxt.unsqueeze(1)).squeeze(1),
                    torch.zeros_like(logp),
                )
                ended = alive & (nxt == vocab.eos_id)
                oddball = alive & torch.tensor(
                    [int(t) in specials for t in nxt], dtype=torch.bool
                )
                irregular |= oddball
                alive &= ~(ended | oddball)
                ids = torch.cat([ids, nxt.unsqueeze(1)], dim=1)
                if not alive.any():
                    break
            for row in range(b):
                toks = [int(t) for t in ids[row, 1:]]
                chars = []
                for t in toks:
                    if t < len(vocab.charset):
                        chars.append(vocab.charset[t])
                    else:
                        break
                all_pw.append("".join(chars))
                all_lp.append(float(logp[row]))
                all_trunc.append(bool(alive[row]))
                all_irreg.append(bool(irregular[row]))
        return SampleResult(
            passwords=all_pw,
            log_probs=np.array(all_lp, dtype=np.float64),
            truncated=np.array(all_trunc, dtype=bool),
            irregular=np.array(all_irreg, dtype=bool),
        )


@dataclass
class SampleResult:
    """Sampled strings with their exact model log-probabilities."""

    passwords: list[str]
    log_probs: np.ndarray
    truncated: np.ndarray
    irregular: np.ndarray

    def __len__(self) -> int:
        return len(self.passwords)


def sequence_nll(model: DecoderModel, ids: torch.Tensor, reduction: str = "mean"):
    """Negative log-likelihood of next-token targets, padding excluded.

    With reduction="mean" this is nats per predicted token, the training
    objective; gradients flow to all model parameters.
    """
    logits = model(ids)
    flat = logits[:, :-1, :].reshape(-1, model.cfg.vocab_size)
    targets = ids[:, 1:].reshape(-1)
    return F.cross_entropy(flat, targets, ignore_index=model.vocab.pad_id,
                           reduction=reduction)


# ------------------------------------------------------------------ container


def tensor_directory(model: DecoderModel) -> list[tuple[str, torch.Tensor]]:
    """Canonical (name, tensor) order for serialization."""
    entries: list[tuple[str, torch.Tensor]] = [
        ("token_embedding", model.tok_emb.weight),
        ("position_embedding", model.pos_emb.weight),
    ]
    for i, blk in enumerate(model.blocks):
        p = f"block{i}."
        entries += [
            (p + "ln1.weight", blk.ln1.weight), (p + "ln1.bias", blk.ln1.bias),
            (p + "q.weight", blk.q_proj.weight), (p + "q.bias", blk.q_proj.bias),
            (p + "k.weight", blk.k_proj.weight), (p + "k.bias", blk.k_proj.bias),
            (p + "v.weight", blk.v_proj.weight), (p + "v.bias", blk.v_proj.bias),
            (p + "out.weight", blk.out_proj.weight), (p + "out.bias", blk.out_proj.bias),
            (p + "ln2.weight", blk.ln2.weight), (p + "ln2.bias", blk.ln2.bias),
            (p + "fc1.weight", blk.fc1.weight), (p + "fc1.bias", blk.fc1.bias),
            (p + "fc2.weight", blk.fc2.weight), (p + "fc2.bias", blk.fc2.bias),
        ]
    entries += [("final_norm.weight", model.ln_f.weight),
                ("final_norm.bias", model.ln_f.bias)]
    if not model.cfg.tie_output_embedding:
        entries.append(("output_head.weight", model.head.weight))
    return entries


def save_checkpoint(model: DecoderModel, path) -> None:
    """Write magic, version, JSON manifest, then raw little-endian fp32 data."""
    tensors = tensor_directory(model)
    directory = []
    offset = 0
    for name, t in tensors:
        nbytes = t.numel() * 4
        directory.append({"name": name, "shape": list(t.shape), "dtype": "f32",
                          "offset": offset})
        offset += nbytes
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.cfg.to_dict(),
        "vocabulary": model.vocab.to_token_list(),
        "tensors": directory,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        f.write(blob)
        for _, t in tensors:
            f.write(t.detach().to(torch.float32).contiguous().numpy()
                    .astype("<f4").tobytes())


def load_checkpoint(path) -> DecoderModel:
    """Reconstruct a model from a checkpoint file, validating the container."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < 12 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a model checkpoint (bad magic)")
    version, manifest_len = struct.unpack("<II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        manifest = json.loads(raw[12 : 12 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint manifest: {e}") from e
    cfg = ModelConfig.from_dict(manifest["config"])
    vocab = Vocabulary.from_token_list(manifest["vocabulary"])
    model = DecoderModel(cfg, vocab)
    payload = raw[12 + manifest_len :]
    by_name = dict(tensor_directory(model))
    seen = set()
    for entry in manifest["tensors"]:
        name = entry["name"]
        if name not in by_name:
            raise CheckpointError(f"checkpoint names unknown tensor {name!r}")
        target = by_name[name]
        shape = tuple(entry["shape"])
        if shape != tuple(target.shape):
            raise CheckpointError(
                f"tensor {name!r} has shape {shape}, model expects {tuple(target.shape)}"
            )
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 4
        if entry.get("dtype", "f32") != "f32" or end > len(payload):
            raise CheckpointError(f"tensor {name!r} payload is out of bounds or non-fp32")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        with torch.no_grad():
            target.copy_(torch.from_numpy(arr.copy()).view(shape))
        seen.add(name)
    missing = set(by_name) - seen
    if missing:
        raise CheckpointError(f"checkpoint is missing tensors: {sorted(missing)}")
    return model
