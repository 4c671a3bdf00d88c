"""Character n-gram baseline with Laplace smoothing and count-threshold backoff.

The model counts (context, next-symbol) transitions at every context length
below the order, padding the start of each password with a boundary symbol
and modeling end-of-string as an explicit 96th symbol (for the full printable
charset; generally len(charset)+1).  Queries back off to the longest context
whose total count reaches the threshold, terminating at the empty context.
"""

from __future__ import annotations

import gzip
import json
import math

import numpy as np

from .corpus import Corpus
from .errors import CorpusError, EmptyCorpusError, TokenizeError
from .model import SampleResult
from .vocab import PRINTABLE_ASCII

START = "\x00"


class NgramModel:
    """Backoff-smoothed n-gram distribution over passwords."""

    def __init__(self, order: int = 6, delta: float = 0.01,
                 backoff_threshold: int = 10, charset: str = PRINTABLE_ASCII):
        if order < 2:
            raise CorpusError(f"order must be at least 2, got {order}")
        if delta <= 0:
            raise CorpusError(f"smoothing delta must be positive, got {delta}")
        if backoff_threshold < 0:
            raise CorpusError("backoff_threshold cannot be negative")
        if START in charset:
            raise CorpusError("charset must not contain the boundary symbol")
        self.order = order
        self.delta = delta
        self.backoff_threshold = backoff_threshold
        self.charset = charset
        self.end_index = len(charset)
        self.n_symbols = len(charset) + 1
        self._sym_index = {c: i for i, c in enumerate(charset)}
        self._counts: dict[str, np.ndarray] = {}
        self._totals: dict[str, int] = {}
        self._logp_cache: dict[str, np.ndarray] = {}
        self._cdf_cache: dict[str, np.ndarray] = {}

    # ---------------------------------------------------------------- training

    def _bump(self, ctx: str, sym: int) -> None:
        row = self._counts.get(ctx)
        if row is None:
            row = np.zeros(self.n_symbols, dtype=np.int64)
            self._counts[ctx] = row
        row[sym] += 1
        self._totals[ctx] = self._totals.get(ctx, 0) + 1

    def observe(self, password: str) -> None:
        """Count all transitions of one password at every context length."""
        for c in password:
            if c not in self._sym_index:
                raise TokenizeError(f"character {c!r} is outside the model charset")
        padded = START * (self.order - 1) + password
        for j in range(len(password) + 1):
            sym = self._sym_index[password[j]] if j < len(password) else self.end_index
            full_ctx = padded[j : j + self.order - 1]
            for k in range(self.order):
                ctx = full_ctx[len(full_ctx) - k :] if k else ""
                self._bump(ctx, sym)
        self._logp_cache.clear()
        self._cdf_cache.clear()

    # ----------------------------------------------------------------- queries

    def _backoff_context(self, history: str) -> str:
        """Longest suffix of the padded history with enough support."""
        padded = (START * (self.order - 1) + history)[-(self.order - 1):] \
            if self.order > 1 else ""
        for k in range(len(padded), 0, -1):
            ctx = padded[len(padded) - k:]
            if self._totals.get(ctx, 0) >= self.backoff_threshold:
                return ctx
        return ""

    def _log_probs_for(self, ctx: str) -> np.ndarray:
        cached = self._logp_cache.get(ctx)
        if cached is None:
            counts = self._counts.get(ctx)
            if counts is None:
                counts = np.zeros(self.n_symbols, dtype=np.int64)
            smoothed = counts + self.delta
            cached = np.log(smoothed / smoothed.sum())
            self._logp_cache[ctx] = cached
        return cached

    def next_log_probs(self, history: str) -> np.ndarray:
        """Natural-log distribution over the next symbol (end-symbol last)."""
        return self._log_probs_for(self._backoff_context(history))

    def log_prob(self, password: str) -> float:
        """Natural-log probability of the complete password, end step included."""
        total = 0.0
        for j, c in enumerate(password):
            sym = self._sym_index.get(c)
            if sym is None:
                raise TokenizeError(f"character {c!r} is outside the model charset")
            total += float(self.next_log_probs(password[:j])[sym])
        total += float(self.next_log_probs(password)[self.end_index])
        return total

    def log_prob_batch(self, passwords, batch_size: int = 0) -> np.ndarray:
        return np.array([self.log_prob(pw) for pw in passwords], dtype=np.float64)

    def sample(self, n: int, seed: int, max_length: int = 64) -> SampleResult:
        """Ancestral samples, deterministic per seed, truncated at max_length."""
        rng = np.random.default_rng(seed)
        passwords: list[str] = []
        log_probs = np.empty(n, dtype=np.float64)
        truncated = np.zeros(n, dtype=bool)
        for i in range(n):
            chars: list[str] = []
            logp = 0.0
            while True:
                ctx = self._backoff_context("".join(chars[-(self.order - 1):]))
                cdf = self._cdf_cache.get(ctx)
                if cdf is None:
                    cdf = np.cumsum(np.exp(self._log_probs_for(ctx)))
                    self._cdf_cache[ctx] = cdf
                sym = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                sym = min(sym, self.n_symbols - 1)
                logp += float(self._log_probs_for(ctx)[sym])
                if sym == self.end_index:
                    break
                chars.append(self.charset[sym])
                if len(chars) >= max_length:
                    truncated[i] = True
                    break
            passwords.append("".join(chars))
            log_probs[i] = logp
        return SampleResult(passwords=passwords, log_probs=log_probs,
                            truncated=truncated,
                            irregular=np.zeros(n, dtype=bool))


def train_ngram(data: Corpus, order: int = 6, delta: float = 0.01,
                backoff_threshold: int = 10,
                charset: str | None = None) -> NgramModel:
    """Count every transition of every password in the corpus."""
    if len(data) == 0:
        raise EmptyCorpusError("cannot train an n-gram model on an empty corpus")
    model = NgramModel(order=order, delta=delta, backoff_threshold=backoff_threshold,
                       charset=charset or data.filter_policy.charset)
    for pw in data:
        model.observe(pw)
    return model


NGRAM_MAGIC = "pwng-v1"


def save_ngram(model: NgramModel, path) -> None:
    """Gzipped JSON: manifest plus sparse per-context count rows."""
    counts = {
        ctx: [[int(i), int(c)] for i, c in enumerate(row) if c]
        for ctx, row in model._counts.items()
    }
    doc = {
        "format": NGRAM_MAGIC,
        "order": model.order,
        "delta": model.delta,
        "backoff_threshold": model.backoff_threshold,
        "charset": model.charset,
        "counts": counts,
    }
    with gzip.open(path, "wt", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))


def load_ngram(path) -> NgramModel:
    try:
        with gzip.open(path, "rt", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read n-gram model {path}: {e}") from e
    if doc.get("format") != NGRAM_MAGIC:
        raise CorpusError(f"{path} is not an n-gram model file")
    model = NgramModel(order=doc["order"], delta=doc["delta"],
                       backoff_threshold=doc["backoff_threshold"],
                       charset=doc["charset"])
    for ctx, pairs in doc["counts"].items():
        row = np.zeros(model.n_symbols, dtype=np.int64)
        for i, c in pairs:
            row[i] = c
        model._counts[ctx] = row
        model._totals[ctx] = int(row.sum())
    return model
