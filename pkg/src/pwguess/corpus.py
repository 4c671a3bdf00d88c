"""Password corpus ingestion, filtering, sampling, splitting, and 3-gram stats.

Corpus files are one password per line, LF-terminated, no header.  Lines are
treated as raw bytes: any byte outside printable ASCII (0x20-0x7E, unless a
narrower charset is configured) rejects the whole line.  Duplicates are kept;
frequency is signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CorpusError, EmptyCorpusError
from .vocab import PRINTABLE_ASCII


@dataclass(frozen=True)
class FilterPolicy:
    min_length: int = 6
    max_length: int = 30
    charset: str = PRINTABLE_ASCII

    def __post_init__(self):
        if not (0 < self.min_length <= self.max_length):
            raise CorpusError(
                f"invalid length bounds: 0 < {self.min_length} <= {self.max_length} required"
            )

    def rejection_reason(self, password: str) -> str | None:
        """None if the password passes, else one of 'short', 'long', 'charset'."""
        if any(c not in self.charset for c in password):
            return "charset"
        if len(password) < self.min_length:
            return "short"
        if len(password) > self.max_length:
            return "long"
        return None


@dataclass
class RejectionReport:
    lines_read: int = 0
    kept: int = 0
    rejected_short: int = 0
    rejected_long: int = 0
    rejected_charset: int = 0

    def as_dict(self) -> dict:
        return {
            "lines_read": self.lines_read,
            "kept": self.kept,
            "rejected_short": self.rejected_short,
            "rejected_long": self.rejected_long,
            "rejected_charset": self.rejected_charset,
        }

    def as_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.as_dict().items())


@dataclass(frozen=True)
class Corpus:
    """An ordered multiset of validated passwords."""

    passwords: tuple[str, ...]
    source_label: str = ""
    filter_policy: FilterPolicy = field(default_factory=FilterPolicy)

    def __len__(self) -> int:
        return len(self.passwords)

    def __iter__(self):
        return iter(self.passwords)

    def __getitem__(self, i):
        return self.passwords[i]


def corpus_from_passwords(
    passwords, label: str = "", policy: FilterPolicy | None = None
) -> Corpus:
    """Wrap already-validated passwords; re-checks the policy defensively."""
    policy = policy or FilterPolicy()
    for pw in passwords:
        reason = policy.rejection_reason(pw)
        if reason is not None:
            raise CorpusError(f"password {pw!r} violates the filter policy ({reason})")
    return Corpus(tuple(passwords), label, policy)


def load_corpus(
    path, policy: FilterPolicy | None = None, dedupe: bool = False
) -> tuple[Corpus, RejectionReport]:
    """Read a corpus file, keeping exactly the lines that pass the policy.

    Returns the corpus (file order preserved) and per-reason rejection counts.
    Raises EmptyCorpusError if nothing survives.
    """
    policy = policy or FilterPolicy()
    report = RejectionReport()
    kept: list[str] = []
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CorpusError(f"cannot read corpus file {path}: {e}") from e

    allowed = set(policy.charset.encode("ascii"))
    for line in raw.split(b"\n")[:-1] if raw.endswith(b"\n") else raw.split(b"\n"):
        report.lines_read += 1
        if any(b not in allowed for b in line):
            report.rejected_charset += 1
            continue
        pw = line.decode("ascii")
        if len(pw) < policy.min_length:
            report.rejected_short += 1
            continue
        if len(pw) > policy.max_length:
            report.rejected_long += 1
            continue
        kept.append(pw)
    if dedupe:
        kept = list(dict.fromkeys(kept))
    report.kept = len(kept)
    if not kept:
        raise EmptyCorpusError(f"empty corpus: no password in {path} passed the filter")
    return Corpus(tuple(kept), str(path), policy), report


def save_corpus(corpus: Corpus, path) -> None:
    """One password per line, LF-terminated. load(save(c)) round-trips exactly."""
    with open(path, "wb") as f:
        for pw in corpus:
            f.write(pw.encode("ascii"))
            f.write(b"\n")


def sample_corpus(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Uniform subset of size n without replacement, deterministic per seed."""
    if n > len(corpus):
        raise CorpusError(f"cannot sample {n} from a corpus of {len(corpus)}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(corpus))[:n]
    picked = tuple(corpus.passwords[i] for i in idx)
    label = f"{corpus.source_label}|sample(n={n},seed={seed})"
    return Corpus(picked, label, corpus.filter_policy)


def split_corpus(
    corpus: Corpus, train_fraction: float, seed: int
) -> tuple[Corpus, Corpus]:
    """Disjoint seeded partition whose union is the corpus as a multiset."""
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(corpus))
    k = int(round(train_fraction * len(corpus)))
    train = tuple(corpus.passwords[i] for i in idx[:k])
    test = tuple(corpus.passwords[i] for i in idx[k:])
    base = f"{corpus.source_label}|split(f={train_fraction},seed={seed})"
    return (
        Corpus(train, base + "[train]", corpus.filter_policy),
        Corpus(test, base + "[test]", corpus.filter_policy),
    )


@dataclass(frozen=True)
class TrigramDistribution:
    """Counts of overlapping 3-character windows across a corpus."""

    counts: dict[str, int]
    total: int

    def prob(self, key: str) -> float:
        return self.counts.get(key, 0) / self.total


def trigram_distribution(corpus: Corpus) -> TrigramDistribution:
    """Every interior 3-character window of every password; len-2 windows each."""
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot build a 3-gram distribution from an empty corpus")
    counts: dict[str, int] = {}
    total = 0
    for pw in corpus:
        for i in range(len(pw) - 2):
            key = pw[i : i + 3]
            counts[key] = counts.get(key, 0) + 1
            total += 1
    if total == 0:
        raise CorpusError("no password is long enough to contain a 3-gram")
    return TrigramDistribution(counts, total)


def js_divergence(p: TrigramDistribution, q: TrigramDistribution) -> float:
    """Jensen-Shannon divergence over the union of 3-gram keys, base-2 logs.

    Bounded in [0, 1]; exactly symmetric in its arguments (terms are summed in
    sorted key order, and the two halves commute inside each term).
    """
    if p.total <= 0 or q.total <= 0:
        raise CorpusError("both distributions must be non-empty")
    acc = 0.0
    for key in sorted(set(p.counts) | set(q.counts)):
        pi = p.counts.get(key, 0) / p.total
        qi = q.counts.get(key, 0) / q.total
        m = 0.5 * (pi + qi)
        term = 0.0
        if pi > 0.0:
            term += 0.5 * pi * math.log2(pi / m)
        if qi > 0.0:
            term += 0.5 * qi * math.log2(qi / m)
        acc += term
    return min(max(acc, 0.0), 1.0)


def relabel(corpus: Corpus, label: str) -> Corpus:
    return replace(corpus, source_label=label)
