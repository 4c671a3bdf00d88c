"""Monte Carlo guess-number estimation and guessing-curve construction.

Given n i.i.d. samples from a password model, the guess number of a password
with model probability p is estimated as the sum of 1/(n*p_i) over samples
strictly more probable than p.  Sorting the sampled log-probabilities once
and keeping cumulative weight tables makes each query a binary search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .errors import EstimatorError, SequenceTooLongError, TokenizeError


class MonteCarloEstimator:
    """Rank estimator over sorted sample log-probabilities.

    sample_logprobs is held descending (most probable first); cum_weights[i]
    is the estimated number of distinct strings at least as probable as
    sample i, and cum_sq_weights supports a standard-error estimate.
    """

    def __init__(self, sample_logprobs, model_id: str = ""):
        arr = np.asarray(sample_logprobs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise EstimatorError("need a non-empty 1-d array of log-probabilities")
        if not np.all(np.isfinite(arr)):
            raise EstimatorError("sample log-probabilities must all be finite")
        self.sample_logprobs = np.sort(arr)[::-1].copy()
        self.n = int(arr.size)
        self.model_id = model_id
        weights = np.exp(-self.sample_logprobs) / self.n
        self.cum_weights = np.cumsum(weights)
        self.cum_sq_weights = np.cumsum(weights * weights)

    def _rank_index(self, logp: float) -> int:
        """Number of samples with log-probability strictly above logp."""
        ascending = self.sample_logprobs[::-1]
        return self.n - int(np.searchsorted(ascending, logp, side="right"))

    def guess_number(self, logp: float) -> float:
        """Estimated count of strings the model rates strictly more probable."""
        if math.isnan(logp):
            raise EstimatorError("log-probability is NaN")
        k = self._rank_index(logp)
        return float(self.cum_weights[k - 1]) if k > 0 else 0.0

    def guess_numbers(self, logps) -> np.ndarray:
        logps = np.asarray(logps, dtype=np.float64)
        if np.isnan(logps).any():
            raise EstimatorError("log-probability is NaN")
        ascending = self.sample_logprobs[::-1]
        ks = self.n - np.searchsorted(ascending, logps, side="right")
        padded = np.concatenate([[0.0], self.cum_weights])
        return padded[ks]

    def standard_error(self, logp: float) -> float:
        """Monte Carlo standard error of the estimate at logp."""
        k = self._rank_index(logp)
        if k == 0:
            return 0.0
        est = float(self.cum_weights[k - 1])
        var = float(self.cum_sq_weights[k - 1]) - est * est / self.n
        return math.sqrt(max(var, 0.0))


def build_estimator(model, n: int, seed: int,
                    model_id: str = "") -> MonteCarloEstimator:
    """Sample n passwords from the model and index their log-probabilities."""
    if n < 1:
        raise EstimatorError("need at least one sample")
    result = model.sample(n, seed)
    return MonteCarloEstimator(result.log_probs, model_id=model_id)


def default_grid() -> np.ndarray:
    """81 guess counts, log-uniform from 1 to 10^20."""
    return np.logspace(0.0, 20.0, 81)


@dataclass
class GuessingCurve:
    """Coverage of a test corpus as a function of allowed guesses."""

    guesses: np.ndarray
    coverage: np.ndarray
    test_size: int
    unscored: int = 0
    model_id: str = ""
    test_label: str = ""
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.guesses = np.asarray(self.guesses, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=np.float64)
        if self.guesses.shape != self.coverage.shape:
            raise EstimatorError("guesses and coverage must be the same length")
        if np.any(np.diff(self.guesses) <= 0):
            raise EstimatorError("guess grid must be strictly ascending")
        if np.any(np.diff(self.coverage) < 0):
            raise EstimatorError("coverage must be non-decreasing")
        if self.coverage.size and not (0.0 <= self.coverage.min()
                                       and self.coverage.max() <= 1.0):
            raise EstimatorError("coverage must lie in [0, 1]")


def score_all(scorer, passwords) -> tuple[np.ndarray, np.ndarray]:
    """Log-probabilities plus a mask of passwords the scorer could not handle.

    Unscorable entries (too long for the model, or containing characters the
    model does not know) get -inf and are flagged.
    """
    passwords = list(passwords)
    logps = np.full(len(passwords), -np.inf, dtype=np.float64)
    bad = np.zeros(len(passwords), dtype=bool)
    batch = getattr(scorer, "log_prob_batch", None)
    if batch is not None:
        try:
            logps[:] = batch(passwords)
            return logps, bad
        except (SequenceTooLongError, TokenizeError):
            pass
    for i, pw in enumerate(passwords):
        try:
            if batch is not None:
                logps[i] = float(batch([pw])[0])
            else:
                logps[i] = float(scorer(pw))
        except (SequenceTooLongError, TokenizeError):
            bad[i] = True
    return logps, bad


def guessing_curve(est: MonteCarloEstimator, scorer, test: Corpus,
                   grid=None) -> GuessingCurve:
    """Fraction of test passwords guessed within each grid budget.

    Duplicates count with multiplicity; passwords the scorer rejects are
    counted as never guessed and reported in the curve's unscored field.
    """
    if len(test) == 0:
        raise EstimatorError("test corpus is empty")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise EstimatorError("grid must be a strictly ascending 1-d sequence")
    logps, bad = score_all(scorer, test.passwords)
    ranks = est.guess_numbers(logps[~bad])
    ranks.sort()
    covered = np.searchsorted(ranks, grid, side="right")
    coverage = covered / len(test)
    return GuessingCurve(
        guesses=grid, coverage=coverage, test_size=len(test),
        unscored=int(bad.sum()), model_id=est.model_id,
        test_label=test.source_label,
        manifest={"n": est.n},
    )


@dataclass(frozen=True)
class CurveComparison:
    mean_difference: float
    max_difference: float
    argmax_guesses: float
    points: int

    def as_dict(self) -> dict:
        return {
            "mean_difference": self.mean_difference,
            "max_difference": self.max_difference,
            "argmax_guesses": self.argmax_guesses,
            "points": self.points,
        }


def interpolate_coverage(curve: GuessingCurve, log10_g: np.ndarray) -> np.ndarray:
    """Linear interpolation in (log10 guesses, coverage), flat at the ends."""
    return np.interp(log10_g, np.log10(curve.guesses), curve.coverage)


def compare_curves(a: GuessingCurve, b: GuessingCurve,
                   points: int = 1000) -> CurveComparison:
    """Mean and max of (a - b) over points sampled uniformly in log10 guesses."""
    if points < 2:
        raise EstimatorError("need at least two comparison points")
    lo = max(np.log10(a.guesses[0]), np.log10(b.guesses[0]))
    hi = min(np.log10(a.guesses[-1]), np.log10(b.guesses[-1]))
    if hi <= lo:
        raise EstimatorError("curves do not share a guess range")
    xs = np.linspace(lo, hi, points)
    diff = interpolate_coverage(a, xs) - interpolate_coverage(b, xs)
    peak = int(np.argmax(diff))
    return CurveComparison(
        mean_difference=float(diff.mean()),
        max_difference=float(diff[peak]),
        argmax_guesses=float(10.0 ** xs[peak]),
        points=points,
    )


# -------------------------------------------------------------------- file io


def write_curve(curve: GuessingCurve, path) -> None:
    """Manifest comments, a header, then one "log10_g,coverage" row per point."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# model_id={curve.model_id}\n")
        f.write(f"# test_label={curve.test_label}\n")
        f.write(f"# test_size={curve.test_size}\n")
        f.write(f"# unscored={curve.unscored}\n")
        for k, v in sorted(curve.manifest.items()):
            f.write(f"# {k}={v}\n")
        f.write("log10_g,coverage\n")
        for g, c in zip(curve.guesses, curve.coverage):
            f.write(f"{math.log10(g):.10g},{c:.10g}\n")


def read_curve(path) -> GuessingCurve:
    meta: dict[str, str] = {}
    xs: list[float] = []
    ys: list[float] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line.startswith("log10_g"):
                continue
            else:
                a, _, b = line.partition(",")
                xs.append(10.0 ** float(a))
                ys.append(float(b))
    if not xs:
        raise EstimatorError(f"no curve points in {path}")
    known = {"model_id", "test_label", "test_size", "unscored"}
    return GuessingCurve(
        guesses=np.array(xs), coverage=np.array(ys),
        test_size=int(meta.get("test_size", 0)),
        unscored=int(meta.get("unscored", 0)),
        model_id=meta.get("model_id", ""), test_label=meta.get("test_label", ""),
        manifest={k: v for k, v in meta.items() if k not in known},
    )


def save_estimator(est: MonteCarloEstimator, path) -> None:
    """Store the sorted sample table; rebuilding recomputes the cumulatives."""
    with open(path, "wb") as f:
        np.savez(f, sample_logprobs=est.sample_logprobs,
                 model_id=np.array(est.model_id))


def load_estimator(path) -> MonteCarloEstimator:
    try:
        with np.load(path, allow_pickle=False) as z:
            return MonteCarloEstimator(z["sample_logprobs"],
                                       model_id=str(z["model_id"]))
    except (OSError, KeyError, ValueError) as e:
        raise EstimatorError(f"cannot load estimator from {path}: {e}") from e
