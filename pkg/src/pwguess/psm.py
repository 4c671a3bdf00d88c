"""Password-strength-meter export: quantization, bundles, calibration, errors.

A bundle packages quantized decoder weights together with a Monte Carlo
estimator table and a scaling factor into a single self-contained file that
a client (for example a browser meter) can load and query offline.  The
serialized layout is: magic "PSMB", format version (u32 LE), manifest length
(u32 LE), canonical JSON manifest, then a little-endian tensor payload in
manifest order with the estimator table appended.  When zip is requested the
whole stream is gzip-compressed; readers auto-detect the gzip header.
"""

from __future__ import annotations

import gzip
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, OracleError, PsmError
from .mc import MonteCarloEstimator
from .model import DecoderModel, ModelConfig, tensor_directory
from .vocab import Vocabulary

BUNDLE_MAGIC = b"PSMB"
BUNDLE_VERSION = 1
NORM_KEEP_F32 = ("ln1.", "ln2.", "final_norm.")
MAX_DECADE_BIN = 20


@dataclass(frozen=True)
class QuantizationMode:
    kind: str = "fp32"
    zip: bool = False

    def __post_init__(self):
        if self.kind not in ("fp32", "fp16", "int8"):
            raise PsmError(f"unknown quantization kind {self.kind!r}")


@dataclass
class QuantizedTensor:
    name: str
    shape: tuple[int, ...]
    dtype: str
    data: np.ndarray
    scale: float | None = None

    def dequantized(self) -> np.ndarray:
        if self.dtype == "i8":
            return self.data.astype(np.float32) * np.float32(self.scale)
        return self.data.astype(np.float32)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _to_f32_saturating(values) -> np.ndarray:
    """Narrow to 32-bit, clamping instead of overflowing to infinity.

    Cumulative importance weights blow past the 32-bit range only in the far
    tail (passwords the model considers astronomically rare); a saturated
    table still orders every realistic estimate correctly.
    """
    arr = np.asarray(values, dtype=np.float64)
    peak = float(np.finfo(np.float32).max)
    return np.clip(arr, -peak, peak).astype(np.float32)


def quantize_tensor(name: str, values: np.ndarray, kind: str) -> QuantizedTensor:
    """Quantize one tensor; layer-norm parameters always stay 32-bit."""
    values = np.asarray(values, dtype=np.float32)
    keep = any(tag in name for tag in NORM_KEEP_F32)
    if kind == "int8" and not keep:
        peak = float(np.abs(values).max()) if values.size else 0.0
        scale = peak / 127.0
        if scale == 0.0:
            codes = np.zeros(values.shape, dtype=np.int8)
        else:
            codes = _round_half_away(values / scale).astype(np.int8)
        return QuantizedTensor(name, tuple(values.shape), "i8", codes, scale)
    if kind == "fp16" and not keep:
        return QuantizedTensor(name, tuple(values.shape), "f16",
                               values.astype(np.float16))
    return QuantizedTensor(name, tuple(values.shape), "f32", values)


@dataclass
class StrengthReport:
    """One password's strength as seen by a meter bundle."""

    guess_number: float
    log10_guess_number: float
    decade_bin: int
    standard_error: float
    raw_guess_number: float
    log_prob: float

    def as_dict(self) -> dict:
        return {
            "guess_number": self.guess_number,
            "log10_guess_number": self.log10_guess_number,
            "decade_bin": self.decade_bin,
            "standard_error": self.standard_error,
            "raw_guess_number": self.raw_guess_number,
            "log_prob": self.log_prob,
        }


def decade_bin(guess_number: float) -> int:
    """floor(log10(g)) with a floor of one guess, clamped to [0, 20]."""
    b = math.floor(math.log10(max(guess_number, 1.0)))
    return min(max(b, 0), MAX_DECADE_BIN)


class PsmBundle:
    """In-memory bundle: quantized weights, estimator table, scaling factor."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary,
                 mode: QuantizationMode, tensors: list[QuantizedTensor],
                 est_logprobs: np.ndarray, est_cum_weights: np.ndarray,
                 est_cum_sq_weights: np.ndarray, scaling_factor: int = 1,
                 model_id: str = ""):
        if scaling_factor < 1:
            raise PsmError("scaling_factor must be at least 1")
        n = len(est_logprobs)
        if not (n >= 1 and len(est_cum_weights) == n
                and len(est_cum_sq_weights) == n):
            raise PsmError("estimator table arrays must be non-empty and aligned")
        self.config = config
        self.vocab = vocab
        self.mode = mode
        self.tensors = tensors
        self.est_logprobs = np.asarray(est_logprobs, dtype=np.float32)
        self.est_cum_weights = _to_f32_saturating(est_cum_weights)
        self.est_cum_sq_weights = _to_f32_saturating(est_cum_sq_weights)
        self.scaling_factor = int(scaling_factor)
        self.model_id = model_id
        self._model: DecoderModel | None = None
        self._estimator: MonteCarloEstimator | None = None

    # -------------------------------------------------------------- inference

    def model(self) -> DecoderModel:
        """Dequantize into a runnable scoring model (cached)."""
        if self._model is None:
            import torch

            model = DecoderModel(self.config, self.vocab)
            by_name = dict(tensor_directory(model))
            for qt in self.tensors:
                if qt.name not in by_name:
                    raise PsmError(f"bundle has unknown tensor {qt.name!r}")
                with torch.no_grad():
                    by_name[qt.name].copy_(
                        torch.from_numpy(qt.dequantized().copy()).view(qt.shape))
            self._model = model
        return self._model

    def estimator(self) -> MonteCarloEstimator:
        """Rank estimator rebuilt from the stored sample table (cached)."""
        if self._estimator is None:
            self._estimator = MonteCarloEstimator(
                self.est_logprobs.astype(np.float64), model_id=self.model_id)
        return self._estimator

    def strength(self, password: str) -> StrengthReport:
        """Score one password end to end, scaling and flooring the estimate."""
        logp = self.model().log_prob(password)
        return self.strength_from_log_prob(logp)

    def strength_from_log_prob(self, logp: float) -> StrengthReport:
        est = self.estimator()
        raw = est.guess_number(logp)
        scaled = max(raw / self.scaling_factor, 1.0)
        return StrengthReport(
            guess_number=scaled,
            log10_guess_number=math.log10(scaled),
            decade_bin=decade_bin(scaled),
            standard_error=est.standard_error(logp) / self.scaling_factor,
            raw_guess_number=raw,
            log_prob=logp,
        )

    def strengths(self, passwords) -> list[StrengthReport]:
        logps = self.model().log_prob_batch(passwords)
        return [self.strength_from_log_prob(float(lp)) for lp in logps]


def quantize(model: DecoderModel, mode: QuantizationMode,
             estimator: MonteCarloEstimator, scaling_factor: int = 1,
             model_id: str = "") -> PsmBundle:
    """Build a bundle from trained weights and a built estimator."""
    tensors = [quantize_tensor(name, t.detach().numpy(), mode.kind)
               for name, t in tensor_directory(model)]
    return PsmBundle(
        config=model.cfg, vocab=model.vocab, mode=mode, tensors=tensors,
        est_logprobs=estimator.sample_logprobs.astype(np.float32),
        est_cum_weights=estimator.cum_weights,
        est_cum_sq_weights=estimator.cum_sq_weights,
        scaling_factor=scaling_factor,
        model_id=model_id or estimator.model_id,
    )


# ---------------------------------------------------------------- serialization

_DTYPE_BYTES = {"f32": 4, "f16": 2, "i8": 1}
_DTYPE_NP = {"f32": "<f4", "f16": "<f2", "i8": "i1"}


def serialize_bundle(bundle: PsmBundle) -> bytes:
    directory = []
    offset = 0
    for qt in bundle.tensors:
        entry = {"name": qt.name, "shape": list(qt.shape), "dtype": qt.dtype,
                 "offset": offset}
        if qt.dtype == "i8":
            entry["scale"] = qt.scale
        directory.append(entry)
        offset += int(np.prod(qt.shape, dtype=np.int64)) * _DTYPE_BYTES[qt.dtype]
    n = len(bundle.est_logprobs)
    manifest = {
        "format_version": BUNDLE_VERSION,
        "config": bundle.config.to_dict(),
        "vocabulary": bundle.vocab.to_token_list(),
        "quantization": {"kind": bundle.mode.kind, "zip": bundle.mode.zip},
        "scaling_factor": bundle.scaling_factor,
        "tensors": directory,
        "estimator": {"model_id": bundle.model_id, "n": n, "offset": offset},
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [BUNDLE_MAGIC, struct.pack("<II", BUNDLE_VERSION, len(blob)), blob]
    for qt in bundle.tensors:
        parts.append(np.ascontiguousarray(qt.data).astype(
            _DTYPE_NP[qt.dtype]).tobytes())
    parts.append(bundle.est_logprobs.astype("<f4").tobytes())
    parts.append(bundle.est_cum_weights.astype("<f4").tobytes())
    parts.append(bundle.est_cum_sq_weights.astype("<f4").tobytes())
    raw = b"".join(parts)
    if bundle.mode.zip:
        return gzip.compress(raw, mtime=0)
    return raw


def parse_bundle(data: bytes) -> PsmBundle:
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    if len(data) < 12 or data[:4] != BUNDLE_MAGIC:
        raise PsmError("not a strength-meter bundle (bad magic bytes)")
    version, manifest_len = struct.unpack("<II", data[4:12])
    if version != BUNDLE_VERSION:
        raise PsmError(f"unsupported bundle version {version}")
    try:
        manifest = json.loads(data[12 : 12 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise PsmError(f"corrupt bundle manifest: {e}") from e
    payload = data[12 + manifest_len :]
    config = ModelConfig.from_dict(manifest["config"])
    vocab = Vocabulary.from_token_list(manifest["vocabulary"])
    q = manifest["quantization"]
    mode = QuantizationMode(kind=q["kind"], zip=bool(q["zip"]))
    tensors = []
    for entry in manifest["tensors"]:
        dtype = entry["dtype"]
        if dtype not in _DTYPE_NP:
            raise PsmError(f"tensor {entry['name']!r} has unknown dtype {dtype!r}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        end = start + count * _DTYPE_BYTES[dtype]
        if end > len(payload):
            raise PsmError(f"tensor {entry['name']!r} payload is truncated")
        arr = np.frombuffer(payload, dtype=_DTYPE_NP[dtype], count=count,
                            offset=start).reshape(shape)
        tensors.append(QuantizedTensor(entry["name"], shape, dtype, arr.copy(),
                                       entry.get("scale")))
    est = manifest["estimator"]
    n, start = est["n"], est["offset"]
    if start + 12 * n > len(payload):
        raise PsmError("estimator table payload is truncated")
    def table(i):
        return np.frombuffer(payload, dtype="<f4", count=n,
                             offset=start + 4 * n * i).copy()
    return PsmBundle(
        config=config, vocab=vocab, mode=mode, tensors=tensors,
        est_logprobs=table(0), est_cum_weights=table(1),
        est_cum_sq_weights=table(2),
        scaling_factor=int(manifest["scaling_factor"]),
        model_id=est.get("model_id", ""),
    )


def write_bundle(bundle: PsmBundle, path) -> int:
    """Serialize to a file; returns the byte size written."""
    blob = serialize_bundle(bundle)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)


def read_bundle(path) -> PsmBundle:
    try:
        with open(path, "rb") as f:
            return parse_bundle(f.read())
    except OSError as e:
        raise PsmError(f"cannot read bundle {path}: {e}") from e


# ------------------------------------------------------------------- oracles


def min_guess(estimates) -> float:
    """Minimum guess number across models: the conservative attacker oracle."""
    pairs = list(estimates)
    if not pairs:
        raise OracleError("min_guess needs at least one (model_id, estimate) pair")
    return min(float(g) for _, g in pairs)


@dataclass
class ErrorMatrix:
    """Counts of (oracle decade bin, meter decade bin) pairs."""

    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((MAX_DECADE_BIN + 1, MAX_DECADE_BIN + 1),
                                         dtype=np.int64))

    def add(self, oracle_bin: int, psm_bin: int) -> None:
        self.counts[oracle_bin, psm_bin] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accurate(self) -> int:
        return int(np.trace(self.counts))

    @property
    def unsafe(self) -> int:
        return int(np.triu(self.counts, 1).sum())

    @property
    def safe(self) -> int:
        return int(np.tril(self.counts, -1).sum())

    def rates(self) -> dict:
        t = max(self.total, 1)
        return {"accurate": self.accurate / t, "unsafe": self.unsafe / t,
                "safe": self.safe / t}

    def as_dict(self) -> dict:
        return {"counts": self.counts.tolist(), "total": self.total,
                "accurate": self.accurate, "unsafe": self.unsafe,
                "safe": self.safe, "rates": self.rates()}


def _oracle_bins(oracle, passwords) -> np.ndarray:
    bins = np.empty(len(passwords), dtype=np.int64)
    for i, pw in enumerate(passwords):
        if pw not in oracle:
            raise OracleError(f"oracle has no estimate for password index {i}")
        bins[i] = decade_bin(float(oracle[pw]))
    return bins


def error_matrix(bundle: PsmBundle, oracle, test) -> ErrorMatrix:
    """Bin meter estimates against oracle estimates for every test password.

    oracle maps password -> guess number (already MinGuess-reduced if several
    attack models are in play).
    """
    passwords = list(test)
    obins = _oracle_bins(oracle, passwords)
    matrix = ErrorMatrix()
    for pw, ob in zip(passwords, obins):
        report = bundle.strength(pw)
        matrix.add(int(ob), report.decade_bin)
    return matrix


def calibrate_scaling(bundle: PsmBundle, oracle, test,
                      reference_safe_count: int) -> int:
    """Smallest integer factor f >= 1 whose safe-error count meets the target.

    Dividing estimates by larger f can only lower meter bins, so the safe
    count is non-decreasing in f; an exponential bracket plus integer
    bisection finds the boundary.  The found factor is written back into the
    bundle.  Raises CalibrationError (carrying the achievable count) when
    even saturation cannot reach the target.
    """
    passwords = list(test)
    if not 0 <= reference_safe_count <= len(passwords):
        raise CalibrationError(
            f"reference_safe_count must be within [0, {len(passwords)}]")
    obins = _oracle_bins(oracle, passwords)
    logps = bundle.model().log_prob_batch(passwords)
    est = bundle.estimator()
    raw = est.guess_numbers(logps)

    def safe_count(f: int) -> int:
        scaled = np.maximum(raw / f, 1.0)
        with np.errstate(divide="ignore"):
            b = np.floor(np.log10(scaled))
        bins = np.clip(b, 0, MAX_DECADE_BIN).astype(np.int64)
        return int((bins < obins).sum())

    saturation = int((obins > 0).sum())
    if reference_safe_count > saturation:
        raise CalibrationError(
            f"target of {reference_safe_count} safe errors is unreachable; "
            f"at most {saturation} passwords can ever bin below the oracle",
            achieved_safe_count=saturation)
    if safe_count(1) >= reference_safe_count:
        bundle.scaling_factor = 1
        return 1
    lo, hi = 1, 2
    while safe_count(hi) < reference_safe_count:
        lo, hi = hi, hi * 2
        if hi > 10 ** 24:
            achieved = safe_count(lo)
            raise CalibrationError(
                f"could not reach {reference_safe_count} safe errors "
                f"(achieved {achieved} at factor {lo})",
                achieved_safe_count=achieved)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if safe_count(mid) >= reference_safe_count:
            hi = mid
        else:
            lo = mid
    bundle.scaling_factor = hi
    return hi
