"""Command-line entry point covering the full experiment pipeline.

One binary, subcommand style.  Every subcommand prints a single JSON summary
to stdout and writes its artifacts to the paths given by --out flags.  Exit
status: 0 on success, 1 on a domain error (bad data, unreachable target), 2
on usage errors.  A JSON --config-file can supply any flag's value; explicit
flags win.  If PWGUESS_OUT_DIR is set, relative output paths land inside it;
PWGUESS_CACHE_DIR redirects the plotting cache.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from .corpus import (FilterPolicy, js_divergence, load_corpus, sample_corpus,
                     save_corpus, split_corpus, trigram_distribution)
from .errors import CalibrationError, CorpusError, PwGuessError
from .markov import load_ngram, save_ngram, train_ngram
from .mc import (MonteCarloEstimator, build_estimator, compare_curves,
                 guessing_curve, load_estimator, read_curve, save_estimator,
                 write_curve)
from .model import (CHECKPOINT_MAGIC, DecoderModel, ModelConfig,
                    load_checkpoint, save_checkpoint)
from .psm import (QuantizationMode, calibrate_scaling, error_matrix, min_guess,
                  quantize, read_bundle, write_bundle)
from .training import TrainingConfig, finetune, pretrain
from .vocab import Vocabulary, default_vocabulary


def resolve_out(path: str) -> Path:
    """Relative outputs land under PWGUESS_OUT_DIR when it is set."""
    p = Path(path)
    base = os.environ.get("PWGUESS_OUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def load_any_model(path):
    """Load either a decoder checkpoint or an n-gram model file by magic."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head == CHECKPOINT_MAGIC:
        return load_checkpoint(path)
    return load_ngram(path)


def _policy(args) -> FilterPolicy:
    return FilterPolicy(min_length=args.min_length, max_length=args.max_length)


def _load(path, args=None) -> "Corpus":
    policy = _policy(args) if args is not None and hasattr(args, "min_length") \
        else FilterPolicy()
    corpus, _ = load_corpus(path, policy)
    return corpus


def _model_config(spec: str) -> ModelConfig:
    if spec.lower() in ("small", "base"):
        return ModelConfig.preset(spec)
    with open(spec, "r", encoding="utf-8") as f:
        return ModelConfig.from_dict(json.load(f))


def _vocabulary(args, cfg: ModelConfig) -> Vocabulary:
    vocab = Vocabulary(args.charset) if getattr(args, "charset", None) \
        else default_vocabulary()
    if len(vocab) != cfg.vocab_size:
        raise CorpusError(
            f"vocabulary of {len(vocab)} tokens does not match config "
            f"vocab_size {cfg.vocab_size}; pass a matching --charset")
    return vocab


def _training_config(args, mode: str) -> TrainingConfig:
    return TrainingConfig(
        epochs=args.epochs, batch_size=args.batch,
        learning_rate=args.lr, lr_schedule=args.schedule,
        warmup_steps=args.warmup_steps, weight_decay=args.weight_decay,
        seed=args.seed, mode=mode, deterministic=args.deterministic)


def _write_training_outputs(args, report, out_path) -> dict:
    extras = {}
    if args.report:
        report_path = resolve_out(args.report)
        report.write_jsonl(report_path)
        extras["report"] = str(report_path)
        from .figures import save_training_curve

        fig_path = report_path.with_suffix(".png")
        save_training_curve(report, fig_path)
        extras["figure"] = str(fig_path)
    summary = {
        "checkpoint": str(out_path),
        "epochs": len(report.epoch_losses),
        "final_loss": report.final_loss,
        "epoch_losses": report.epoch_losses,
        "wall_clock_seconds": round(report.wall_clock_seconds, 3),
    }
    if report.eval_loss_before is not None:
        summary["eval_loss_before"] = report.eval_loss_before
    if report.eval_loss_after is not None:
        summary["eval_loss_after"] = report.eval_loss_after
    summary.update(extras)
    return summary


def read_oracle(paths) -> dict[str, float]:
    """Merge per-password guess numbers from score CSVs, keeping the minimum."""
    oracle: dict[str, float] = {}
    for path in paths:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or "password" not in reader.fieldnames \
                    or "guess_number" not in reader.fieldnames:
                raise CorpusError(
                    f"oracle file {path} needs password and guess_number columns")
            for row in reader:
                pw = row["password"]
                g = float(row["guess_number"])
                if pw in oracle:
                    oracle[pw] = min_guess([("a", oracle[pw]), ("b", g)])
                else:
                    oracle[pw] = g
    if not oracle:
        raise CorpusError("oracle files contain no rows")
    return oracle


# ------------------------------------------------------------------- handlers


def cmd_ingest(args) -> dict:
    policy = _policy(args)
    corpus, report = load_corpus(args.data, policy, dedupe=args.dedupe)
    out = resolve_out(args.out)
    save_corpus(corpus, out)
    return {"out": str(out), **report.as_dict()}


def cmd_sample(args) -> dict:
    corpus = _load(args.data, args)
    picked = sample_corpus(corpus, args.n, args.seed)
    out = resolve_out(args.out)
    save_corpus(picked, out)
    return {"out": str(out), "n": len(picked), "seed": args.seed}


def cmd_split(args) -> dict:
    corpus = _load(args.data, args)
    train, test = split_corpus(corpus, args.train_fraction, args.seed)
    out_train, out_test = resolve_out(args.out_train), resolve_out(args.out_test)
    save_corpus(train, out_train)
    save_corpus(test, out_test)
    return {"out_train": str(out_train), "out_test": str(out_test),
            "train_size": len(train), "test_size": len(test), "seed": args.seed}


def cmd_jsd(args) -> dict:
    a = trigram_distribution(_load(args.a, args))
    b = trigram_distribution(_load(args.b, args))
    return {"jsd": js_divergence(a, b), "a": str(args.a), "b": str(args.b)}


def cmd_pretrain(args) -> dict:
    cfg = _model_config(args.config)
    vocab = _vocabulary(args, cfg)
    data = _load(args.data, args)
    eval_corpus = _load(args.eval_data, args) if args.eval_data else None
    tc = _training_config(args, "pretrain")
    model, report = pretrain(cfg, data, tc, vocab=vocab, eval_corpus=eval_corpus)
    out = resolve_out(args.out)
    save_checkpoint(model, out)
    report.checkpoint_path = str(out)
    summary = _write_training_outputs(args, report, out)
    summary["parameters"] = sum(p.numel() for p in model.parameters())
    return summary


def cmd_finetune(args) -> dict:
    data = _load(args.data, args)
    eval_corpus = _load(args.eval_data, args) if args.eval_data else None
    tc = _training_config(args, "finetune")
    model, report = finetune(args.model, data, tc, eval_corpus=eval_corpus)
    out = resolve_out(args.out)
    save_checkpoint(model, out)
    report.checkpoint_path = str(out)
    return _write_training_outputs(args, report, out)


def cmd_gen(args) -> dict:
    model = load_any_model(args.model)
    result = model.sample(args.n, args.seed)
    out = resolve_out(args.out)
    if args.with_logprobs:
        with open(out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["password", "log_prob"])
            for pw, lp in zip(result.passwords, result.log_probs):
                writer.writerow([pw, f"{lp:.8f}"])
    else:
        with open(out, "w", encoding="utf-8") as f:
            for pw in result.passwords:
                f.write(pw + "\n")
    return {"out": str(out), "n": len(result), "seed": args.seed,
            "truncated": int(result.truncated.sum()),
            "irregular": int(result.irregular.sum())}


def cmd_score(args) -> dict:
    model = load_any_model(args.model)
    corpus = _load(args.data, args)
    logps = model.log_prob_batch(corpus.passwords)
    est = load_estimator(args.est) if args.est else None
    out = resolve_out(args.out)
    with open(out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        header = ["password", "log_prob"] + (["guess_number"] if est else [])
        writer.writerow(header)
        for i, (pw, lp) in enumerate(zip(corpus.passwords, logps)):
            row = [pw, f"{lp:.8f}"]
            if est:
                row.append(f"{max(est.guess_number(float(lp)), 1.0):.6g}")
            writer.writerow(row)
    summary = {"out": str(out), "count": len(corpus),
               "mean_log_prob": float(logps.mean())}
    if est:
        summary["estimator_n"] = est.n
    return summary


def cmd_estimator(args) -> dict:
    model = load_any_model(args.model)
    est = build_estimator(model, args.n, args.seed, model_id=args.model_id)
    out = resolve_out(args.out)
    save_estimator(est, out)
    return {"out": str(out), "n": est.n, "seed": args.seed,
            "model_id": est.model_id,
            "strongest_log_prob": float(est.sample_logprobs[0]),
            "weakest_log_prob": float(est.sample_logprobs[-1])}


def cmd_curve(args) -> dict:
    model = load_any_model(args.model)
    est = load_estimator(args.est)
    test = _load(args.test, args)
    import numpy as np

    grid = np.logspace(math.log10(args.gmin), math.log10(args.gmax), args.points)
    curve = guessing_curve(est, model, test, grid)
    out = resolve_out(args.out)
    write_curve(curve, out)
    summary = {"out": str(out), "test_size": curve.test_size,
               "unscored": curve.unscored,
               "coverage_start": float(curve.coverage[0]),
               "coverage_end": float(curve.coverage[-1])}
    if args.figure:
        from .figures import save_guessing_curves

        fig = resolve_out(args.figure)
        save_guessing_curves([curve], fig)
        summary["figure"] = str(fig)
    return summary


def cmd_compare(args) -> dict:
    a, b = read_curve(args.a), read_curve(args.b)
    cmp_result = compare_curves(a, b, points=args.points)
    summary = cmp_result.as_dict()
    summary["a"], summary["b"] = str(args.a), str(args.b)
    if args.out:
        out = resolve_out(args.out)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
        summary["out"] = str(out)
    if args.figure:
        from .figures import save_guessing_curves

        fig = resolve_out(args.figure)
        save_guessing_curves(
            [a, b], fig,
            labels=[a.model_id or "curve a", b.model_id or "curve b"],
            title="Guessing curve comparison")
        summary["figure"] = str(fig)
    return summary


def cmd_ngram_train(args) -> dict:
    corpus = _load(args.data, args)
    model = train_ngram(corpus, order=args.order, delta=args.delta,
                        backoff_threshold=args.threshold)
    out = resolve_out(args.out)
    save_ngram(model, out)
    return {"out": str(out), "order": model.order, "delta": model.delta,
            "backoff_threshold": model.backoff_threshold,
            "contexts": len(model._counts), "passwords": len(corpus)}


def cmd_psm_export(args) -> dict:
    model = load_checkpoint(args.model)
    est = load_estimator(args.est)
    mode = QuantizationMode(kind=args.quant, zip=args.zip)
    bundle = quantize(model, mode, est, scaling_factor=args.scaling_factor,
                      model_id=args.model_id or est.model_id)
    out = resolve_out(args.out)
    size = write_bundle(bundle, out)
    return {"out": str(out), "bytes": size, "quantization": args.quant,
            "zip": args.zip, "scaling_factor": bundle.scaling_factor,
            "estimator_n": len(bundle.est_logprobs)}


def cmd_psm_calibrate(args) -> dict:
    bundle = read_bundle(args.bundle)
    test = _load(args.test, args)
    oracle = read_oracle(args.oracle)
    try:
        factor = calibrate_scaling(bundle, oracle, test.passwords,
                                   args.reference_safe_count)
    except CalibrationError as e:
        if e.achieved_safe_count is not None:
            print(json.dumps({"error": str(e),
                              "achieved_safe_count": e.achieved_safe_count},
                             indent=2), file=sys.stderr)
            raise
        raise
    out = resolve_out(args.out)
    size = write_bundle(bundle, out)
    matrix = error_matrix(bundle, oracle, test.passwords)
    return {"out": str(out), "bytes": size, "scaling_factor": factor,
            "reference_safe_count": args.reference_safe_count,
            "safe": matrix.safe, "unsafe": matrix.unsafe,
            "accurate": matrix.accurate}


def cmd_psm_eval(args) -> dict:
    bundle = read_bundle(args.bundle)
    test = _load(args.test, args)
    oracle = read_oracle(args.oracle)
    matrix = error_matrix(bundle, oracle, test.passwords)
    out = resolve_out(args.out)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(matrix.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    summary = {"out": str(out), "total": matrix.total, "safe": matrix.safe,
               "unsafe": matrix.unsafe, "accurate": matrix.accurate,
               "scaling_factor": bundle.scaling_factor, **matrix.rates()}
    if args.scores:
        scores_path = resolve_out(args.scores)
        with open(scores_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["password", "log_prob", "guess_number",
                             "log10_guess_number", "decade_bin"])
            for pw in test.passwords:
                r = bundle.strength(pw)
                writer.writerow([pw, f"{r.log_prob:.8f}",
                                 f"{r.guess_number:.6g}",
                                 f"{r.log10_guess_number:.6f}", r.decade_bin])
        summary["scores"] = str(scores_path)
    if args.figure:
        from .figures import save_error_matrix

        fig = resolve_out(args.figure)
        save_error_matrix(matrix, fig)
        summary["figure"] = str(fig)
    return summary


# --------------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, seed: bool = False) -> None:
    p.add_argument("--config-file", help="JSON file supplying flag defaults")
    p.add_argument("--threads", type=int, default=None,
                   help="cap internal parallelism (thread count)")
    p.add_argument("--min-length", type=int, default=6,
                   help="corpus filter: minimum password length")
    p.add_argument("--max-length", type=int, default=30,
                   help="corpus filter: maximum password length")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed")


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=None,
                   help="learning rate (default 5e-4 pretrain, 5e-5 finetune)")
    p.add_argument("--schedule", choices=["constant", "linear-warmup-decay"],
                   default="linear-warmup-decay")
    p.add_argument("--warmup-steps", type=int, default=None)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--deterministic", action="store_true",
                   help="pin threads for bit-identical reruns")
    p.add_argument("--eval-data", default=None,
                   help="held-out corpus for cross-entropy reporting")
    p.add_argument("--report", default=None,
                   help="write per-step JSONL records (and a loss figure) here")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="pwguess",
        description="Password modeling: train character-level models, "
                    "estimate guess numbers, export strength-meter bundles.")
    subs = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name, handler, help_text, seed=False):
        p = subs.add_parser(name, help=help_text)
        _add_common(p, seed=seed)
        p.set_defaults(handler=handler)
        registry[name] = p
        return p

    p = sub("ingest", cmd_ingest, "filter a raw password file into a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dedupe", action="store_true")

    p = sub("sample", cmd_sample, "draw a uniform sub-corpus", seed=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub("split", cmd_split, "partition into train/test", seed=True)
    p.add_argument("--data", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)

    p = sub("jsd", cmd_jsd, "3-gram Jensen-Shannon divergence of two corpora")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub("pretrain", cmd_pretrain, "train a decoder from scratch", seed=True)
    p.add_argument("--config", required=True,
                   help="preset name (small/base) or JSON config path")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--charset", default=None,
                   help="character set for non-default vocabularies")
    _add_training_flags(p)

    p = sub("finetune", cmd_finetune, "continue training a checkpoint",
            seed=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)

    p = sub("gen", cmd_gen, "sample passwords from a model", seed=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--with-logprobs", action="store_true",
                   help="write CSV with log-probabilities instead of plain lines")

    p = sub("score", cmd_score, "log-probabilities (and ranks) for a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--est", default=None,
                   help="estimator file; adds a guess_number column")

    p = sub("estimator", cmd_estimator,
            "build a Monte Carlo guess-number estimator", seed=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=50000)
    p.add_argument("--out", required=True)
    p.add_argument("--model-id", default="")

    p = sub("curve", cmd_curve, "guessing curve over a test corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gmin", type=float, default=1.0)
    p.add_argument("--gmax", type=float, default=1e20)
    p.add_argument("--points", type=int, default=81)
    p.add_argument("--figure", default=None)

    p = sub("compare", cmd_compare, "difference between two guessing curves")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.add_argument("--figure", default=None)

    p = sub("ngram-train", cmd_ngram_train, "train the n-gram baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--threshold", type=int, default=10)

    p = sub("psm-export", cmd_psm_export, "export a strength-meter bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quant", choices=["fp32", "fp16", "int8"], default="int8")
    p.add_argument("--zip", action="store_true")
    p.add_argument("--scaling-factor", type=int, default=1)
    p.add_argument("--model-id", default="")

    p = sub("psm-calibrate", cmd_psm_calibrate,
            "fit the safety scaling factor against an oracle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--oracle", action="append", required=True,
                   help="score CSV with guess_number column; repeatable, "
                        "minimum wins per password")
    p.add_argument("--reference-safe-count", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub("psm-eval", cmd_psm_eval, "error matrix of a bundle vs. an oracle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--oracle", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scores", default=None,
                   help="also write per-password strength CSV here")
    p.add_argument("--figure", default=None)

    return parser, registry


def _apply_config_file(argv, registry) -> None:
    """Seed subparser defaults from --config-file so explicit flags override."""
    if not argv or argv[0].startswith("-") or argv[0] not in registry:
        return
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config-file", default=None)
    known, _ = pre.parse_known_args(argv[1:])
    if not known.config_file:
        return
    with open(known.config_file, "r", encoding="utf-8") as f:
        values = json.load(f)
    if not isinstance(values, dict):
        raise CorpusError("--config-file must contain a JSON object")
    sub = registry[argv[0]]
    valid = {a.dest for a in sub._actions}
    mapped = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            sub.error(f"config file sets unknown flag {key!r}")
        mapped[dest] = value
    sub.set_defaults(**mapped)
    for action in sub._actions:
        if action.dest in mapped:
            action.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if os.environ.get("PWGUESS_CACHE_DIR"):
        os.environ.setdefault("MPLCONFIGDIR", os.environ["PWGUESS_CACHE_DIR"])
    parser, registry = build_parser()
    try:
        _apply_config_file(argv, registry)
    except (OSError, json.JSONDecodeError) as e:
        print(f"pwguess: cannot read config file: {e}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.threads:
        import torch

        torch.set_num_threads(args.threads)
    try:
        summary = args.handler(args)
    except PwGuessError as e:
        print(f"pwguess: error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
