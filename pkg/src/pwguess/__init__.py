"""Character-level password modeling and guess-number estimation.

The pipeline: ingest and filter corpora, pretrain a causal transformer
decoder (or the n-gram baseline) on leaked-password data, optionally
finetune on a smaller target corpus, estimate per-password guess numbers by
Monte Carlo sampling, and export a quantized self-contained strength-meter
bundle that clients can evaluate offline.
"""

from .corpus import (Corpus, FilterPolicy, RejectionReport, TrigramDistribution,
                     corpus_from_passwords, js_divergence, load_corpus,
                     sample_corpus, save_corpus, split_corpus,
                     trigram_distribution)
from .errors import (CalibrationError, CheckpointError, CorpusError,
                     EmptyCorpusError, EstimatorError, ModelConfigError,
                     OracleError, PsmError, PwGuessError, SequenceTooLongError,
                     TokenizeError, TrainingError)
from .markov import NgramModel, load_ngram, save_ngram, train_ngram
from .mc import (CurveComparison, GuessingCurve, MonteCarloEstimator,
                 build_estimator, compare_curves, default_grid, guessing_curve,
                 interpolate_coverage, load_estimator, read_curve,
                 save_estimator, score_all, write_curve)
from .model import (DecoderModel, ModelConfig, SampleResult, load_checkpoint,
                    parameter_count, save_checkpoint)
from .psm import (ErrorMatrix, PsmBundle, QuantizationMode, StrengthReport,
                  calibrate_scaling, decade_bin, error_matrix, min_guess,
                  parse_bundle, quantize, read_bundle, serialize_bundle,
                  write_bundle)
from .training import TrainingConfig, TrainingReport, finetune, pretrain
from .vocab import PRINTABLE_ASCII, Vocabulary, default_vocabulary

__version__ = "0.1.0"

__all__ = [
    "Corpus", "FilterPolicy", "RejectionReport", "TrigramDistribution",
    "corpus_from_passwords", "js_divergence", "load_corpus", "sample_corpus",
    "save_corpus", "split_corpus", "trigram_distribution",
    "PwGuessError", "CorpusError", "EmptyCorpusError", "TokenizeError",
    "SequenceTooLongError", "ModelConfigError", "TrainingError",
    "CheckpointError", "EstimatorError", "PsmError", "CalibrationError",
    "OracleError",
    "NgramModel", "train_ngram", "save_ngram", "load_ngram",
    "MonteCarloEstimator", "GuessingCurve", "CurveComparison",
    "build_estimator", "guessing_curve",
    "interpolate_coverage",
    "score_all", "compare_curves", "default_grid",
    "save_estimator", "load_estimator", "write_curve", "read_curve",
    "ModelConfig", "DecoderModel", "SampleResult", "parameter_count",
    "save_checkpoint", "load_checkpoint",
    "QuantizationMode", "PsmBundle", "StrengthReport", "ErrorMatrix",
    "quantize", "serialize_bundle", "parse_bundle", "write_bundle",
    "read_bundle", "min_guess", "calibrate_scaling", "error_matrix",
    "decade_bin",
    "TrainingConfig", "TrainingReport", "pretrain", "finetune",
    "Vocabulary", "PRINTABLE_ASCII", "default_vocabulary",
    "__version__",
]
