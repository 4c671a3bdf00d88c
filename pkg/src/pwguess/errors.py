"""Exception hierarchy shared by all pwguess modules."""


class PwGuessError(Exception):
    """Base class for all domain errors raised by this package."""


class CorpusError(PwGuessError):
    """Corpus loading, filtering, sampling, or splitting failed."""


class EmptyCorpusError(CorpusError):
    """No password survived filtering (or the input file was empty)."""


class TokenizeError(PwGuessError):
    """A password cannot be encoded, or a token sequence cannot be decoded."""


class SequenceTooLongError(PwGuessError):
    """Input exceeds the model's position budget."""


class ModelConfigError(PwGuessError):
    """Invalid model hyperparameters, or a checkpoint/config mismatch."""


class TrainingError(PwGuessError):
    """Training preconditions violated (e.g. corpus smaller than one batch)."""


class CheckpointError(PwGuessError):
    """A checkpoint or bundle file is malformed or inconsistent."""


class EstimatorError(PwGuessError):
    """Monte Carlo estimator construction or curve comparison failed."""


class PsmError(PwGuessError):
    """A strength-meter bundle is malformed or was built inconsistently."""


class CalibrationError(PwGuessError):
    """Scaling-factor calibration cannot reach the requested target."""

    def __init__(self, message: str, achieved_safe_count: int | None = None):
        super().__init__(message)
        self.achieved_safe_count = achieved_safe_count


class OracleError(PwGuessError):
    """Reference (min-guess) estimates are missing or inconsistent."""
