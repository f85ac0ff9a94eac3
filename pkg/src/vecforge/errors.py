"""Exception types shared across the package.

Everything raised on bad data or bad model files derives from
``VecforgeError`` so the CLI can map it to a single exit code.
"""


class VecforgeError(Exception):
    """Base class for data and model errors."""


class CorpusError(VecforgeError):
    """Malformed corpus input (duplicate tags, unreadable file, ...)."""


class VocabularyError(VecforgeError):
    """Vocabulary cannot be built or queried as requested."""


class ModelFormatError(VecforgeError):
    """Native model file or word-vector file is malformed."""


class TrainingError(VecforgeError):
    """Training or inference preconditions violated."""


class EvaluationError(VecforgeError):
    """Evaluation input invalid (bad pairs file, one-class labels, ...)."""
