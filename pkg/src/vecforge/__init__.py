"""vecforge: a self-contained document-embedding engine.

Trains word and document embeddings with negative sampling (skip-gram,
cbow, distributed bag of words, distributed memory with concatenation),
infers embeddings for unseen documents against a frozen model, scores
document pairs with embedding or n-gram baselines, and evaluates rankings
with ROC AUC and similarity predictions with Pearson's r.
"""

from .baselines import average_embedding, js_divergence, ngram_profile, ngram_similarity
from .corpus import (
    Corpus,
    Document,
    NoiseTable,
    Vocabulary,
    VocabEntry,
    build_corpus,
    build_vocabulary,
    keep_probability,
    load_corpus,
    sample_noise,
)
from .embedding import (
    DocVector,
    EmbeddingModel,
    Hyperparams,
    cosine,
    export_text,
    load_model,
    load_word_vectors,
    save_model,
    save_word_vectors,
)
from .errors import (
    CorpusError,
    EvaluationError,
    ModelFormatError,
    TrainingError,
    VecforgeError,
    VocabularyError,
)
from .evaluation import (
    EvalReport,
    ScoredPair,
    make_synthetic,
    pearson,
    roc_auc,
    run_qdup,
    run_sts,
)
from .training import (
    InferParams,
    TrainingContext,
    build_input,
    epoch_learning_rate,
    infer_document,
    init_from_pretrained,
    negative_sampling_step,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "DocVector",
    "Document",
    "EmbeddingModel",
    "EvalReport",
    "EvaluationError",
    "Hyperparams",
    "InferParams",
    "ModelFormatError",
    "NoiseTable",
    "ScoredPair",
    "TrainingContext",
    "TrainingError",
    "VecforgeError",
    "VocabEntry",
    "Vocabulary",
    "VocabularyError",
    "average_embedding",
    "build_corpus",
    "build_input",
    "build_vocabulary",
    "cosine",
    "epoch_learning_rate",
    "export_text",
    "infer_document",
    "init_from_pretrained",
    "js_divergence",
    "keep_probability",
    "load_corpus",
    "load_model",
    "load_word_vectors",
    "make_synthetic",
    "negative_sampling_step",
    "ngram_profile",
    "ngram_similarity",
    "pearson",
    "roc_auc",
    "run_qdup",
    "run_sts",
    "sample_noise",
    "save_model",
    "save_word_vectors",
    "train",
]
