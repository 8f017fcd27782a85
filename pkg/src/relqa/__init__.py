"""Joint embedding of relation mentions, QA pairs, and shared text features.

The package learns one low-dimensional space for relation mentions, QA
entity-mention pairs, text features, and relation types from a distantly
supervised relation-extraction corpus plus a QA corpus, then labels test
mentions by nearest relation type.
"""

__version__ = "0.1.0"

from relqa.corpus import (
    AnswerSentence,
    EntityMention,
    LabeledCorpus,
    QACorpus,
    QAPair,
    Question,
    RelationMention,
    RelationType,
    Sentence,
    Token,
    load_qa_corpus,
    load_re_corpus,
    sample_negative_mentions,
    save_qa_corpus,
    save_re_corpus,
)
from relqa.evaluation import (
    MetricsReport,
    SynthConfig,
    evaluate,
    generate_synthetic,
    load_labels,
    sweep_eta,
    write_labels,
)
from relqa.features import BrownClusterMap, FeatureConfig, FeatureVector, extract_features
from relqa.graph import HeterogeneousGraph, build_graph, load_graph, save_graph, shared_feature_stats
from relqa.inference import (
    InferenceConfig,
    Prediction,
    embed_test_mention,
    predict_corpus,
    predict_type,
    write_predictions,
)
from relqa.qapairs import PairGenConfig, generate_pairs
from relqa.sampling import AliasTable, stage_rng
from relqa.training import (
    EmbeddingStore,
    TrainConfig,
    TrainingDivergedError,
    load_model,
    objective_total,
    save_model,
    train,
)

__all__ = [
    "AliasTable",
    "AnswerSentence",
    "BrownClusterMap",
    "EmbeddingStore",
    "EntityMention",
    "FeatureConfig",
    "FeatureVector",
    "HeterogeneousGraph",
    "InferenceConfig",
    "LabeledCorpus",
    "MetricsReport",
    "PairGenConfig",
    "Prediction",
    "QACorpus",
    "QAPair",
    "Question",
    "RelationMention",
    "RelationType",
    "Sentence",
    "SynthConfig",
    "Token",
    "TrainConfig",
    "TrainingDivergedError",
    "build_graph",
    "embed_test_mention",
    "evaluate",
    "extract_features",
    "generate_pairs",
    "generate_synthetic",
    "load_graph",
    "load_labels",
    "load_model",
    "load_qa_corpus",
    "load_re_corpus",
    "objective_total",
    "predict_corpus",
    "predict_type",
    "sample_negative_mentions",
    "save_graph",
    "save_model",
    "save_qa_corpus",
    "save_re_corpus",
    "shared_feature_stats",
    "stage_rng",
    "sweep_eta",
    "train",
    "write_labels",
    "write_predictions",
]
