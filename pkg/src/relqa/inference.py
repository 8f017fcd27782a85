"""Relation type inference for unseen mentions.

A test mention never has its own learned vector; it borrows one by summing
the embeddings of its known features, weighted by multiplicity.  The
prediction is the best-scoring target type unless the vector is empty or
the score falls below the confidence threshold, in which case the mention
is labeled None (type id 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from relqa.corpus import NONE_TYPE_ID, LabeledCorpus
from relqa.features import BrownClusterMap, FeatureConfig, extract_features
from relqa.training import EmbeddingStore

SIMILARITIES = ("cosine", "dot")


@dataclass(frozen=True)
class InferenceConfig:
    """eta: minimum score to commit to a target type (below it: None)."""

    eta: float = 0.35
    similarity: str = "cosine"

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"similarity must be one of {SIMILARITIES}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


def embed_test_mention(features, store: EmbeddingStore, vocab=None) -> tuple[np.ndarray, int]:
    """Multiplicity-weighted sum of known feature rows.

    features iterates (feature string, count) pairs; strings absent from the
    vocabulary contribute nothing.  vocab defaults to the feature identity
    the store itself carries; pass a FeatureVocabulary to look rows up
    through it instead (its ids must index C).  Returns (vector, number of
    distinct known features).
    """
    z = np.zeros(store.d, dtype=np.float64)
    known = 0
    index = vocab.index if vocab is not None else store.feature_index
    for feat, count in features:
        j = index.get(feat)
        if j is None:
            continue
        known += 1
        z += count * store.C[j]
    return z, known


def predict_type(z, store: EmbeddingStore, cfg: InferenceConfig) -> tuple[int, float]:
    """(type id, score); id 0 is the None label.

    None when the vector is all-zero (score 0.0) or the best target score
    is below eta (score still reported).  Score ties resolve to the lowest
    type id.
    """
    z = np.asarray(z, dtype=np.float64)
    if store.R.shape[0] <= 1:
        return NONE_TYPE_ID, 0.0
    zn = float(np.linalg.norm(z))
    if zn == 0.0:
        return NONE_TYPE_ID, 0.0
    targets = store.R[1:]
    if cfg.similarity == "cosine":
        norms = np.linalg.norm(targets, axis=1)
        scores = (targets @ z) / (zn * np.where(norms == 0.0, np.inf, norms))
    else:
        scores = targets @ z
    best = int(np.argmax(scores))
    score = float(scores[best])
    if score < cfg.eta:
        return NONE_TYPE_ID, score
    return best + 1, score


@dataclass(frozen=True)
class Prediction:
    mention_id: str
    type_id: int
    type_name: str
    score: float
    known_features: int


def predict_corpus(
    corpus: LabeledCorpus,
    store: EmbeddingStore,
    feature_cfg: FeatureConfig,
    infer_cfg: InferenceConfig,
    brown: BrownClusterMap | None = None,
) -> list[Prediction]:
    """Predict every mention of a corpus, in corpus order.

    The model must carry feature and type identity (a store straight from
    train() or load_model() does); re-extraction uses the same feature
    configuration the training graph was built with.
    """
    if len(store.feature_strings) != store.C.shape[0]:
        raise ValueError("model carries no feature identity for its C rows")
    if len(store.type_names) != store.R.shape[0]:
        raise ValueError("model carries no type identity for its R rows")
    out = []
    for m in corpus.mentions:
        sentence = corpus.sentence_of(m)
        feats = extract_features(m.m1, m.m2, sentence, feature_cfg, brown)
        z, known = embed_test_mention(feats, store)
        tid, score = predict_type(z, store, infer_cfg)
        out.append(
            Prediction(
                mention_id=m.id,
                type_id=tid,
                type_name=store.type_names[tid],
                score=score,
                known_features=known,
            )
        )
    return out


def write_predictions(predictions: Iterable[Prediction], path) -> None:
    """Tab-separated rows: mention_id, type name, score, known feature count."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(f"{p.mention_id}\t{p.type_name}\t{p.score!r}\t{p.known_features}\n")
