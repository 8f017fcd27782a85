"""QA pair generation from questions and polarity-labeled answer sentences.

From each question with a detectable question entity, one positive pair per
positive answer sentence (question-entity match, answer-entity match) and up
to a capped number of ordered negative pairs per negative answer sentence.
Failures never raise; they degrade to dropped sentences counted in the
generation report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from relqa.corpus import AnswerSentence, EntityMention, QACorpus, QAPair, Question, Sentence


@dataclass(frozen=True)
class PairGenConfig:
    """neg_pairs_per_sentence caps negatives drawn per answer sentence;
    sample_negatives_from_positives additionally samples negatives from
    positive answer sentences (excluding the emitted positive pair)."""

    neg_pairs_per_sentence: int = 10
    sample_negatives_from_positives: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.neg_pairs_per_sentence < 1:
            raise ValueError("neg_pairs_per_sentence must be >= 1")


@dataclass
class GenerationReport:
    """Counts emitted alongside generated pairs."""

    questions_processed: int = 0
    questions_without_entity: int = 0
    positive_sentences_dropped: int = 0
    pairs_positive: int = 0
    pairs_negative: int = 0

    def as_dict(self) -> dict:
        return {
            "questions_processed": self.questions_processed,
            "questions_without_entity": self.questions_without_entity,
            "positive_sentences_dropped": self.positive_sentences_dropped,
            "pairs_positive": self.pairs_positive,
            "pairs_negative": self.pairs_negative,
        }


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (insert/delete/substitute, unit cost)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def detect_question_entity(question: Question) -> EntityMention | None:
    """The question-sentence mention with the greatest start index, if any.

    A start-index tie (nested annotations) is broken toward the larger end.
    """
    best = None
    for m in question.sentence.mentions:
        if best is None or (m.start, m.end) > (best.start, best.end):
            best = m
    return best


def match_question_entity(
    question_entity: EntityMention,
    question_sentence: Sentence,
    answer: AnswerSentence,
) -> EntityMention | None:
    """Answer-sentence mention standing in for the question entity.

    Candidates must share the question entity's head token surface
    case-insensitively; among those the smallest case-sensitive character
    edit distance between full surfaces wins, ties broken by earliest start.
    Returns None when no mention passes the head filter.
    """
    q_head = question_sentence.tokens[question_entity.head_index].surface.lower()
    q_surface = question_sentence.mention_surface(question_entity)
    best = None
    best_key = None
    for m in answer.sentence.mentions:
        if answer.sentence.tokens[m.head_index].surface.lower() != q_head:
            continue
        key = (levenshtein(q_surface, answer.sentence.mention_surface(m)), m.start)
        if best_key is None or key < best_key:
            best, best_key = m, key
    return best


def match_answer_entity(answer: AnswerSentence) -> EntityMention | None:
    """Mention whose surface equals the answer-span surface exactly.

    Only defined for positive answer sentences; earliest start wins when
    several mentions carry the same surface.
    """
    if not answer.polarity:
        raise ValueError("match_answer_entity called on a negative answer sentence")
    target = answer.answer_surface()
    for m in sorted(answer.sentence.mentions, key=lambda m: (m.start, m.end)):
        if answer.sentence.mention_surface(m) == target:
            return m
    return None


def _ordered_pair(mentions: Sequence[EntityMention], idx: int) -> tuple[EntityMention, EntityMention]:
    """idx in [0, n*(n-1)) decoded as an ordered pair of distinct mentions."""
    n = len(mentions)
    i, j = divmod(idx, n - 1)
    if j >= i:
        j += 1
    return mentions[i], mentions[j]


def _sample_negatives(
    mentions: Sequence[EntityMention],
    cap: int,
    rng: np.random.Generator,
    exclude: tuple[EntityMention, EntityMention] | None = None,
) -> list[tuple[EntityMention, EntityMention]]:
    n = len(mentions)
    total = n * (n - 1)
    if total == 0:
        return []
    pool = range(total)
    if exclude is not None:
        pool = [
            k for k in pool
            if _ordered_pair(mentions, k) != exclude
        ]
        total = len(pool)
        if total == 0:
            return []
        take = min(cap, total)
        chosen = np.sort(rng.choice(total, size=take, replace=False))
        return [_ordered_pair(mentions, pool[int(k)]) for k in chosen]
    take = min(cap, total)
    chosen = np.sort(rng.choice(total, size=take, replace=False))
    return [_ordered_pair(mentions, int(k)) for k in chosen]


def generate_pairs(corpus: QACorpus, cfg: PairGenConfig) -> tuple[QACorpus, GenerationReport]:
    """Populate corpus.pairs; returns a new corpus plus the report.

    Questions without a question entity contribute nothing.  Positive
    sentences where either match fails, or where both matches land on the
    same mention, are dropped and counted.  Negative pairs are drawn
    uniformly without replacement from the n*(n-1) ordered mention pairs of
    each negative answer sentence, up to the configured cap.  Deterministic
    for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    report = GenerationReport()
    pairs: list[QAPair] = []

    by_question: dict[str, list[AnswerSentence]] = {q.id: [] for q in corpus.questions}
    for a in corpus.answers:
        by_question[a.question_id].append(a)

    for q in corpus.questions:
        report.questions_processed += 1
        q_ent = q.question_entity if q.question_entity is not None else detect_question_entity(q)
        if q_ent is None:
            report.questions_without_entity += 1
            continue
        for a_idx, answer in enumerate(by_question[q.id]):
            sent_mentions = sorted(answer.sentence.mentions, key=lambda m: (m.start, m.end))
            if answer.polarity:
                m1 = match_question_entity(q_ent, q.sentence, answer)
                m2 = match_answer_entity(answer) if m1 is not None else None
                emitted = None
                if m1 is None or m2 is None or (m1.start, m1.end) == (m2.start, m2.end):
                    report.positive_sentences_dropped += 1
                else:
                    emitted = (m1, m2)
                    pairs.append(
                        QAPair(id=f"{q.id}:pos:{a_idx}", question_id=q.id, m1=m1, m2=m2, polarity=True)
                    )
                    report.pairs_positive += 1
                if cfg.sample_negatives_from_positives:
                    negs = _sample_negatives(sent_mentions, cfg.neg_pairs_per_sentence, rng, exclude=emitted)
                    for j, (n1, n2) in enumerate(negs):
                        pairs.append(
                            QAPair(id=f"{q.id}:pneg:{a_idx}:{j}", question_id=q.id, m1=n1, m2=n2, polarity=False)
                        )
                        report.pairs_negative += 1
            else:
                negs = _sample_negatives(sent_mentions, cfg.neg_pairs_per_sentence, rng)
                for j, (n1, n2) in enumerate(negs):
                    pairs.append(
                        QAPair(id=f"{q.id}:neg:{a_idx}:{j}", question_id=q.id, m1=n1, m2=n2, polarity=False)
                    )
                    report.pairs_negative += 1

    out = QACorpus(
        sentences=corpus.sentences,
        questions=corpus.questions,
        answers=corpus.answers,
        pairs=tuple(pairs),
    )
    return out, report
