"""Scoring, threshold sweeps, and synthetic corpus generation.

Precision counts only committed (non-None) predictions; recall is against
gold non-None mentions.  The synthetic generator builds matched RE train,
RE test, and QA corpora over a controlled vocabulary where each relation
type owns a disjoint pool of indicative words, so embedding quality is
measurable without external data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from relqa.corpus import (
    NONE_TYPE_ID,
    NONE_TYPE_NAME,
    AnswerSentence,
    EntityMention,
    LabeledCorpus,
    QACorpus,
    Question,
    RelationMention,
    RelationType,
    Sentence,
    Token,
)
from relqa.inference import Prediction
from relqa.sampling import stage_rng

# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class TypeMetrics:
    precision: float
    recall: float
    f1: float
    predicted: int
    gold: int
    correct: int


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    total: int
    predicted_non_none: int
    gold_non_none: int
    correct: int
    per_type: dict[str, TypeMetrics] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": {
                "total": self.total,
                "predicted_non_none": self.predicted_non_none,
                "gold_non_none": self.gold_non_none,
                "correct": self.correct,
            },
            "per_type": {
                name: {
                    "precision": t.precision,
                    "recall": t.recall,
                    "f1": t.f1,
                    "predicted": t.predicted,
                    "gold": t.gold,
                    "correct": t.correct,
                }
                for name, t in self.per_type.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        rows = [("type", "prec", "rec", "f1", "pred", "gold")]
        rows.append(
            (
                "ALL",
                f"{self.precision:.4f}",
                f"{self.recall:.4f}",
                f"{self.f1:.4f}",
                str(self.predicted_non_none),
                str(self.gold_non_none),
            )
        )
        for name in sorted(self.per_type):
            t = self.per_type[name]
            rows.append(
                (name, f"{t.precision:.4f}", f"{t.recall:.4f}", f"{t.f1:.4f}", str(t.predicted), str(t.gold))
            )
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if (p + r) else 0.0
    return p, r, f1


def evaluate(predicted: Mapping[str, str], gold: Mapping[str, str]) -> MetricsReport:
    """Score predicted labels against gold labels over identical mention ids.

    Both mappings are mention id -> type name, with "None" standing for no
    relation.  A mention counts as correct when both sides commit to the
    same target type.
    """
    if set(predicted) != set(gold):
        missing = set(gold) - set(predicted)
        extra = set(predicted) - set(gold)
        raise ValueError(
            f"prediction and gold mention ids differ "
            f"({len(missing)} missing, {len(extra)} unexpected)"
        )
    correct = 0
    pred_nn = 0
    gold_nn = 0
    names = set()
    for mid, plabel in predicted.items():
        glabel = gold[mid]
        if plabel != NONE_TYPE_NAME:
            pred_nn += 1
            names.add(plabel)
        if glabel != NONE_TYPE_NAME:
            gold_nn += 1
            names.add(glabel)
        if plabel != NONE_TYPE_NAME and plabel == glabel:
            correct += 1
    p, r, f1 = _prf(correct, pred_nn, gold_nn)
    per_type = {}
    for name in sorted(names):
        c_t = sum(1 for mid in predicted if predicted[mid] == name and gold[mid] == name)
        p_t = sum(1 for v in predicted.values() if v == name)
        g_t = sum(1 for v in gold.values() if v == name)
        tp, tr, tf = _prf(c_t, p_t, g_t)
        per_type[name] = TypeMetrics(tp, tr, tf, p_t, g_t, c_t)
    return MetricsReport(
        precision=p,
        recall=r,
        f1=f1,
        total=len(gold),
        predicted_non_none=pred_nn,
        gold_non_none=gold_nn,
        correct=correct,
        per_type=per_type,
    )


def predictions_to_labels(predictions: Iterable[Prediction]) -> dict[str, str]:
    return {p.mention_id: p.type_name for p in predictions}


def load_labels(path) -> dict[str, str]:
    """mention id -> type name from the first two tab-separated columns.

    Reads both prediction files and gold files (extra columns ignored).
    """
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected at least 2 tab-separated columns")
            mid, label = parts[0], parts[1]
            if mid in labels:
                raise ValueError(f"{path}:{lineno}: duplicate mention id {mid!r}")
            labels[mid] = label
    return labels


def write_labels(labels: Mapping[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mid, label in labels.items():
            fh.write(f"{mid}\t{label}\n")


# ---------------------------------------------------------------------------
# threshold sweep


@dataclass(frozen=True)
class SweepPoint:
    eta: float
    report: MetricsReport


def rethreshold(predictions: Sequence[Prediction], eta: float) -> list[Prediction]:
    """Raise the commitment threshold on zero-threshold predictions.

    A committed prediction whose score falls below eta flips to None; a
    prediction that already abstained stays None.
    """
    out = []
    for p in predictions:
        if p.type_id != NONE_TYPE_ID and p.score < eta:
            out.append(replace(p, type_id=NONE_TYPE_ID, type_name=NONE_TYPE_NAME))
        else:
            out.append(p)
    return out


def sweep_eta(
    predictions: Sequence[Prediction], gold: Mapping[str, str], etas: Sequence[float]
) -> list[SweepPoint]:
    """Score one prediction set under several thresholds.

    predictions must come from a zero-threshold run so every committed
    row still carries its best type and score.
    """
    return [
        SweepPoint(eta=float(eta), report=evaluate(predictions_to_labels(rethreshold(predictions, eta)), gold))
        for eta in etas
    ]


# ---------------------------------------------------------------------------
# synthetic corpora

GAP_SIGNAL_PROB = 0.75
ENTITY_SURFACES = tuple(f"E{i}" for i in range(8))
FRAME_TOKEN = "the"
TEST_FRACTION = 0.1
TEST_MIN = 20
TEST_NONE_FRACTION = 0.15
QA_POS_PER_QUESTION = 4
QA_NEG_PER_QUESTION = 4


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic relation world.

    vocab_size is the whole word inventory; the first
    num_types * features_per_mention words are split into disjoint
    per-type indicative pools, the rest are background noise words.
    fp_rate adds a spurious candidate type to a linked training mention,
    fn_rate demotes one to an unlinked (None-candidate) mention; test
    labels stay clean.  qa_share is the fraction of each type pool the QA
    positives draw from, which is what couples the two corpora.

    confusion_rate makes relation contexts ambiguous: that fraction of a
    mention's signal words is drawn from the sibling type's pool (types
    pair 0-1, 2-3, ...) in train and test sentences alike, so sibling
    contexts overlap and co-occurrence alone cannot keep their word
    embeddings apart.  QA answer sentences stay unconfused, which is what
    lets the QA side disentangle what the RE side cannot.  At 0.0 the
    generator consumes the exact same random stream as before the knob
    existed, keeping seeded corpora byte-stable.
    """

    num_types: int
    num_mentions: int
    num_questions: int = 0
    vocab_size: int = 400
    features_per_mention: int = 8
    fp_rate: float = 0.0
    fn_rate: float = 0.0
    qa_share: float = 1.0
    confusion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_types < 1:
            raise ValueError("num_types must be >= 1")
        if self.num_mentions < 1:
            raise ValueError("num_mentions must be >= 1")
        if self.num_questions < 0:
            raise ValueError("num_questions must be >= 0")
        if self.features_per_mention < 1:
            raise ValueError("features_per_mention must be >= 1")
        for name in ("fp_rate", "fn_rate", "qa_share", "confusion_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        reserved = self.num_types * self.features_per_mention
        if self.vocab_size <= reserved:
            raise ValueError(
                f"vocab_size {self.vocab_size} cannot cover {self.num_types} types "
                f"x {self.features_per_mention} indicative words plus background"
            )


@dataclass(frozen=True)
class SynthData:
    train: LabeledCorpus
    test: LabeledCorpus
    gold: dict[str, str]
    qa: QACorpus


def _gap_words(rng, pool, background, count, signal_prob, sibling=None, confusion=0.0):
    # the confusion draw must stay behind the > 0 guard: at 0.0 the stream
    # has to match corpora generated before the knob existed
    words = []
    for _ in range(count):
        if pool and rng.random() < signal_prob:
            src = pool
            if confusion > 0.0 and sibling and rng.random() < confusion:
                src = sibling
            words.append(src[int(rng.integers(len(src)))])
        else:
            words.append(background[int(rng.integers(len(background)))])
    return words


def _relation_sentence(sid, e1, e2, gap):
    toks = [e1, FRAME_TOKEN, *gap, FRAME_TOKEN, e2]
    return Sentence(id=sid, tokens=tuple(Token(t) for t in toks)), (0, 1), (len(toks) - 1, len(toks))


def _make_mention(mid, sid, span1, span2, candidates):
    m1 = EntityMention(sid, span1[0], span1[1], span1[0])
    m2 = EntityMention(sid, span2[0], span2[1], span2[0])
    return RelationMention(id=mid, m1=m1, m2=m2, candidate_types=frozenset(candidates))


def generate_synthetic(cfg: SynthConfig) -> SynthData:
    """Build matched train/test/QA corpora; byte-stable for a fixed config."""
    k = cfg.num_types
    p = cfg.features_per_mention
    words = [f"w{i}" for i in range(cfg.vocab_size)]
    pools = [words[t * p : (t + 1) * p] for t in range(k)]
    # confusion siblings pair 0-1, 2-3, ...; an odd tail type is its own sibling
    siblings = [pools[t ^ 1] if (t ^ 1) < k else pools[t] for t in range(k)]
    background = words[k * p :]
    qa_slice_len = math.ceil(cfg.qa_share * p)
    qa_pools = [pool[:qa_slice_len] for pool in pools]
    types = (RelationType(0, NONE_TYPE_NAME),) + tuple(
        RelationType(t + 1, f"rel{t + 1}") for t in range(k)
    )

    rng_s = stage_rng(cfg.seed, "synth/structure")
    rng_n = stage_rng(cfg.seed, "synth/noise")
    rng_t = stage_rng(cfg.seed, "synth/test")
    rng_q = stage_rng(cfg.seed, "synth/qa")

    def surfaces(rng):
        i = int(rng.integers(len(ENTITY_SURFACES)))
        j = int(rng.integers(len(ENTITY_SURFACES) - 1))
        j += j >= i
        return ENTITY_SURFACES[i], ENTITY_SURFACES[j]

    train_sentences: dict[str, Sentence] = {}
    train_mentions = []
    for i in range(cfg.num_mentions):
        t = i % k
        sid = f"s{i}"
        e1, e2 = surfaces(rng_s)
        gap = _gap_words(
            rng_s, pools[t], background, p, GAP_SIGNAL_PROB, siblings[t], cfg.confusion_rate
        )
        sent, span1, span2 = _relation_sentence(sid, e1, e2, gap)
        train_sentences[sid] = sent
        u_fn = rng_n.random()
        u_fp = rng_n.random()
        if u_fn < cfg.fn_rate:
            candidates = {NONE_TYPE_ID}
        elif u_fp < cfg.fp_rate and k > 1:
            wrong = int(rng_n.integers(k - 1))
            wrong += wrong >= t
            candidates = {t + 1, wrong + 1}
        else:
            candidates = {t + 1}
        train_mentions.append(_make_mention(f"m{i}", sid, span1, span2, candidates))
    train = LabeledCorpus(sentences=train_sentences, mentions=tuple(train_mentions), types=types)

    num_test = max(TEST_MIN, round(TEST_FRACTION * cfg.num_mentions))
    test_sentences: dict[str, Sentence] = {}
    test_mentions = []
    gold: dict[str, str] = {}
    for i in range(num_test):
        sid = f"ts{i}"
        mid = f"tm{i}"
        e1, e2 = surfaces(rng_t)
        if rng_t.random() < TEST_NONE_FRACTION:
            gap = _gap_words(rng_t, None, background, p, 0.0)
            candidates = {NONE_TYPE_ID}
            gold[mid] = NONE_TYPE_NAME
        else:
            t = i % k
            gap = _gap_words(
                rng_t, pools[t], background, p, GAP_SIGNAL_PROB, siblings[t], cfg.confusion_rate
            )
            candidates = {t + 1}
            gold[mid] = types[t + 1].name
        sent, span1, span2 = _relation_sentence(sid, e1, e2, gap)
        test_sentences[sid] = sent
        test_mentions.append(_make_mention(mid, sid, span1, span2, candidates))
    test = LabeledCorpus(sentences=test_sentences, mentions=tuple(test_mentions), types=types)

    qa_sentences: dict[str, Sentence] = {}
    questions = []
    answers = []
    for i in range(cfg.num_questions):
        t = i % k
        qid = f"q{i}"
        eq = ENTITY_SURFACES[int(rng_q.integers(len(ENTITY_SURFACES)))]
        qsid = f"{qid}:s"
        q_sent = Sentence(
            id=qsid,
            tokens=(Token("which"), Token(eq)),
            mentions=(EntityMention(qsid, 1, 2, 1),),
        )
        qa_sentences[qsid] = q_sent
        questions.append(Question(id=qid, sentence=q_sent, question_entity=q_sent.mentions[0]))
        for j in range(QA_POS_PER_QUESTION):
            ea = eq
            while ea == eq:
                ea = ENTITY_SURFACES[int(rng_q.integers(len(ENTITY_SURFACES)))]
            gap = _gap_words(rng_q, qa_pools[t], background, p, GAP_SIGNAL_PROB)
            sid = f"{qid}:p{j}"
            sent, span1, span2 = _relation_sentence(sid, eq, ea, gap)
            sent = Sentence(
                id=sid,
                tokens=sent.tokens,
                mentions=(
                    EntityMention(sid, span1[0], span1[1], span1[0]),
                    EntityMention(sid, span2[0], span2[1], span2[0]),
                ),
            )
            qa_sentences[sid] = sent
            answers.append(
                AnswerSentence(question_id=qid, polarity=True, sentence=sent, answer_span=span2)
            )
        for j in range(QA_NEG_PER_QUESTION):
            eb = ENTITY_SURFACES[int(rng_q.integers(len(ENTITY_SURFACES)))]
            gap = _gap_words(rng_q, None, background, p, 0.0)
            sid = f"{qid}:n{j}"
            sent, span1, span2 = _relation_sentence(sid, eq, eb, gap)
            sent = Sentence(
                id=sid,
                tokens=sent.tokens,
                mentions=(
                    EntityMention(sid, span1[0], span1[1], span1[0]),
                    EntityMention(sid, span2[0], span2[1], span2[0]),
                ),
            )
            qa_sentences[sid] = sent
            answers.append(AnswerSentence(question_id=qid, polarity=False, sentence=sent))
    qa = QACorpus(sentences=qa_sentences, questions=tuple(questions), answers=tuple(answers))

    return SynthData(train=train, test=test, gold=gold, qa=qa)
