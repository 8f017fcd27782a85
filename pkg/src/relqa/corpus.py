"""Corpus data model and JSON-lines IO.

A relation-extraction (RE) corpus directory holds:

    sentences.jsonl   {"id": str, "tokens": [{"t": str, "pos": str}],
                       "mentions": [{"start": int, "end": int, "head": int}]}
    mentions.jsonl    {"id": str, "sid": str, "em1": {...}, "em2": {...},
                       "types": [str], "neg": bool}
    types.jsonl       {"id": int, "name": str}   (optional; written on save)

A QA corpus directory holds sentences.jsonl plus:

    qa.jsonl          question records {"qid": str, "sid": str, "qent": {...}?}
                      and answer records {"qid": str, "sid": str,
                      "polarity": bool, "answer_span": {"start","end"}?}
    pairs.jsonl       {"id": str, "qid": str, "sid": str, "m1": {...},
                       "m2": {...}, "polarity": bool}   (optional)

Token spans are half-open [start, end) over sentence tokens.  Sentence
records may carry entity-mention annotations in "mentions"; question and
answer sentences must be annotated this way for pair generation to find
anything.  The reserved relation type "None" always has id 0; target types
get contiguous ids from 1 in file order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NONE_TYPE_NAME = "None"
NONE_TYPE_ID = 0

SENTENCES_FILE = "sentences.jsonl"
MENTIONS_FILE = "mentions.jsonl"
TYPES_FILE = "types.jsonl"
QA_FILE = "qa.jsonl"
PAIRS_FILE = "pairs.jsonl"


class CorpusError(Exception):
    """Base class for corpus loading problems."""


class ParseError(CorpusError):
    """A line could not be parsed; message carries file and line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class IntegrityError(CorpusError):
    """Records parsed but cross-references or invariants are broken."""


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = ""

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")


@dataclass(frozen=True)
class EntityMention:
    """Half-open token span [start, end) with a head token inside it."""

    sentence_id: str
    start: int
    end: int
    head_index: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start}, {self.end})")
        if not (self.start <= self.head_index < self.end):
            raise ValueError(f"head {self.head_index} outside span [{self.start}, {self.end})")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]
    mentions: tuple[EntityMention, ...] = ()

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")
        for m in self.mentions:
            if m.sentence_id != self.id:
                raise ValueError(f"annotation for {m.sentence_id!r} attached to sentence {self.id!r}")
            if m.end > len(self.tokens):
                raise ValueError(f"annotation span [{m.start}, {m.end}) exceeds sentence {self.id!r}")

    def surface(self, start: int, end: int) -> str:
        """Whitespace-joined token surfaces of [start, end)."""
        return " ".join(t.surface for t in self.tokens[start:end])

    def mention_surface(self, m: EntityMention) -> str:
        return self.surface(m.start, m.end)


@dataclass(frozen=True)
class RelationType:
    id: int
    name: str


@dataclass(frozen=True)
class RelationMention:
    """Pair of entity mentions in one sentence with candidate type ids.

    candidate_types is either exactly {NONE_TYPE_ID} (a negative mention)
    or a non-empty set of target type ids that excludes NONE_TYPE_ID.
    """

    id: str
    m1: EntityMention
    m2: EntityMention
    candidate_types: frozenset[int]

    def __post_init__(self):
        if self.m1.sentence_id != self.m2.sentence_id:
            raise ValueError(f"mention {self.id!r}: arguments in different sentences")
        if (self.m1.start, self.m1.end) == (self.m2.start, self.m2.end):
            raise ValueError(f"mention {self.id!r}: argument spans are identical")
        if not self.candidate_types:
            raise ValueError(f"mention {self.id!r}: empty candidate set")
        if NONE_TYPE_ID in self.candidate_types and self.candidate_types != frozenset({NONE_TYPE_ID}):
            raise ValueError(f"mention {self.id!r}: None mixed with target candidates")

    @property
    def is_negative(self) -> bool:
        return self.candidate_types == frozenset({NONE_TYPE_ID})

    @property
    def sentence_id(self) -> str:
        return self.m1.sentence_id


@dataclass
class Question:
    id: str
    sentence: Sentence
    question_entity: EntityMention | None = None


@dataclass(frozen=True)
class AnswerSentence:
    question_id: str
    polarity: bool
    sentence: Sentence
    answer_span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.polarity:
            if self.answer_span is None:
                raise ValueError(f"positive answer for {self.question_id!r} lacks answer_span")
            s, e = self.answer_span
            if not (0 <= s < e <= len(self.sentence.tokens)):
                raise ValueError(f"answer_span [{s}, {e}) outside sentence {self.sentence.id!r}")
        elif self.answer_span is not None:
            raise ValueError(f"negative answer for {self.question_id!r} carries answer_span")

    def answer_surface(self) -> str:
        s, e = self.answer_span
        return self.sentence.surface(s, e)


@dataclass(frozen=True)
class QAPair:
    """Ordered entity-mention pair extracted from one answer sentence."""

    id: str
    question_id: str
    m1: EntityMention
    m2: EntityMention
    polarity: bool

    def __post_init__(self):
        if self.m1.sentence_id != self.m2.sentence_id:
            raise ValueError(f"pair {self.id!r}: mentions in different sentences")
        if (self.m1.start, self.m1.end) == (self.m2.start, self.m2.end):
            raise ValueError(f"pair {self.id!r}: mention spans are identical")

    @property
    def sentence_id(self) -> str:
        return self.m1.sentence_id


@dataclass
class LabeledCorpus:
    """Immutable-by-convention RE corpus: sentences, mentions, type table."""

    sentences: dict[str, Sentence]
    mentions: tuple[RelationMention, ...]
    types: tuple[RelationType, ...]

    def __post_init__(self):
        for k, t in enumerate(self.types):
            if t.id != k:
                raise ValueError("type ids must be contiguous from 0")
        if not self.types or self.types[NONE_TYPE_ID].name != NONE_TYPE_NAME:
            raise ValueError(f"type id 0 must be the reserved {NONE_TYPE_NAME!r} type")

    def type_id(self, name: str) -> int:
        for t in self.types:
            if t.name == name:
                return t.id
        raise KeyError(name)

    def type_name(self, type_id: int) -> str:
        return self.types[type_id].name

    def sentence_of(self, m: RelationMention) -> Sentence:
        return self.sentences[m.sentence_id]

    @property
    def target_types(self) -> tuple[RelationType, ...]:
        return self.types[1:]


@dataclass
class QACorpus:
    """QA corpus: questions, polarity-labeled answer sentences, QA pairs."""

    sentences: dict[str, Sentence]
    questions: tuple[Question, ...]
    answers: tuple[AnswerSentence, ...]
    pairs: tuple[QAPair, ...] = ()

    def answers_for(self, question_id: str) -> tuple[AnswerSentence, ...]:
        return tuple(a for a in self.answers if a.question_id == question_id)

    def empty_questions(self) -> tuple[str, ...]:
        """Question ids with zero answer sentences (loaded but flagged)."""
        seen = {a.question_id for a in self.answers}
        return tuple(q.id for q in self.questions if q.id not in seen)

    def sentence_of(self, obj: QAPair | AnswerSentence) -> Sentence:
        if isinstance(obj, AnswerSentence):
            return obj.sentence
        return self.sentences[obj.sentence_id]


def _iter_records(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ParseError(path, lineno, "record is not a JSON object")
            yield lineno, rec


def _require(rec: dict, key: str, path: Path, lineno: int):
    if key not in rec:
        raise ParseError(path, lineno, f"missing key {key!r}")
    return rec[key]


def _parse_span(obj, sid: str, path: Path, lineno: int) -> EntityMention:
    if not isinstance(obj, dict):
        raise ParseError(path, lineno, "span must be an object")
    try:
        start = int(obj["start"])
        end = int(obj["end"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, lineno, f"bad span object {obj!r}") from exc
    head = int(obj.get("head", end - 1))
    try:
        return EntityMention(sentence_id=sid, start=start, end=end, head_index=head)
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from exc


def _load_sentences(path: Path) -> dict[str, Sentence]:
    sentences: dict[str, Sentence] = {}
    for lineno, rec in _iter_records(path):
        sid = str(_require(rec, "id", path, lineno))
        if sid in sentences:
            raise IntegrityError(f"{path}: duplicate sentence id {sid!r}")
        raw_tokens = _require(rec, "tokens", path, lineno)
        if not isinstance(raw_tokens, list) or not raw_tokens:
            raise ParseError(path, lineno, f"sentence {sid!r} has no tokens")
        try:
            tokens = tuple(Token(surface=str(t["t"]), pos=str(t.get("pos", ""))) for t in raw_tokens)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(path, lineno, f"bad token list: {exc}") from exc
        anns = tuple(_parse_span(a, sid, path, lineno) for a in rec.get("mentions", []))
        try:
            sentences[sid] = Sentence(id=sid, tokens=tokens, mentions=anns)
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    return sentences


def _check_mention_in_sentence(m: EntityMention, sentences: dict[str, Sentence], owner: str):
    sent = sentences.get(m.sentence_id)
    if sent is None:
        raise IntegrityError(f"{owner} references unknown sentence {m.sentence_id!r}")
    if m.end > len(sent.tokens):
        raise IntegrityError(f"{owner} span [{m.start}, {m.end}) exceeds sentence {m.sentence_id!r}")


def _load_types(path: Path) -> list[str]:
    names: dict[int, str] = {}
    for lineno, rec in _iter_records(path):
        tid = int(_require(rec, "id", path, lineno))
        names[tid] = str(_require(rec, "name", path, lineno))
    if sorted(names) != list(range(len(names))):
        raise IntegrityError(f"{path}: type ids not contiguous from 0")
    ordered = [names[i] for i in range(len(names))]
    if not ordered or ordered[NONE_TYPE_ID] != NONE_TYPE_NAME:
        raise IntegrityError(f"{path}: type id 0 must be {NONE_TYPE_NAME!r}")
    return ordered


def load_re_corpus(path) -> LabeledCorpus:
    """Load an RE corpus directory; see the module docstring for layout.

    Raises ParseError (with file and line number) on malformed records and
    IntegrityError on broken cross-references or candidate-set rules.
    """
    root = Path(path)
    sentences = _load_sentences(root / SENTENCES_FILE)

    types_path = root / TYPES_FILE
    pinned = _load_types(types_path) if types_path.exists() else None
    names: list[str] = list(pinned) if pinned else [NONE_TYPE_NAME]
    name_to_id = {n: i for i, n in enumerate(names)}

    mentions: list[RelationMention] = []
    seen_ids: set[str] = set()
    mpath = root / MENTIONS_FILE
    for lineno, rec in _iter_records(mpath):
        mid = str(_require(rec, "id", mpath, lineno))
        if mid in seen_ids:
            raise IntegrityError(f"{mpath}: duplicate mention id {mid!r}")
        seen_ids.add(mid)
        sid = str(_require(rec, "sid", mpath, lineno))
        em1 = _parse_span(_require(rec, "em1", mpath, lineno), sid, mpath, lineno)
        em2 = _parse_span(_require(rec, "em2", mpath, lineno), sid, mpath, lineno)
        _check_mention_in_sentence(em1, sentences, f"mention {mid!r}")
        _check_mention_in_sentence(em2, sentences, f"mention {mid!r}")
        type_names = _require(rec, "types", mpath, lineno)
        negative = bool(rec.get("neg", False))
        if negative:
            if type_names:
                raise IntegrityError(f"{mpath}: negative mention {mid!r} lists candidate types")
            cands = frozenset({NONE_TYPE_ID})
        else:
            if not type_names:
                raise IntegrityError(f"{mpath}: mention {mid!r} has no candidate types")
            if NONE_TYPE_NAME in type_names:
                raise IntegrityError(f"{mpath}: linkable mention {mid!r} lists {NONE_TYPE_NAME!r}")
            for n in type_names:
                if n not in name_to_id:
                    if pinned is not None:
                        raise IntegrityError(f"{mpath}: mention {mid!r} uses unknown type {n!r}")
                    name_to_id[n] = len(names)
                    names.append(n)
            cands = frozenset(name_to_id[n] for n in type_names)
        try:
            mentions.append(RelationMention(id=mid, m1=em1, m2=em2, candidate_types=cands))
        except ValueError as exc:
            raise IntegrityError(f"{mpath}: {exc}") from exc

    types = tuple(RelationType(id=i, name=n) for i, n in enumerate(names))
    return LabeledCorpus(sentences=sentences, mentions=tuple(mentions), types=types)


def load_qa_corpus(path) -> QACorpus:
    """Load a QA corpus directory (questions, answers, optional pairs)."""
    root = Path(path)
    sentences = _load_sentences(root / SENTENCES_FILE)

    questions: list[Question] = []
    answers: list[AnswerSentence] = []
    qids: set[str] = set()
    qpath = root / QA_FILE
    answer_rows = []
    for lineno, rec in _iter_records(qpath):
        qid = str(_require(rec, "qid", qpath, lineno))
        sid = str(_require(rec, "sid", qpath, lineno))
        sent = sentences.get(sid)
        if sent is None:
            raise IntegrityError(f"{qpath}: record for {qid!r} references unknown sentence {sid!r}")
        if "polarity" in rec:
            answer_rows.append((lineno, rec, qid, sent))
        else:
            if qid in qids:
                raise IntegrityError(f"{qpath}: duplicate question id {qid!r}")
            qids.add(qid)
            qent = None
            if rec.get("qent") is not None:
                qent = _parse_span(rec["qent"], sid, qpath, lineno)
                _check_mention_in_sentence(qent, sentences, f"question {qid!r} entity")
            questions.append(Question(id=qid, sentence=sent, question_entity=qent))

    for lineno, rec, qid, sent in answer_rows:
        if qid not in qids:
            raise IntegrityError(f"{qpath}: answer references unknown question {qid!r}")
        polarity = bool(rec["polarity"])
        span = None
        if rec.get("answer_span") is not None:
            raw = rec["answer_span"]
            try:
                span = (int(raw["start"]), int(raw["end"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(qpath, lineno, f"bad answer_span {raw!r}") from exc
        try:
            answers.append(AnswerSentence(question_id=qid, polarity=polarity, sentence=sent, answer_span=span))
        except ValueError as exc:
            raise IntegrityError(f"{qpath}: {exc}") from exc

    pairs: list[QAPair] = []
    ppath = root / PAIRS_FILE
    if ppath.exists():
        seen_pairs: set[str] = set()
        for lineno, rec in _iter_records(ppath):
            pid = str(_require(rec, "id", ppath, lineno))
            if pid in seen_pairs:
                raise IntegrityError(f"{ppath}: duplicate pair id {pid!r}")
            seen_pairs.add(pid)
            qid = str(_require(rec, "qid", ppath, lineno))
            if qid not in qids:
                raise IntegrityError(f"{ppath}: pair {pid!r} references unknown question {qid!r}")
            sid = str(_require(rec, "sid", ppath, lineno))
            m1 = _parse_span(_require(rec, "m1", ppath, lineno), sid, ppath, lineno)
            m2 = _parse_span(_require(rec, "m2", ppath, lineno), sid, ppath, lineno)
            _check_mention_in_sentence(m1, sentences, f"pair {pid!r}")
            _check_mention_in_sentence(m2, sentences, f"pair {pid!r}")
            try:
                pairs.append(QAPair(id=pid, question_id=qid, m1=m1, m2=m2, polarity=bool(_require(rec, "polarity", ppath, lineno))))
            except ValueError as exc:
                raise IntegrityError(f"{ppath}: {exc}") from exc

    return QACorpus(sentences=sentences, questions=tuple(questions), answers=tuple(answers), pairs=tuple(pairs))


def _span_json(m: EntityMention) -> dict:
    return {"start": m.start, "end": m.end, "head": m.head_index}


def _dump(records: Iterable[dict], path: Path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def _sentence_records(sentences: dict[str, Sentence]):
    for sent in sentences.values():
        yield {
            "id": sent.id,
            "tokens": [{"t": t.surface, "pos": t.pos} for t in sent.tokens],
            "mentions": [_span_json(m) for m in sent.mentions],
        }


def save_re_corpus(corpus: LabeledCorpus, path) -> None:
    """Write an RE corpus directory; load_re_corpus(save) is an identity."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _dump(_sentence_records(corpus.sentences), root / SENTENCES_FILE)
    _dump(({"id": t.id, "name": t.name} for t in corpus.types), root / TYPES_FILE)

    def mention_records():
        for m in corpus.mentions:
            yield {
                "id": m.id,
                "sid": m.sentence_id,
                "em1": _span_json(m.m1),
                "em2": _span_json(m.m2),
                "types": [] if m.is_negative else sorted(corpus.type_name(t) for t in m.candidate_types),
                "neg": m.is_negative,
            }

    _dump(mention_records(), root / MENTIONS_FILE)


def save_qa_corpus(corpus: QACorpus, path) -> None:
    """Write a QA corpus directory; pairs.jsonl only when pairs exist."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _dump(_sentence_records(corpus.sentences), root / SENTENCES_FILE)

    def qa_records():
        for q in corpus.questions:
            rec = {"qid": q.id, "sid": q.sentence.id}
            if q.question_entity is not None:
                rec["qent"] = _span_json(q.question_entity)
            yield rec
        for a in corpus.answers:
            rec = {"qid": a.question_id, "sid": a.sentence.id, "polarity": a.polarity}
            if a.answer_span is not None:
                rec["answer_span"] = {"start": a.answer_span[0], "end": a.answer_span[1]}
            yield rec

    _dump(qa_records(), root / QA_FILE)
    if corpus.pairs:
        _dump(
            (
                {
                    "id": p.id,
                    "qid": p.question_id,
                    "sid": p.sentence_id,
                    "m1": _span_json(p.m1),
                    "m2": _span_json(p.m2),
                    "polarity": p.polarity,
                }
                for p in corpus.pairs
            ),
            root / PAIRS_FILE,
        )


def sample_negative_mentions(
    unlinkable_pairs: Sequence[tuple[EntityMention, EntityMention]],
    ratio: float,
    seed: int,
) -> tuple[RelationMention, ...]:
    """Sample round(ratio * n) unlinkable pairs as None-typed mentions.

    Sampling is without replacement and deterministic for a fixed seed.
    Generated ids are "neg-<k>" where k is the pair's index in the input,
    and output order follows input order.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    n = len(unlinkable_pairs)
    count = int(math.floor(ratio * n + 0.5))
    if count == 0:
        return ()
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False))
    out = []
    for k in chosen:
        m1, m2 = unlinkable_pairs[int(k)]
        out.append(
            RelationMention(
                id=f"neg-{int(k)}",
                m1=m1,
                m2=m2,
                candidate_types=frozenset({NONE_TYPE_ID}),
            )
        )
    return tuple(out)
