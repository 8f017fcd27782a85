"""Shared builders for hand-sized corpora used across the suite."""

import pytest

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
)


def sent(sid, text, pos=None, mentions=()):
    """Whitespace-tokenized sentence; pos is a parallel tag list or None."""
    words = text.split()
    tags = pos.split() if pos else [""] * len(words)
    assert len(tags) == len(words)
    return Sentence(
        id=sid,
        tokens=tuple(Token(w, t) for w, t in zip(words, tags)),
        mentions=tuple(mentions),
    )


def em(sid, start, end, head=None):
    return EntityMention(sid, start, end, end - 1 if head is None else head)


def rel_types(*names):
    return (RelationType(0, "None"),) + tuple(
        RelationType(i + 1, n) for i, n in enumerate(names)
    )


def qa_corpus_of(questions, answers, pairs=()):
    """QACorpus over exactly the sentences the questions and answers use."""
    sentences = {}
    for q in questions:
        sentences[q.sentence.id] = q.sentence
    for a in answers:
        sentences[a.sentence.id] = a.sentence
    return QACorpus(
        sentences=sentences,
        questions=tuple(questions),
        answers=tuple(answers),
        pairs=tuple(pairs),
    )


@pytest.fixture
def tiny_re_corpus():
    """Four mentions over three sentences, two target types."""
    s0 = sent("s0", "Ada lived in London for years")
    s1 = sent("s1", "Bell works at Acme Corp daily")
    s2 = sent("s2", "Cole met Dana near the river")
    mentions = (
        RelationMention("m0", em("s0", 0, 1), em("s0", 3, 4), frozenset({1})),
        RelationMention("m1", em("s1", 0, 1), em("s1", 3, 5), frozenset({2})),
        RelationMention("m2", em("s2", 0, 1), em("s2", 2, 3), frozenset({0})),
        RelationMention("m3", em("s0", 3, 4), em("s0", 0, 1), frozenset({1, 2})),
    )
    return LabeledCorpus(
        sentences={"s0": s0, "s1": s1, "s2": s2},
        mentions=mentions,
        types=rel_types("born_in", "works_at"),
    )


def qa_answer_sentence(qid, sid, words, m_spans, answer_span=None):
    mentions = tuple(em(sid, a, b) for a, b in m_spans)
    s = sent(sid, words, mentions=mentions)
    return s, AnswerSentence(
        question_id=qid,
        polarity=answer_span is not None,
        sentence=s,
        answer_span=answer_span,
    )


@pytest.fixture
def tiny_qa_corpus():
    """One question, two positive and one negative answer sentence."""
    qs = sent("qs0", "who founded Acme", mentions=(em("qs0", 2, 3),))
    q = Question(id="q0", sentence=qs, question_entity=qs.mentions[0])
    s1, a1 = qa_answer_sentence(
        "q0", "a0", "Acme was founded by Grace Hopper", [(0, 1), (4, 6)], answer_span=(4, 6)
    )
    s2, a2 = qa_answer_sentence(
        "q0", "a1", "Grace Hopper started Acme in 1949", [(0, 2), (3, 4)], answer_span=(0, 2)
    )
    s3, a3 = qa_answer_sentence(
        "q0", "a2", "Acme opened offices near Boston today", [(0, 1), (4, 5)]
    )
    return QACorpus(
        sentences={"qs0": qs, "a0": s1, "a1": s2, "a2": s3},
        questions=(q,),
        answers=(a1, a2, a3),
    )


@pytest.fixture
def tiny_qa_paired(tiny_qa_corpus):
    """The tiny QA corpus with its pairs materialized by hand."""
    a0, a1, a2 = tiny_qa_corpus.answers
    pairs = (
        QAPair("p0", "q0", a0.sentence.mentions[0], a0.sentence.mentions[1], True),
        QAPair("p1", "q0", a1.sentence.mentions[1], a1.sentence.mentions[0], True),
        QAPair("p2", "q0", a2.sentence.mentions[0], a2.sentence.mentions[1], False),
        QAPair("p3", "q0", a2.sentence.mentions[1], a2.sentence.mentions[0], False),
    )
    return QACorpus(
        sentences=tiny_qa_corpus.sentences,
        questions=tiny_qa_corpus.questions,
        answers=tiny_qa_corpus.answers,
        pairs=pairs,
    )
