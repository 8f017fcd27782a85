"""Pair-generation heuristics against hand-derived expectations."""

from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relqa.corpus import Question
from relqa.qapairs import (
    GenerationReport,
    PairGenConfig,
    detect_question_entity,
    generate_pairs,
    levenshtein,
    match_answer_entity,
    match_question_entity,
)

from conftest import em, qa_corpus_of, sent


def _lev_oracle(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return d(len(a), len(b))


_text = st.text(alphabet="abcx ", max_size=12)


class TestLevenshtein:
    @settings(max_examples=200, deadline=None)
    @given(_text, _text)
    def test_matches_recursive_oracle(self, a, b):
        assert levenshtein(a, b) == _lev_oracle(a, b)

    @given(_text)
    def test_identity(self, a):
        assert levenshtein(a, a) == 0

    @given(_text, _text)
    def test_symmetry(self, a, b):
        assert levenshtein(a, b) == levenshtein(b, a)

    def test_known_values(self):
        assert levenshtein("kitten", "sitting") == 3
        assert levenshtein("", "abc") == 3
        assert levenshtein("Trump", "trump") == 1


class TestDetectQuestionEntity:
    def test_greatest_start_wins(self):
        s = sent("q", "who bought Acme Corp", mentions=(em("q", 1, 2), em("q", 2, 4)))
        q = Question("q0", s)
        assert detect_question_entity(q) == em("q", 2, 4)

    def test_start_tie_broken_toward_larger_end(self):
        s = sent("q", "who runs Acme Corp", mentions=(em("q", 2, 3), em("q", 2, 4, head=2)))
        assert detect_question_entity(Question("q0", s)) == em("q", 2, 4, head=2)

    def test_no_mentions_gives_none(self):
        assert detect_question_entity(Question("q0", sent("q", "who did what"))) is None


class TestMatchQuestionEntity:
    def test_head_filter_is_case_insensitive(self):
        qs = sent("q", "where is ACME", mentions=(em("q", 2, 3),))
        ans_s = sent("a", "acme sits in Reno", mentions=(em("a", 0, 1), em("a", 3, 4)))
        got = match_question_entity(qs.mentions[0], qs, _answer(ans_s))
        assert got == em("a", 0, 1)

    def test_smallest_edit_distance_wins(self):
        qs = sent("q", "who leads John Smith", mentions=(em("q", 2, 4, head=3),))
        ans_s = sent(
            "a",
            "J Smith met John Smith",
            mentions=(em("a", 0, 2, head=1), em("a", 3, 5, head=4)),
        )
        got = match_question_entity(qs.mentions[0], qs, _answer(ans_s))
        assert got == em("a", 3, 5, head=4)

    def test_distance_tie_breaks_to_earliest_start(self):
        qs = sent("q", "who is Smith", mentions=(em("q", 2, 3),))
        ans_s = sent("a", "Smith saw Smith", mentions=(em("a", 2, 3), em("a", 0, 1)))
        got = match_question_entity(qs.mentions[0], qs, _answer(ans_s))
        assert got == em("a", 0, 1)

    def test_no_head_match_gives_none(self):
        qs = sent("q", "where is Acme", mentions=(em("q", 2, 3),))
        ans_s = sent("a", "Globex sits in Reno", mentions=(em("a", 0, 1),))
        assert match_question_entity(qs.mentions[0], qs, _answer(ans_s)) is None


class TestMatchAnswerEntity:
    def test_exact_surface_required(self):
        s = sent("a", "Acme hired Grace Hopper today", mentions=(em("a", 0, 1), em("a", 2, 4)))
        assert match_answer_entity(_answer(s, span=(2, 4))) == em("a", 2, 4)
        # substring mention does not satisfy an exact-match rule
        s2 = sent("a", "Acme hired Grace Hopper today", mentions=(em("a", 0, 1), em("a", 2, 3)))
        assert match_answer_entity(_answer(s2, span=(2, 4))) is None

    def test_earliest_of_equal_surfaces(self):
        s = sent("a", "Bonn beat Bonn", mentions=(em("a", 2, 3), em("a", 0, 1)))
        assert match_answer_entity(_answer(s, span=(2, 3))) == em("a", 0, 1)

    def test_rejects_negative_sentences(self):
        s = sent("a", "nothing here", mentions=())
        with pytest.raises(ValueError):
            match_answer_entity(_answer(s, polarity=False))


def _answer(sentence, span=None, polarity=None, qid="q0"):
    from relqa.corpus import AnswerSentence

    if polarity is None:
        polarity = span is not None
    return AnswerSentence(qid, polarity, sentence, span)


class TestGeneratePairs:
    def test_tiny_corpus_exact_pairs(self, tiny_qa_corpus):
        out, report = generate_pairs(tiny_qa_corpus, PairGenConfig(seed=0))
        by_id = {p.id: p for p in out.pairs}
        assert set(by_id) == {"q0:pos:0", "q0:pos:1", "q0:neg:2:0", "q0:neg:2:1"}
        p0 = by_id["q0:pos:0"]
        assert (p0.m1.start, p0.m1.end, p0.m2.start, p0.m2.end) == (0, 1, 4, 6)
        assert p0.polarity
        p1 = by_id["q0:pos:1"]
        assert (p1.m1.start, p1.m1.end, p1.m2.start, p1.m2.end) == (3, 4, 0, 2)
        negs = {(p.m1.start, p.m2.start) for p in out.pairs if not p.polarity}
        assert negs == {(0, 4), (4, 0)}
        assert report.as_dict() == {
            "questions_processed": 1,
            "questions_without_entity": 0,
            "positive_sentences_dropped": 0,
            "pairs_positive": 2,
            "pairs_negative": 2,
        }

    def test_three_mention_negative_yields_six_ordered_pairs(self):
        qs = sent("q", "who bought Acme", mentions=(em("q", 2, 3),))
        ans = sent(
            "a",
            "Acme Globex Initech traded shares",
            mentions=(em("a", 0, 1), em("a", 1, 2), em("a", 2, 3)),
        )
        corpus = qa_corpus_of([Question("q0", qs, em("q", 2, 3))], [_answer(ans, polarity=False)])
        out, report = generate_pairs(corpus, PairGenConfig(seed=1))
        assert report.pairs_negative == 6
        ordered = {((p.m1.start, p.m1.end), (p.m2.start, p.m2.end)) for p in out.pairs}
        spans = [(0, 1), (1, 2), (2, 3)]
        assert ordered == {(a, b) for a in spans for b in spans if a != b}

    def test_negative_cap_applies(self):
        qs = sent("q", "who bought Acme", mentions=(em("q", 2, 3),))
        ans = sent(
            "a",
            "Acme Globex Initech traded shares",
            mentions=(em("a", 0, 1), em("a", 1, 2), em("a", 2, 3)),
        )
        corpus = qa_corpus_of([Question("q0", qs, em("q", 2, 3))], [_answer(ans, polarity=False)])
        out, report = generate_pairs(corpus, PairGenConfig(neg_pairs_per_sentence=2, seed=1))
        assert report.pairs_negative == 2
        assert len(out.pairs) == 2

    def test_positive_without_exact_answer_mention_dropped(self):
        qs = sent("q", "who founded Acme", mentions=(em("q", 2, 3),))
        # answer span covers two tokens but only a one-token mention exists
        ans = sent("a", "Acme founder Grace Hopper retired", mentions=(em("a", 0, 1), em("a", 2, 3)))
        corpus = qa_corpus_of([Question("q0", qs, em("q", 2, 3))], [_answer(ans, span=(2, 4))])
        out, report = generate_pairs(corpus, PairGenConfig(seed=0))
        assert out.pairs == ()
        assert report.positive_sentences_dropped == 1
        assert report.pairs_positive == 0

    def test_positive_dropped_when_matches_collide(self):
        qs = sent("q", "who is Acme", mentions=(em("q", 2, 3),))
        ans = sent("a", "Acme won again", mentions=(em("a", 0, 1),))
        corpus = qa_corpus_of([Question("q0", qs, em("q", 2, 3))], [_answer(ans, span=(0, 1))])
        _, report = generate_pairs(corpus, PairGenConfig(seed=0))
        assert report.positive_sentences_dropped == 1

    def test_question_without_entity_skipped(self):
        qs = sent("q", "what happened today")
        ans = sent("a", "Acme Globex merged", mentions=(em("a", 0, 1), em("a", 1, 2)))
        corpus = qa_corpus_of([Question("q0", qs)], [_answer(ans, polarity=False)])
        out, report = generate_pairs(corpus, PairGenConfig(seed=0))
        assert out.pairs == ()
        assert report.questions_without_entity == 1

    def test_detect_fallback_used_when_no_explicit_entity(self):
        qs = sent("q", "who bought Acme", mentions=(em("q", 2, 3),))
        ans = sent("a", "Acme bought Globex", mentions=(em("a", 0, 1), em("a", 2, 3)))
        corpus = qa_corpus_of([Question("q0", qs)], [_answer(ans, span=(2, 3))])
        _, report = generate_pairs(corpus, PairGenConfig(seed=0))
        assert report.pairs_positive == 1

    def test_negatives_from_positives_exclude_emitted_pair(self):
        qs = sent("q", "who bought Acme", mentions=(em("q", 2, 3),))
        ans = sent(
            "a",
            "Acme bought Globex from Initech",
            mentions=(em("a", 0, 1), em("a", 2, 3), em("a", 4, 5)),
        )
        corpus = qa_corpus_of([Question("q0", qs, em("q", 2, 3))], [_answer(ans, span=(2, 3))])
        out, report = generate_pairs(
            corpus, PairGenConfig(sample_negatives_from_positives=True, seed=0)
        )
        pos = [p for p in out.pairs if p.polarity]
        neg = [p for p in out.pairs if not p.polarity]
        assert len(pos) == 1 and report.pairs_positive == 1
        # 6 ordered pairs minus the emitted positive
        assert len(neg) == 5 and report.pairs_negative == 5
        pos_key = ((pos[0].m1.start, pos[0].m1.end), (pos[0].m2.start, pos[0].m2.end))
        assert pos_key not in {((p.m1.start, p.m1.end), (p.m2.start, p.m2.end)) for p in neg}
        assert all(p.id.startswith("q0:pneg:") for p in neg)

    def test_no_negatives_from_positives_by_default(self, tiny_qa_corpus):
        out, _ = generate_pairs(tiny_qa_corpus, PairGenConfig(seed=0))
        assert not any(":pneg:" in p.id for p in out.pairs)

    def test_deterministic_for_fixed_seed(self, tiny_qa_corpus):
        a, _ = generate_pairs(tiny_qa_corpus, PairGenConfig(neg_pairs_per_sentence=1, seed=7))
        b, _ = generate_pairs(tiny_qa_corpus, PairGenConfig(neg_pairs_per_sentence=1, seed=7))
        assert a.pairs == b.pairs

    def test_input_corpus_unchanged(self, tiny_qa_corpus):
        generate_pairs(tiny_qa_corpus, PairGenConfig(seed=0))
        assert tiny_qa_corpus.pairs == ()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PairGenConfig(neg_pairs_per_sentence=0)
