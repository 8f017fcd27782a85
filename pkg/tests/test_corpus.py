"""Corpus model validation and directory round-trips."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relqa.corpus import (
    NONE_TYPE_ID,
    AnswerSentence,
    EntityMention,
    IntegrityError,
    LabeledCorpus,
    ParseError,
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

from conftest import em, rel_types, sent


class TestModelValidation:
    def test_empty_span_rejected(self):
        with pytest.raises(ValueError):
            EntityMention("s", 2, 2, 2)

    def test_head_outside_span_rejected(self):
        with pytest.raises(ValueError):
            EntityMention("s", 1, 3, 0)

    def test_sentence_rejects_foreign_annotation(self):
        with pytest.raises(ValueError):
            sent("s1", "a b c", mentions=(em("other", 0, 1),))

    def test_sentence_rejects_out_of_range_annotation(self):
        with pytest.raises(ValueError):
            sent("s1", "a b", mentions=(em("s1", 0, 3),))

    def test_mention_arguments_must_share_sentence(self):
        with pytest.raises(ValueError):
            RelationMention("m", em("s1", 0, 1), em("s2", 0, 1), frozenset({1}))

    def test_mention_arguments_must_differ(self):
        with pytest.raises(ValueError):
            RelationMention("m", em("s1", 0, 2), em("s1", 0, 2), frozenset({1}))

    def test_candidate_set_must_be_none_or_targets(self):
        # {} and mixed {None, target} are both invalid states
        with pytest.raises(ValueError):
            RelationMention("m", em("s", 0, 1), em("s", 1, 2), frozenset())
        with pytest.raises(ValueError):
            RelationMention("m", em("s", 0, 1), em("s", 1, 2), frozenset({0, 1}))

    def test_negative_mention_flag(self):
        m = RelationMention("m", em("s", 0, 1), em("s", 1, 2), frozenset({NONE_TYPE_ID}))
        assert m.is_negative
        assert not RelationMention("m", em("s", 0, 1), em("s", 1, 2), frozenset({2})).is_negative

    def test_types_must_start_with_none(self):
        s = sent("s", "a b")
        with pytest.raises(ValueError):
            LabeledCorpus(sentences={"s": s}, mentions=(), types=(RelationType(0, "born_in"),))
        with pytest.raises(ValueError):
            LabeledCorpus(
                sentences={"s": s},
                mentions=(),
                types=(RelationType(0, "None"), RelationType(2, "x")),
            )

    def test_positive_answer_needs_span(self):
        s = sent("a", "x y z")
        with pytest.raises(ValueError):
            AnswerSentence("q", True, s, None)
        with pytest.raises(ValueError):
            AnswerSentence("q", False, s, (0, 1))
        with pytest.raises(ValueError):
            AnswerSentence("q", True, s, (0, 9))

    def test_answer_surface(self):
        s = sent("a", "the Eiffel Tower stands")
        a = AnswerSentence("q", True, s, (1, 3))
        assert a.answer_surface() == "Eiffel Tower"


# hypothesis strategies for whole corpora

_words = st.sampled_from("alpha beta gamma delta unit river acme".split())


@st.composite
def _re_corpora(draw):
    n_sent = draw(st.integers(1, 4))
    sentences = {}
    for i in range(n_sent):
        words = draw(st.lists(_words, min_size=3, max_size=7))
        sentences[f"s{i}"] = sent(f"s{i}", " ".join(words))
    type_names = draw(st.lists(st.sampled_from(["rel_a", "rel_b", "rel_c"]), min_size=1, max_size=3, unique=True))
    types = rel_types(*type_names)
    mentions = []
    n_m = draw(st.integers(0, 5))
    for j in range(n_m):
        sid = draw(st.sampled_from(sorted(sentences)))
        n_tok = len(sentences[sid].tokens)
        a = draw(st.integers(0, n_tok - 1))
        b = draw(st.integers(0, n_tok - 1))
        if a == b:
            b = (b + 1) % n_tok
        lo, hi = min(a, b), max(a, b)
        m1 = em(sid, lo, lo + 1)
        m2 = em(sid, hi, hi + 1)
        negative = draw(st.booleans())
        if negative:
            cands = frozenset({NONE_TYPE_ID})
        else:
            ids = draw(st.lists(st.integers(1, len(type_names)), min_size=1, unique=True))
            cands = frozenset(ids)
        mentions.append(RelationMention(f"m{j}", m1, m2, cands))
    return LabeledCorpus(sentences=sentences, mentions=tuple(mentions), types=types)


class TestReRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(_re_corpora())
    def test_save_load_identity(self, tmp_path_factory, corpus):
        root = tmp_path_factory.mktemp("re")
        save_re_corpus(corpus, root)
        back = load_re_corpus(root)
        assert back.types == corpus.types
        assert back.mentions == corpus.mentions
        assert set(back.sentences) == set(corpus.sentences)
        for sid, s in corpus.sentences.items():
            assert back.sentences[sid].tokens == s.tokens
            assert back.sentences[sid].mentions == s.mentions

    def test_save_is_byte_stable(self, tmp_path, tiny_re_corpus):
        a = tmp_path / "a"
        b = tmp_path / "b"
        save_re_corpus(tiny_re_corpus, a)
        save_re_corpus(tiny_re_corpus, b)
        for name in ("sentences.jsonl", "mentions.jsonl", "types.jsonl"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_type_ids_follow_pinned_table(self, tmp_path, tiny_re_corpus):
        save_re_corpus(tiny_re_corpus, tmp_path)
        back = load_re_corpus(tmp_path)
        assert [t.name for t in back.types] == ["None", "born_in", "works_at"]

    def test_types_derived_by_first_appearance_without_table(self, tmp_path, tiny_re_corpus):
        save_re_corpus(tiny_re_corpus, tmp_path)
        (tmp_path / "types.jsonl").unlink()
        back = load_re_corpus(tmp_path)
        # m0 introduces born_in, m1 introduces works_at
        assert [t.name for t in back.types] == ["None", "born_in", "works_at"]


class TestReLoadErrors:
    def _write(self, tmp_path, name, lines):
        (tmp_path / name).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def _base(self, tmp_path):
        self._write(
            tmp_path,
            "sentences.jsonl",
            ['{"id":"s0","tokens":[{"t":"a"},{"t":"b"},{"t":"c"}]}'],
        )

    def test_parse_error_carries_line_number(self, tmp_path):
        self._base(tmp_path)
        self._write(tmp_path, "mentions.jsonl", ["{broken"])
        with pytest.raises(ParseError) as err:
            load_re_corpus(tmp_path)
        assert err.value.lineno == 1

    def test_unknown_sentence_reference(self, tmp_path):
        self._base(tmp_path)
        self._write(
            tmp_path,
            "mentions.jsonl",
            ['{"id":"m0","sid":"nope","em1":{"start":0,"end":1},"em2":{"start":1,"end":2},"types":["r"]}'],
        )
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)

    def test_negative_with_types_rejected(self, tmp_path):
        self._base(tmp_path)
        self._write(
            tmp_path,
            "mentions.jsonl",
            ['{"id":"m0","sid":"s0","em1":{"start":0,"end":1},"em2":{"start":1,"end":2},"types":["r"],"neg":true}'],
        )
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)

    def test_linkable_without_types_rejected(self, tmp_path):
        self._base(tmp_path)
        self._write(
            tmp_path,
            "mentions.jsonl",
            ['{"id":"m0","sid":"s0","em1":{"start":0,"end":1},"em2":{"start":1,"end":2},"types":[]}'],
        )
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)

    def test_duplicate_mention_id_rejected(self, tmp_path):
        self._base(tmp_path)
        row = '{"id":"m0","sid":"s0","em1":{"start":0,"end":1},"em2":{"start":1,"end":2},"types":["r"]}'
        self._write(tmp_path, "mentions.jsonl", [row, row])
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)

    def test_unknown_type_with_pinned_table(self, tmp_path):
        self._base(tmp_path)
        self._write(tmp_path, "types.jsonl", ['{"id":0,"name":"None"}', '{"id":1,"name":"r"}'])
        self._write(
            tmp_path,
            "mentions.jsonl",
            ['{"id":"m0","sid":"s0","em1":{"start":0,"end":1},"em2":{"start":1,"end":2},"types":["other"]}'],
        )
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)

    def test_duplicate_sentence_id(self, tmp_path):
        row = '{"id":"s0","tokens":[{"t":"a"}]}'
        self._write(tmp_path, "sentences.jsonl", [row, row])
        self._write(tmp_path, "mentions.jsonl", [])
        (tmp_path / "mentions.jsonl").write_text("", encoding="utf-8")
        with pytest.raises(IntegrityError):
            load_re_corpus(tmp_path)


class TestQaRoundTrip:
    def test_save_load_identity(self, tmp_path, tiny_qa_paired):
        save_qa_corpus(tiny_qa_paired, tmp_path)
        back = load_qa_corpus(tmp_path)
        assert back.pairs == tiny_qa_paired.pairs
        assert back.answers == tiny_qa_paired.answers
        assert [q.id for q in back.questions] == ["q0"]
        assert back.questions[0].question_entity == tiny_qa_paired.questions[0].question_entity

    def test_pairs_file_optional(self, tmp_path, tiny_qa_corpus):
        save_qa_corpus(tiny_qa_corpus, tmp_path)
        assert not (tmp_path / "pairs.jsonl").exists()
        back = load_qa_corpus(tmp_path)
        assert back.pairs == ()

    def test_question_without_entity_round_trips(self, tmp_path):
        qs = sent("qs", "who did what")
        corpus = QACorpus(sentences={"qs": qs}, questions=(Question("q0", qs),), answers=())
        save_qa_corpus(corpus, tmp_path)
        back = load_qa_corpus(tmp_path)
        assert back.questions[0].question_entity is None
        assert back.empty_questions() == ("q0",)

    def test_answer_before_question_in_file(self, tmp_path):
        # answers may precede their question record; loading resolves both
        qs = '{"qid":"q0","sid":"s0"}'
        ans = '{"qid":"q0","sid":"s1","polarity":false}'
        (tmp_path / "sentences.jsonl").write_text(
            '{"id":"s0","tokens":[{"t":"a"}]}\n{"id":"s1","tokens":[{"t":"b"}]}\n',
            encoding="utf-8",
        )
        (tmp_path / "qa.jsonl").write_text(ans + "\n" + qs + "\n", encoding="utf-8")
        back = load_qa_corpus(tmp_path)
        assert len(back.answers) == 1

    def test_answer_for_unknown_question_rejected(self, tmp_path):
        (tmp_path / "sentences.jsonl").write_text('{"id":"s0","tokens":[{"t":"a"}]}\n', encoding="utf-8")
        (tmp_path / "qa.jsonl").write_text('{"qid":"q9","sid":"s0","polarity":true,"answer_span":{"start":0,"end":1}}\n', encoding="utf-8")
        with pytest.raises(IntegrityError):
            load_qa_corpus(tmp_path)


class TestNegativeSampling:
    def _pairs(self, n):
        s = sent("s", " ".join(f"w{i}" for i in range(10)))
        return [(em("s", i % 9, i % 9 + 1), em("s", 9, 10)) for i in range(n)], s

    def test_count_is_rounded_ratio(self):
        pairs, _ = self._pairs(10)
        assert len(sample_negative_mentions(pairs, 0.5, seed=0)) == 5
        assert len(sample_negative_mentions(pairs, 0.25, seed=0)) == 3  # 2.5 rounds up
        assert len(sample_negative_mentions(pairs, 1.0, seed=0)) == 10

    def test_all_marked_negative(self):
        pairs, _ = self._pairs(8)
        out = sample_negative_mentions(pairs, 0.5, seed=3)
        assert all(m.candidate_types == frozenset({NONE_TYPE_ID}) for m in out)
        assert all(m.id.startswith("neg-") for m in out)

    def test_deterministic_and_seed_sensitive(self):
        pairs, _ = self._pairs(20)
        a = sample_negative_mentions(pairs, 0.3, seed=1)
        b = sample_negative_mentions(pairs, 0.3, seed=1)
        c = sample_negative_mentions(pairs, 0.3, seed=2)
        assert a == b
        assert [m.id for m in a] != [m.id for m in c]

    def test_ratio_bounds(self):
        pairs, _ = self._pairs(4)
        with pytest.raises(ValueError):
            sample_negative_mentions(pairs, 0.0, seed=0)
        with pytest.raises(ValueError):
            sample_negative_mentions(pairs, 1.5, seed=0)


def test_compact_json_on_disk(tmp_path, tiny_re_corpus):
    """Serialized records stay single-line and key-stable."""
    save_re_corpus(tiny_re_corpus, tmp_path)
    first = (tmp_path / "mentions.jsonl").read_text(encoding="utf-8").splitlines()[0]
    rec = json.loads(first)
    assert rec["id"] == "m0"
    assert ": " not in first and ", " not in first
