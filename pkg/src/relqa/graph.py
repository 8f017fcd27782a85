"""Heterogeneous co-occurrence graph over mentions, QA pairs, and features.

Objects (relation mentions on the RE side, QA entity-mention pairs on the QA
side) connect to the text features extracted from them; edge weights are
co-occurrence multiplicities.  Both sides share one feature vocabulary so a
feature string appearing in both corpora is a single node.  The graph also
carries per-mention candidate type sets, per-question pair groups, and alias
tables for O(1) weighted sampling of edges (by weight) and noise features
(by distinct-co-occurrence count raised to the 3/4 power).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from relqa.corpus import LabeledCorpus, QACorpus
from relqa.features import BrownClusterMap, FeatureConfig, extract_features
from relqa.sampling import AliasTable

NOISE_POWER = 0.75

VOCAB_FILE = "vocab.tsv"
RE_EDGES_FILE = "re_edges.tsv"
QA_EDGES_FILE = "qa_edges.tsv"
GROUPS_FILE = "groups.tsv"
MENTIONS_FILE = "mentions.tsv"
TYPES_FILE = "types.tsv"


class GraphError(Exception):
    """Graph construction or persistence failure."""


@dataclass
class FeatureVocabulary:
    """Dense feature ids in lexicographic string order plus per-side stats.

    d_f_re / d_f_qa count the DISTINCT objects on each side co-occurring
    with the feature (not total occurrences); they parameterize the noise
    distributions.
    """

    strings: tuple[str, ...]
    in_re: np.ndarray
    in_qa: np.ndarray
    d_f_re: np.ndarray
    d_f_qa: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if list(self.strings) != sorted(self.strings):
            raise GraphError("vocabulary must be in lexicographic order")
        self.index = {s: i for i, s in enumerate(self.strings)}
        if len(self.index) != len(self.strings):
            raise GraphError("duplicate feature strings")

    def __len__(self) -> int:
        return len(self.strings)


@dataclass
class EdgeList:
    """Parallel arrays (object id, feature id, positive integer weight)."""

    objects: np.ndarray
    features: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.objects = np.asarray(self.objects, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.int64)
        if not (len(self.objects) == len(self.features) == len(self.weights)):
            raise GraphError("edge arrays must have equal length")
        if len(self.weights) and self.weights.min() < 1:
            raise GraphError("edge weights must be positive integers")
        keys = set(zip(self.objects.tolist(), self.features.tolist()))
        if len(keys) != len(self.objects):
            raise GraphError("duplicate (object, feature) edge")

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum()) if len(self.weights) else 0


@dataclass
class HeterogeneousGraph:
    vocab: FeatureVocabulary
    re_edges: EdgeList
    qa_edges: EdgeList
    mention_ids: tuple[str, ...]
    mention_candidates: tuple[frozenset[int], ...]
    type_names: tuple[str, ...]
    pair_ids: tuple[str, ...]
    pair_questions: tuple[str, ...]
    pair_polarities: np.ndarray
    question_ids: tuple[str, ...]

    def __post_init__(self):
        self.pair_polarities = np.asarray(self.pair_polarities, dtype=bool)
        if len(self.mention_ids) != len(self.mention_candidates):
            raise GraphError("mention id/candidate length mismatch")
        if not (len(self.pair_ids) == len(self.pair_questions) == len(self.pair_polarities)):
            raise GraphError("pair array length mismatch")
        self._build_groups()
        self._build_tables()

    def _build_groups(self):
        order = {q: i for i, q in enumerate(self.question_ids)}
        pos: list[list[int]] = [[] for _ in self.question_ids]
        neg: list[list[int]] = [[] for _ in self.question_ids]
        for k, qid in enumerate(self.pair_questions):
            if qid not in order:
                raise GraphError(f"pair {self.pair_ids[k]!r} references unknown question {qid!r}")
            (pos if self.pair_polarities[k] else neg)[order[qid]].append(k)
        self.question_groups = tuple(
            (np.asarray(p, dtype=np.int64), np.asarray(n, dtype=np.int64)) for p, n in zip(pos, neg)
        )

    def _build_tables(self):
        self.re_edge_table = AliasTable(self.re_edges.weights) if len(self.re_edges) else None
        self.qa_edge_table = AliasTable(self.qa_edges.weights) if len(self.qa_edges) else None
        self.re_noise_fids = np.flatnonzero(self.vocab.d_f_re > 0).astype(np.int64)
        self.qa_noise_fids = np.flatnonzero(self.vocab.d_f_qa > 0).astype(np.int64)
        self.re_noise_table = (
            AliasTable(self.vocab.d_f_re[self.re_noise_fids].astype(np.float64) ** NOISE_POWER)
            if len(self.re_noise_fids)
            else None
        )
        self.qa_noise_table = (
            AliasTable(self.vocab.d_f_qa[self.qa_noise_fids].astype(np.float64) ** NOISE_POWER)
            if len(self.qa_noise_fids)
            else None
        )

    @property
    def num_mentions(self) -> int:
        return len(self.mention_ids)

    @property
    def num_pairs(self) -> int:
        return len(self.pair_ids)

    @property
    def num_features(self) -> int:
        return len(self.vocab)

    @property
    def num_types(self) -> int:
        return len(self.type_names)

    def sample_re_noise(self, rng: np.random.Generator, size=None):
        """Global feature ids drawn from the RE-side noise distribution."""
        return self.re_noise_fids[self.re_noise_table.sample(rng, size)]

    def sample_qa_noise(self, rng: np.random.Generator, size=None):
        return self.qa_noise_fids[self.qa_noise_table.sample(rng, size)]


def build_graph(
    re_corpus: LabeledCorpus,
    qa_corpus: QACorpus,
    cfg: FeatureConfig = FeatureConfig(),
    brown: BrownClusterMap | None = None,
) -> HeterogeneousGraph:
    """Assemble the shared-vocabulary co-occurrence graph from both corpora.

    An RE corpus without mentions is an error; a QA corpus without pairs
    degrades to an RE-only graph with an empty QA side.
    """
    if not re_corpus.mentions:
        raise GraphError("RE corpus has no relation mentions")

    re_fvs = [
        extract_features(m.m1, m.m2, re_corpus.sentence_of(m), cfg, brown) for m in re_corpus.mentions
    ]
    qa_fvs = [
        extract_features(p.m1, p.m2, qa_corpus.sentence_of(p), cfg, brown) for p in qa_corpus.pairs
    ]

    strings = sorted(
        {f for fv in re_fvs for f, _ in fv} | {f for fv in qa_fvs for f, _ in fv}
    )
    index = {s: i for i, s in enumerate(strings)}
    m = len(strings)
    d_f_re = np.zeros(m, dtype=np.int64)
    d_f_qa = np.zeros(m, dtype=np.int64)

    def edges_for(fvs, d_f):
        obj_col, feat_col, w_col = [], [], []
        for obj_id, fv in enumerate(fvs):
            fids = sorted((index[f], c) for f, c in fv)
            for fid, c in fids:
                obj_col.append(obj_id)
                feat_col.append(fid)
                w_col.append(c)
                d_f[fid] += 1
        return EdgeList(
            objects=np.asarray(obj_col, dtype=np.int64),
            features=np.asarray(feat_col, dtype=np.int64),
            weights=np.asarray(w_col, dtype=np.int64),
        )

    re_edges = edges_for(re_fvs, d_f_re)
    qa_edges = edges_for(qa_fvs, d_f_qa)

    vocab = FeatureVocabulary(
        strings=tuple(strings),
        in_re=d_f_re > 0,
        in_qa=d_f_qa > 0,
        d_f_re=d_f_re,
        d_f_qa=d_f_qa,
    )
    return HeterogeneousGraph(
        vocab=vocab,
        re_edges=re_edges,
        qa_edges=qa_edges,
        mention_ids=tuple(m.id for m in re_corpus.mentions),
        mention_candidates=tuple(m.candidate_types for m in re_corpus.mentions),
        type_names=tuple(t.name for t in re_corpus.types),
        pair_ids=tuple(p.id for p in qa_corpus.pairs),
        pair_questions=tuple(p.question_id for p in qa_corpus.pairs),
        pair_polarities=np.asarray([p.polarity for p in qa_corpus.pairs], dtype=bool),
        question_ids=tuple(q.id for q in qa_corpus.questions),
    )


@dataclass
class SharedFeatureStats:
    """Percentages of feature sharing, per corpus side."""

    re_distinct_pct: float
    re_occurrence_pct: float
    qa_distinct_pct: float
    qa_occurrence_pct: float
    shared_features: int

    def as_dict(self) -> dict:
        return {
            "re_distinct_pct": self.re_distinct_pct,
            "re_occurrence_pct": self.re_occurrence_pct,
            "qa_distinct_pct": self.qa_distinct_pct,
            "qa_occurrence_pct": self.qa_occurrence_pct,
            "shared_features": self.shared_features,
        }


def shared_stats_from_counts(
    re_counts: Mapping[str, int], qa_counts: Mapping[str, int]
) -> SharedFeatureStats:
    """Sharing stats from per-side feature -> total-occurrence maps.

    Distinct percentage: shared vocabulary over the side's vocabulary.
    Occurrence percentage: occurrence mass on shared features over the
    side's total mass.
    """
    shared = set(re_counts) & set(qa_counts)

    def pcts(counts):
        if not counts:
            return 0.0, 0.0
        total = sum(counts.values())
        on_shared = sum(c for f, c in counts.items() if f in shared)
        return 100.0 * len(shared) / len(counts), 100.0 * on_shared / total

    re_d, re_o = pcts(re_counts)
    qa_d, qa_o = pcts(qa_counts)
    return SharedFeatureStats(
        re_distinct_pct=re_d,
        re_occurrence_pct=re_o,
        qa_distinct_pct=qa_d,
        qa_occurrence_pct=qa_o,
        shared_features=len(shared),
    )


def shared_feature_stats(graph: HeterogeneousGraph) -> SharedFeatureStats:
    """Sharing stats of a built graph (occurrences = edge weights)."""
    re_counts: Counter = Counter()
    qa_counts: Counter = Counter()
    for fid, w in zip(graph.re_edges.features.tolist(), graph.re_edges.weights.tolist()):
        re_counts[graph.vocab.strings[fid]] += w
    for fid, w in zip(graph.qa_edges.features.tolist(), graph.qa_edges.weights.tolist()):
        qa_counts[graph.vocab.strings[fid]] += w
    return shared_stats_from_counts(re_counts, qa_counts)


def _write_rows(path: Path, header: str, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write("\t".join(str(x) for x in row) + "\n")


def _read_rows(path: Path, expected_prefix: str):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(expected_prefix):
            raise GraphError(f"{path}: unexpected header {header!r}")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    return header, rows


def save_graph(graph: HeterogeneousGraph, path) -> None:
    """Persist the graph as a directory of tab-separated text files."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    v = graph.vocab
    _write_rows(
        root / VOCAB_FILE,
        f"# features={len(v)}\tre={int(v.in_re.sum())}\tqa={int(v.in_qa.sum())}",
        (
            (i, int(v.in_re[i]), int(v.in_qa[i]), int(v.d_f_re[i]), int(v.d_f_qa[i]), v.strings[i])
            for i in range(len(v))
        ),
    )
    for fname, edges, n_obj in (
        (RE_EDGES_FILE, graph.re_edges, graph.num_mentions),
        (QA_EDGES_FILE, graph.qa_edges, graph.num_pairs),
    ):
        _write_rows(
            root / fname,
            f"# edges={len(edges)}\tobjects={n_obj}\ttotal_weight={edges.total_weight}",
            zip(edges.objects.tolist(), edges.features.tolist(), edges.weights.tolist()),
        )
    _write_rows(
        root / MENTIONS_FILE,
        f"# mentions={graph.num_mentions}\ttypes={graph.num_types}",
        (
            (i, graph.mention_ids[i], ",".join(str(t) for t in sorted(graph.mention_candidates[i])))
            for i in range(graph.num_mentions)
        ),
    )
    _write_rows(
        root / TYPES_FILE,
        f"# types={graph.num_types}",
        enumerate(graph.type_names),
    )

    def group_rows():
        for qid in graph.question_ids:
            yield ("q", qid)
        for k in range(graph.num_pairs):
            yield ("p", k, graph.pair_ids[k], graph.pair_questions[k], int(graph.pair_polarities[k]))

    _write_rows(
        root / GROUPS_FILE,
        f"# questions={len(graph.question_ids)}\tpairs={graph.num_pairs}",
        group_rows(),
    )


def load_graph(path) -> HeterogeneousGraph:
    """Load a graph directory written by save_graph."""
    root = Path(path)
    header, rows = _read_rows(root / VOCAB_FILE, "# features=")
    m = int(header.split("\t")[0].split("=")[1])
    if len(rows) != m:
        raise GraphError(f"{root / VOCAB_FILE}: header promises {m} rows, found {len(rows)}")
    strings = [""] * m
    d_f_re = np.zeros(m, dtype=np.int64)
    d_f_qa = np.zeros(m, dtype=np.int64)
    in_re = np.zeros(m, dtype=bool)
    in_qa = np.zeros(m, dtype=bool)
    for row in rows:
        i = int(row[0])
        in_re[i] = bool(int(row[1]))
        in_qa[i] = bool(int(row[2]))
        d_f_re[i] = int(row[3])
        d_f_qa[i] = int(row[4])
        strings[i] = row[5]

    def read_edges(fname):
        header, rows = _read_rows(root / fname, "# edges=")
        count = int(header.split("\t")[0].split("=")[1])
        if len(rows) != count:
            raise GraphError(f"{root / fname}: header promises {count} rows, found {len(rows)}")
        if not rows:
            return EdgeList(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64))
        arr = np.asarray([[int(a), int(b), int(c)] for a, b, c in rows], dtype=np.int64)
        return EdgeList(objects=arr[:, 0], features=arr[:, 1], weights=arr[:, 2])

    re_edges = read_edges(RE_EDGES_FILE)
    qa_edges = read_edges(QA_EDGES_FILE)

    _, trows = _read_rows(root / TYPES_FILE, "# types=")
    type_names = [""] * len(trows)
    for row in trows:
        type_names[int(row[0])] = row[1]

    _, mrows = _read_rows(root / MENTIONS_FILE, "# mentions=")
    mention_ids = [""] * len(mrows)
    mention_candidates: list[frozenset[int]] = [frozenset()] * len(mrows)
    for row in mrows:
        i = int(row[0])
        mention_ids[i] = row[1]
        mention_candidates[i] = frozenset(int(t) for t in row[2].split(","))

    _, grows = _read_rows(root / GROUPS_FILE, "# questions=")
    question_ids: list[str] = []
    pair_rows = []
    for row in grows:
        if row[0] == "q":
            question_ids.append(row[1])
        else:
            pair_rows.append(row)
    pair_ids = [""] * len(pair_rows)
    pair_questions = [""] * len(pair_rows)
    pair_polarities = np.zeros(len(pair_rows), dtype=bool)
    for row in pair_rows:
        k = int(row[1])
        pair_ids[k] = row[2]
        pair_questions[k] = row[3]
        pair_polarities[k] = bool(int(row[4]))

    return HeterogeneousGraph(
        vocab=FeatureVocabulary(
            strings=tuple(strings), in_re=in_re, in_qa=in_qa, d_f_re=d_f_re, d_f_qa=d_f_qa
        ),
        re_edges=re_edges,
        qa_edges=qa_edges,
        mention_ids=tuple(mention_ids),
        mention_candidates=tuple(mention_candidates),
        type_names=tuple(type_names),
        pair_ids=tuple(pair_ids),
        pair_questions=tuple(pair_questions),
        pair_polarities=pair_polarities,
        question_ids=tuple(question_ids),
    )
