"""Text feature extraction for entity-mention pairs.

Feature kinds and their string namespaces (all whitespace-free):

    HEAD_EM1_<tok> / HEAD_EM2_<tok>   head token of each argument
    TKN_EM1_<tok> / TKN_EM2_<tok>     every token inside each argument span
    BETWEEN_<tok>                     tokens strictly between the arguments
    BPOS_<pos>                        POS tags of those between tokens
    COLL_<t1>_<t2>                    bigrams around each argument boundary:
                                      the window tokens left of a mention plus
                                      its first token, and its last token plus
                                      the window tokens to the right
    EM1_BEFORE_EM2 / EM2_BEFORE_EM1   argument order (exactly one)
    EM_DISTANCE_<n>                   token count strictly between arguments
    <tok>                             bare context unigrams immediately
                                      before/after each argument
    PATTERN_EM1_IN_EM2 / PATTERN_NULL argument-one-inside-argument-two test
    <len>_<prefix>                    Brown cluster prefix of each argument
                                      token found in the cluster map

Features form a multiset; repeated occurrences keep their multiplicity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from relqa.corpus import EntityMention, Sentence


@dataclass(frozen=True)
class FeatureConfig:
    """window bounds collocation/context reach; prefix_lengths drive Brown
    cluster prefix features."""

    window: int = 3
    prefix_lengths: tuple[int, ...] = (4, 8, 12)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if any(n < 1 for n in self.prefix_lengths):
            raise ValueError("prefix lengths must be >= 1")


@dataclass
class BrownClusterMap:
    """token -> cluster bitstring; empty map disables Brown features."""

    mapping: dict[str, str] = field(default_factory=dict)

    def __contains__(self, token: str) -> bool:
        return token in self.mapping

    def __len__(self) -> int:
        return len(self.mapping)

    @classmethod
    def load(cls, path) -> "BrownClusterMap":
        """Parse whitespace-separated "bitstring token frequency" lines."""
        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) < 2:
                    raise ValueError(f"{path}:{lineno}: expected 'bitstring token frequency'")
                bits, token = parts[0], parts[1]
                if bits.strip("01"):
                    raise ValueError(f"{path}:{lineno}: cluster path {bits!r} is not a bitstring")
                mapping[token] = bits
        return cls(mapping=mapping)


@dataclass
class FeatureVector:
    """Multiset of feature strings with positive integer counts."""

    counts: Counter = field(default_factory=Counter)

    def add(self, feature: str, n: int = 1) -> None:
        if not feature or any(ch.isspace() for ch in feature):
            raise ValueError(f"bad feature string {feature!r}")
        self.counts[feature] += n

    def total(self) -> int:
        return sum(self.counts.values())

    def __iter__(self):
        return iter(self.counts.items())

    def __len__(self) -> int:
        return len(self.counts)


def _ns(token: str) -> str:
    """Tokens embed into feature strings; whitespace is squashed."""
    return "".join("_" if ch.isspace() else ch for ch in token)


def _collocations(out: FeatureVector, sentence: Sentence, m: EntityMention, window: int):
    toks = [t.surface for t in sentence.tokens]
    left = toks[max(0, m.start - window) : m.start + 1]
    right = toks[m.end - 1 : min(len(toks), m.end + window)]
    for region in (left, right):
        for a, b in zip(region, region[1:]):
            out.add(f"COLL_{_ns(a)}_{_ns(b)}")


def extract_features(
    m1: EntityMention,
    m2: EntityMention,
    sentence: Sentence,
    cfg: FeatureConfig = FeatureConfig(),
    brown: BrownClusterMap | None = None,
) -> FeatureVector:
    """Extract the feature multiset for an ordered mention pair.

    Both mentions must lie in the given sentence and must not share an
    identical span.  The same extractor serves relation mentions and QA
    entity-mention pairs.
    """
    if m1.sentence_id != sentence.id or m2.sentence_id != sentence.id:
        raise ValueError("mentions do not belong to the given sentence")
    n = len(sentence.tokens)
    if m1.end > n or m2.end > n:
        raise ValueError("mention span exceeds sentence length")
    if (m1.start, m1.end) == (m2.start, m2.end):
        raise ValueError("identical argument spans")

    toks = [t.surface for t in sentence.tokens]
    out = FeatureVector()

    for label, m in (("EM1", m1), ("EM2", m2)):
        out.add(f"HEAD_{label}_{_ns(toks[m.head_index])}")
        for i in range(m.start, m.end):
            out.add(f"TKN_{label}_{_ns(toks[i])}")

    lo = min(m1.end, m2.end)
    hi = max(m1.start, m2.start)
    for i in range(lo, max(lo, hi)):
        out.add(f"BETWEEN_{_ns(toks[i])}")
        pos = sentence.tokens[i].pos
        if pos:
            out.add(f"BPOS_{_ns(pos)}")

    _collocations(out, sentence, m1, cfg.window)
    _collocations(out, sentence, m2, cfg.window)

    if (m1.start, m1.end) <= (m2.start, m2.end):
        out.add("EM1_BEFORE_EM2")
    else:
        out.add("EM2_BEFORE_EM1")

    out.add(f"EM_DISTANCE_{max(0, hi - lo)}")

    for m in (m1, m2):
        if m.start > 0:
            out.add(_ns(toks[m.start - 1]))
        if m.end < n:
            out.add(_ns(toks[m.end]))

    if m2.start <= m1.start and m1.end <= m2.end:
        out.add("PATTERN_EM1_IN_EM2")
    else:
        out.add("PATTERN_NULL")

    if brown is not None and brown.mapping:
        for m in (m1, m2):
            for i in range(m.start, m.end):
                path = brown.mapping.get(toks[i])
                if path is None:
                    continue
                for length in cfg.prefix_lengths:
                    out.add(f"{length}_{path[:length]}")

    return out
