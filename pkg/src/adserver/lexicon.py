"""Text normalization, keyword extraction and sparse term vectors.

The extraction pipeline runs in four stages: preprocessing (markup stripping
and tokenization), candidate selection (unigrams and bigrams clear of
stopwords), scoring (TF, or TF-IDF against an optional background corpus),
and postprocessing (plural/singular merging). Pages and ads both end up as
L2-normalized sparse term vectors so the matcher can compare them directly.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

_TAG_RE = re.compile(r"<[^>]*>")
_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Ad-side field weights: explicit keywords dominate, then title, then body.
KEYWORD_WEIGHT = 3.0
TITLE_WEIGHT = 2.0
DESCRIPTION_WEIGHT = 1.0


def _load_default_stopwords() -> frozenset[str]:
    text = resources.files("adserver.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS: frozenset[str] = _load_default_stopwords()


def load_stopwords(path) -> frozenset[str]:
    """Read a stopword file: one lowercase word per line, UTF-8."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip() for w in fh if w.strip())


def normalize_text(text: str) -> list[str]:
    """Tokenize raw (possibly marked-up) text.

    Tags are stripped, everything is lowercased and split on runs of
    non-alphanumerics; tokens shorter than 2 characters and pure-digit
    tokens are dropped.
    """
    if not text:
        return []
    stripped = _TAG_RE.sub(" ", text).lower()
    return [t for t in _TOKEN_RE.findall(stripped)
            if len(t) >= 2 and not t.isdigit()]


@dataclass(frozen=True)
class ScoredTerm:
    term: str
    score: float


@dataclass(frozen=True)
class TermVector:
    """Sparse term → weight map. Non-empty stored vectors are unit-length."""

    entries: dict[str, float] = field(default_factory=dict)
    norm: float = 0.0

    @classmethod
    def from_weights(cls, weights: dict[str, float]) -> "TermVector":
        """Build a normalized vector, discarding zero/negative weights."""
        positive = {t: w for t, w in weights.items() if w > 0}
        if not positive:
            return cls({}, 0.0)
        raw_norm = math.sqrt(sum(w * w for w in positive.values()))
        return cls({t: w / raw_norm for t, w in positive.items()}, 1.0)

    def is_empty(self) -> bool:
        return not self.entries

    def dot(self, other: "TermVector") -> float:
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return sum(w * b[t] for t, w in a.items() if t in b)

    def get(self, term: str) -> float:
        return self.entries.get(term, 0.0)

    def __len__(self) -> int:
        return len(self.entries)


class IdfCorpus:
    """Document-frequency table for the optional background corpus.

    Counts both unigrams and bigrams per document; idf uses the smoothed
    form ln((1 + N) / (1 + df)) + 1 so unseen terms still score.
    """

    def __init__(self, documents=()):
        self.doc_count = 0
        self._df: Counter = Counter()
        for doc in documents:
            self.add_document(doc)

    @classmethod
    def from_file(cls, path) -> "IdfCorpus":
        """Load a corpus file: one document per line, UTF-8."""
        with open(path, encoding="utf-8") as fh:
            return cls(line for line in fh if line.strip())

    def add_document(self, text: str):
        tokens = normalize_text(text)
        terms = set(tokens)
        terms.update(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
        self.doc_count += 1
        self._df.update(terms)

    def idf(self, term: str) -> float:
        return math.log((1 + self.doc_count) / (1 + self._df[term])) + 1.0


def _candidate_counts(tokens: list[str], stopwords: frozenset[str]) -> Counter:
    counts: Counter = Counter(t for t in tokens if t not in stopwords)
    bigrams: Counter = Counter()
    for a, b in zip(tokens, tokens[1:]):
        if a not in stopwords and b not in stopwords:
            bigrams[f"{a} {b}"] += 1
    # singleton bigrams are noise, not keyphrases
    counts.update({term: freq for term, freq in bigrams.items() if freq >= 2})
    return counts


def _merge_plurals(scores: dict[str, float]) -> dict[str, float]:
    # fold "cameras" into "camera" only when the singular form is itself
    # a candidate; otherwise leave the term alone ("lens" stays "lens")
    merged: dict[str, float] = {}
    for term in sorted(scores):
        target = term
        if term.endswith("s") and term[:-1] in scores:
            target = term[:-1]
        merged[target] = merged.get(target, 0.0) + scores[term]
    return merged


def extract_keywords(tokens: list[str], k: int,
                     idf: IdfCorpus | None = None,
                     stopwords: frozenset[str] = STOPWORDS) -> list[ScoredTerm]:
    """Top-k scored unigram/bigram candidates from a token list.

    Unigram candidates are non-stopword tokens; bigram candidates must be
    stopword-free at both ends and occur at least twice. Scores are term
    frequency, multiplied by inverse document frequency when a background
    corpus is loaded. Output is sorted by score descending with lexicographic
    tie-break, at most ``k`` entries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = _candidate_counts(tokens, stopwords)
    scores = {term: (freq * idf.idf(term) if idf else float(freq))
              for term, freq in counts.items()}
    merged = _merge_plurals(scores)
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredTerm(term, score) for term, score in ranked[:k]]


def page_vector(text: str, idf: IdfCorpus | None = None,
                stopwords: frozenset[str] = STOPWORDS) -> TermVector:
    """L2-normalized TF (or TF-IDF) vector over the page's tokens."""
    tokens = [t for t in normalize_text(text) if t not in stopwords]
    counts = Counter(tokens)
    weights = {term: (freq * idf.idf(term) if idf else float(freq))
               for term, freq in counts.items()}
    return TermVector.from_weights(weights)


def ad_vector(ad, stopwords: frozenset[str] = STOPWORDS) -> TermVector:
    """L2-normalized vector for an ad's keywords, title and description.

    Keywords carry raw weight 3.0 per token, title tokens 2.0 and
    description tokens 1.0, summed per term before normalization.
    """
    weights: dict[str, float] = {}

    def accumulate(tokens, w):
        for t in tokens:
            if t not in stopwords:
                weights[t] = weights.get(t, 0.0) + w

    for keyword in ad.keywords:
        accumulate(normalize_text(keyword), KEYWORD_WEIGHT)
    accumulate(normalize_text(ad.title), TITLE_WEIGHT)
    accumulate(normalize_text(ad.description), DESCRIPTION_WEIGHT)
    return TermVector.from_weights(weights)
