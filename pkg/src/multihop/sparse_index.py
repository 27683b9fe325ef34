"""Okapi BM25 inverted index for initial document retrieval.

Each document is indexed over the concatenation of its sentence texts.
Scoring uses the IDF variant with +1 inside the log (never negative):

    score(d, query) = sum over query tokens t of
        IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avglen))
    IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

Tokenization is deterministic and reproducible: lowercase, split on
non-alphanumeric, drop empty tokens. No stemming, no stopword removal.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

from .corpus import Corpus

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

INDEX_MAGIC = "#multihop-index v1"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop empties."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc_index, tf)]
    doc_lengths: list[int]
    avg_doc_length: float
    doc_count: int
    k1: float
    b: float
    titles: list[str] = field(default_factory=list)

    def doc_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.doc_frequency(term)
        return math.log((self.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def build_index(corpus: Corpus, k1: float = 0.6, b: float = 0.4) -> InvertedIndex:
    if k1 < 0:
        raise ValueError(f"k1 must be >= 0, got {k1}")
    if not 0 <= b <= 1:
        raise ValueError(f"b must be in [0, 1], got {b}")
    postings: dict[str, dict[int, int]] = {}
    doc_lengths = []
    for doc in corpus.documents:
        tokens = tokenize(doc.text())
        doc_lengths.append(len(tokens))
        for tok in tokens:
            per_doc = postings.setdefault(tok, {})
            per_doc[doc.doc_index] = per_doc.get(doc.doc_index, 0) + 1
    flat = {term: sorted(per_doc.items()) for term, per_doc in postings.items()}
    n = len(corpus.documents)
    return InvertedIndex(
        postings=flat,
        doc_lengths=doc_lengths,
        avg_doc_length=(sum(doc_lengths) / n) if n else 0.0,
        doc_count=n,
        k1=k1,
        b=b,
        titles=corpus.titles(),
    )


def bm25_rank(index: InvertedIndex, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k matching documents as (title, score), descending score,
    ties broken by ascending doc_index. Documents matching no query
    token are not returned."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_index, tf in plist:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[doc_index] / index.avg_doc_length)
            scores[doc_index] = scores.get(doc_index, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [(index.titles[di], s) for di, s in ranked[:k]]


def save_index(index: InvertedIndex, path: str) -> int:
    """Persist as magic header line + one JSON payload line; returns bytes written."""
    payload = {
        "k1": index.k1,
        "b": index.b,
        "doc_count": index.doc_count,
        "doc_lengths": index.doc_lengths,
        "avg_doc_length": index.avg_doc_length,
        "titles": index.titles,
        "postings": {term: [[di, tf] for di, tf in plist] for term, plist in sorted(index.postings.items())},
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(INDEX_MAGIC + "\n")
        f.write(json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n")
    return os.path.getsize(path)


def load_index(path: str) -> InvertedIndex:
    with open(path, encoding="utf-8") as f:
        magic = f.readline().rstrip("\n")
        if magic != INDEX_MAGIC:
            raise ValueError(f"{path}: not a multihop index file (header {magic!r})")
        payload = json.loads(f.readline())
    return InvertedIndex(
        postings={term: [(di, tf) for di, tf in plist] for term, plist in payload["postings"].items()},
        doc_lengths=list(payload["doc_lengths"]),
        avg_doc_length=payload["avg_doc_length"],
        doc_count=payload["doc_count"],
        k1=payload["k1"],
        b=payload["b"],
        titles=list(payload["titles"]),
    )


def index_footprint_bytes(path: str) -> int:
    return os.path.getsize(path)
