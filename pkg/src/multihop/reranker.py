"""Sentence reranking: keep the top-l sentences of the current candidate
document sets as the compact evidence context for the next hop.

The reference backend scores each candidate sentence with the same BM25
formula and tokenizer as the document index, treating each sentence as a
document; the query is the claim concatenated with the texts of the prior
hop's evidence. External rerankers plug in over the wire protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, Sentence
from .sparse_index import tokenize

BACKEND_REFERENCE = "reference"
BACKEND_EXTERNAL = "external"


@dataclass(frozen=True)
class EvidenceEntry:
    identifier: str  # E1..El, assigned by rank
    doc_title: str
    sent_index: int
    text: str
    score: float
    hyperlinks: tuple[str, ...] = ()


@dataclass(frozen=True)
class RankedEvidence:
    entries: tuple[EvidenceEntry, ...]
    l: int

    def __len__(self) -> int:
        return len(self.entries)

    def texts(self) -> list[str]:
        return [e.text for e in self.entries]

    def doc_titles(self) -> list[str]:
        return list(dict.fromkeys(e.doc_title for e in self.entries))

    def id_to_title(self) -> dict[str, str]:
        return {e.identifier: e.doc_title for e in self.entries}


def _candidate_sentences(corpus: Corpus, candidate_doc_sets: Iterable[Iterable[str]]) -> list[Sentence]:
    seen: set[tuple[str, int]] = set()
    sentences: list[Sentence] = []
    for doc_set in candidate_doc_sets:
        for title in doc_set:
            doc = corpus.document(title)
            if doc is None:
                continue
            for sent in doc.sentences:
                key = (sent.doc_title, sent.sent_index)
                if key not in seen:
                    seen.add(key)
                    sentences.append(sent)
    sentences.sort(key=lambda s: (s.doc_title, s.sent_index))
    return sentences


def sentence_bm25_scores(
    query: str, sentences: Sequence[Sentence], k1: float = 0.6, b: float = 0.4
) -> list[float]:
    """BM25 over the candidate set with each sentence as its own document."""
    token_lists = [tokenize(s.text) for s in sentences]
    n = len(sentences)
    if n == 0:
        return []
    lengths = [len(toks) for toks in token_lists]
    avg_len = sum(lengths) / n
    df: dict[str, int] = {}
    for toks in token_lists:
        for term in set(toks):
            df[term] = df.get(term, 0) + 1
    scores = []
    query_tokens = tokenize(query)
    for toks, length in zip(token_lists, lengths):
        tf: dict[str, int] = {}
        for term in toks:
            tf[term] = tf.get(term, 0) + 1
        score = 0.0
        for term in query_tokens:
            freq = tf.get(term, 0)
            if freq == 0 or term not in df:
                continue
            idf = math.log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0)
            norm = k1 * (1.0 - b + b * length / avg_len) if avg_len > 0 else k1
            score += idf * freq * (k1 + 1.0) / (freq + norm)
        scores.append(score)
    return scores


def rerank(
    claim_text: str,
    prior_evidence: RankedEvidence | None,
    candidate_doc_sets: Iterable[Iterable[str]],
    corpus: Corpus,
    l: int,
    backend: str = BACKEND_REFERENCE,
    external=None,
    hop: int = 1,
    k1: float = 0.6,
    b: float = 0.4,
) -> RankedEvidence:
    """Top-l sentences over all sentences of all candidate documents,
    identifiers assigned by descending score with (title, sent_index)
    tie-break. E1 always denotes the top-ranked sentence."""
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    sentences = _candidate_sentences(corpus, candidate_doc_sets)
    if not sentences:
        return RankedEvidence(entries=(), l=l)
    prior_texts = prior_evidence.texts() if prior_evidence else []
    if backend == BACKEND_REFERENCE:
        query = " ".join([claim_text] + prior_texts)
        scores = sentence_bm25_scores(query, sentences, k1=k1, b=b)
    elif backend == BACKEND_EXTERNAL:
        if external is None:
            raise ValueError("external reranker backend requires a client")
        scores = external.score_sentences(
            claim_text, prior_texts, [(s.doc_title, s.sent_index, s.text) for s in sentences], hop
        )
    else:
        raise ValueError(f"unknown reranker backend {backend!r}")
    order = sorted(
        range(len(sentences)),
        key=lambda i: (-scores[i], sentences[i].doc_title, sentences[i].sent_index),
    )
    entries = tuple(
        EvidenceEntry(
            identifier=f"E{rank}",
            doc_title=sentences[i].doc_title,
            sent_index=sentences[i].sent_index,
            text=sentences[i].text,
            score=scores[i],
            hyperlinks=sentences[i].hyperlinks,
        )
        for rank, i in enumerate(order[:l], start=1)
    )
    return RankedEvidence(entries=entries, l=l)
