"""Shared fixtures: in-memory corpus builders, corpus-file writers, and the
brute-force decoding enumerator used as the beam-search oracle."""

from __future__ import annotations

import json

from multihop.beam_decoder import ScoredSequence, _id_key
from multihop.corpus import Corpus, Document, Sentence
from multihop.decoder_trie import MarkupState, advance, allowed_tokens
from multihop.reranker import EvidenceEntry, RankedEvidence


def mk_corpus(docs) -> Corpus:
    """Build a Corpus directly from [(title, [sentence text or (text, [links])])]."""
    corpus = Corpus()
    for title, sentences in docs:
        parsed = []
        for i, s in enumerate(sentences):
            if isinstance(s, tuple):
                text, links = s
            else:
                text, links = s, ()
            parsed.append(Sentence(doc_title=title, sent_index=i, text=text, hyperlinks=tuple(links)))
        corpus.title_lookup[title] = len(corpus.documents)
        corpus.documents.append(Document(title=title, doc_index=len(corpus.documents), sentences=tuple(parsed)))
    return corpus


def write_corpus_file(path, docs) -> str:
    """Write [(title, [sentence or (sentence, links)])] as a corpus JSONL file."""
    with open(path, "w", encoding="utf-8") as f:
        for title, sentences in docs:
            record = {"title": title, "sentences": []}
            for s in sentences:
                if isinstance(s, tuple):
                    record["sentences"].append({"text": s[0], "hyperlinks": list(s[1])})
                else:
                    record["sentences"].append({"text": s})
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    return str(path)


def write_claims_file(path, claims) -> str:
    """Write claim dicts as a claims JSONL file."""
    with open(path, "w", encoding="utf-8") as f:
        for claim in claims:
            f.write(json.dumps(claim, ensure_ascii=False) + "\n")
    return str(path)


def mk_evidence(entries, l=None) -> RankedEvidence:
    """Build RankedEvidence from [(doc_title, sent_index, text)] in rank order."""
    built = tuple(
        EvidenceEntry(f"E{i}", title, idx, text, 0.0)
        for i, (title, idx, text) in enumerate(entries, start=1)
    )
    return RankedEvidence(entries=built, l=l if l is not None else max(1, len(built)))


def two_hop_benchmark(n_pairs=15):
    """Desk-scale benchmark: for each pair i, doc A_i ("VelQ<i> Ceremony")
    names the organiser Quorbel<i> Zinth<i> in its text, and doc B_i
    ("Quorbel<i> Zinth<i>") carries the second-hop fact. Two-hop claims
    mention A_i's rare token and an unsupported trailing word, so BM25
    finds A_i but never B_i, while B_i's title tokens sit in A_i's top
    sentence; filler docs soak up the remaining BM25 mass.

    Returns (corpus_docs, claims) as plain structures for mk_corpus /
    write_corpus_file / write_claims_file."""
    docs = []
    claims = []
    for i in range(n_pairs):
        a_title = f"VelQ{i} Ceremony"
        b_title = f"Quorbel{i} Zinth{i}"
        docs.append((a_title, [f"The VelQ{i} ceremony was organised by Quorbel{i} Zinth{i} ."]))
        docs.append((b_title, [f"Quorbel{i} Zinth{i} plays the zither professionally ."]))
        claims.append(
            {
                "claim_id": f"two-{i}",
                "text": f"The VelQ{i} ceremony was organised by a famous musician",
                "label": "SUPPORTED",
                "gold_evidence": [[a_title, 0], [b_title, 0]],
            }
        )
        claims.append(
            {
                "claim_id": f"one-{i}",
                "text": f"The VelQ{i} ceremony was organised by Quorbel{i} Zinth{i}",
                "label": "SUPPORTED",
                "gold_evidence": [[a_title, 0]],
            }
        )
    for j in range(1, 6):
        docs.append((f"Filler {j}", ["a famous artist organised the ceremony yesterday"]))
    return docs, claims


def enumerate_paths(scorer, trie, ctx, t, required_titles=1, id_pool=None):
    """Brute-force oracle: exhaustively walk every grammar-legal token path,
    scoring each step with the scorer, and rank with the decode() ordering
    contract. No beam, no pruning."""
    ids = tuple(id_pool) if id_pool is not None else tuple(e.identifier for e in ctx.evidence)
    start = MarkupState.initial(trie, ids, required_ids=t, required_titles=required_titles)
    out = []

    def walk(state, tokens, logprob):
        if state.closed:
            out.append(
                ScoredSequence(
                    sentence_ids=tuple(sorted(state.emitted_ids, key=_id_key)),
                    doc_titles=state.titles_done,
                    logprob=logprob,
                    tokens=tokens,
                )
            )
            return
        allowed = allowed_tokens(state)
        if not allowed:
            return
        logprobs = scorer.next_token_logprobs(ctx, list(tokens), allowed)
        for token in sorted(logprobs):
            walk(advance(state, token), tokens + (token,), logprob + logprobs[token])

    walk(start, (), 0.0)
    out.sort(key=ScoredSequence.sort_key)
    return out
