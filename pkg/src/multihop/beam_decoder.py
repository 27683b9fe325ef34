"""Constrained beam search over the markup grammar and the aggregation of
scored sequences into document-set scores.

A scored sequence is one grammar-legal generation: t sentence identifiers,
then one bracketed corpus title (variants change the shape). Its score is
the sum of per-step log-probabilities, markup steps included; markup
tokens offered as singleton allowed sets cost exactly zero. Document-set
scores sum sequence probabilities (not log-probabilities) over all
surviving sequences that induce the same document set; only sequences
surviving the beam contribute, which approximates the exact marginal the
same way the search itself does.

Raw summed log-probabilities are used throughout: no length
normalization (recorded in result metadata by the pipeline).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .decoder_trie import DecoderTrie, MarkupState, advance, allowed_tokens
from .scorer import ScoringContext

MODE_JOINT = "JOINT"
MODE_TOP1 = "TOP1"
MODE_NOT_JOINT = "NOT_JOINT"
MODE_JOINT_DOCS = "JOINT_DOCS"
MODES = (MODE_JOINT, MODE_TOP1, MODE_NOT_JOINT, MODE_JOINT_DOCS)


def logsumexp(values: Iterable[float]) -> float:
    values = list(values)
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in values))


def _id_key(identifier: str) -> tuple[int, str]:
    # numeric order for E1..En, so E2 sorts before E10
    return (len(identifier), identifier)


@dataclass(frozen=True)
class ScoredSequence:
    sentence_ids: tuple[str, ...]  # canonical: sorted identifier set
    doc_titles: tuple[str, ...]  # decoded titles (one in the default grammar)
    logprob: float
    tokens: tuple[str, ...]  # full generated token path, markup included

    @property
    def doc_title(self) -> str:
        return self.doc_titles[-1]

    def sort_key(self):
        return (-self.logprob, self.sentence_ids, self.doc_titles, self.tokens)


@dataclass(frozen=True)
class DocSetScore:
    doc_set: tuple[str, ...]  # sorted titles
    logprob: float

    def sort_key(self):
        return (-self.logprob, self.doc_set)


@dataclass(frozen=True)
class _Hyp:
    state: MarkupState
    tokens: tuple[str, ...]
    logprob: float

    def sort_key(self):
        return (-self.logprob, tuple(sorted(self.state.emitted_ids, key=_id_key)), self.state.titles_done, self.tokens)


def decode(
    scorer,
    trie: DecoderTrie,
    ctx: ScoringContext,
    t: int,
    beam_q: int,
    required_titles: int = 1,
    id_pool: Sequence[str] | None = None,
) -> list[ScoredSequence]:
    """Beam search for the top-q grammar-legal sequences, descending
    log-probability, ties broken by (sorted sentence ids, titles, tokens).

    Hypotheses advance in lockstep one token per round; completed ones
    leave the beam, so with beam_q at least the number of legal sequences
    the result equals exhaustive enumeration.
    """
    if beam_q < 1:
        raise ValueError(f"beam_q must be >= 1, got {beam_q}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    ids = tuple(id_pool) if id_pool is not None else tuple(e.identifier for e in ctx.evidence)
    start = MarkupState.initial(trie, ids, required_ids=t, required_titles=required_titles)
    active = [_Hyp(state=start, tokens=(), logprob=0.0)]
    finished: list[_Hyp] = []
    dead_ends = 0
    while active:
        candidates: list[_Hyp] = []
        for hyp in active:
            allowed = allowed_tokens(hyp.state)
            if not allowed:
                dead_ends += 1
                continue
            logprobs = scorer.next_token_logprobs(ctx, hyp.tokens, allowed)
            for token in sorted(logprobs):
                nxt = _Hyp(
                    state=advance(hyp.state, token),
                    tokens=hyp.tokens + (token,),
                    logprob=hyp.logprob + logprobs[token],
                )
                if nxt.state.closed:
                    finished.append(nxt)
                else:
                    candidates.append(nxt)
        candidates.sort(key=_Hyp.sort_key)
        active = candidates[:beam_q]
    if not finished:
        print(f"decode: no legal completion (t={t}, {trie.n_titles} titles, {len(ids)} ids, {dead_ends} dead ends)", file=sys.stderr)
        return []
    finished.sort(key=_Hyp.sort_key)
    return [
        ScoredSequence(
            sentence_ids=tuple(sorted(h.state.emitted_ids, key=_id_key)),
            doc_titles=h.state.titles_done,
            logprob=h.logprob,
            tokens=h.tokens,
        )
        for h in finished[:beam_q]
    ]


def aggregate(
    sequences: Iterable[ScoredSequence], k: int, id_to_title: Mapping[str, str]
) -> list[DocSetScore]:
    """Group sequences by induced document set (documents of the selected
    sentences plus the decoded titles) and sum their probabilities; top-k
    groups descending, ties broken by the sorted title tuple."""
    groups: dict[tuple[str, ...], list[float]] = {}
    for seq in sequences:
        docs = {id_to_title[i] for i in seq.sentence_ids}
        docs.update(seq.doc_titles)
        groups.setdefault(tuple(sorted(docs)), []).append(seq.logprob)
    scored = [DocSetScore(doc_set=docs, logprob=logsumexp(lps)) for docs, lps in groups.items()]
    scored.sort(key=DocSetScore.sort_key)
    return scored[:k]


def ranked_docs_from_sequences(
    sequences: Iterable[ScoredSequence], id_to_title: Mapping[str, str]
) -> list[str]:
    """Flatten sequences (best first) into a deduplicated document ranking:
    for each sequence, the documents of its sentences then its decoded titles."""
    ranked: list[str] = []
    seen: set[str] = set()
    for seq in sequences:
        for identifier in seq.sentence_ids:
            title = id_to_title[identifier]
            if title not in seen:
                seen.add(title)
                ranked.append(title)
        for title in seq.doc_titles:
            if title not in seen:
                seen.add(title)
                ranked.append(title)
    return ranked


@dataclass(frozen=True)
class VariantOutput:
    mode: str
    sequences: tuple[ScoredSequence, ...]
    doc_sets: tuple[DocSetScore, ...]
    ranked_docs: tuple[str, ...]


def decode_variant(
    mode: str,
    scorer,
    trie: DecoderTrie,
    ctx: ScoringContext,
    t: int,
    beam_q: int,
    k: int,
    prior_docs: Sequence[str] = (),
) -> VariantOutput:
    """Run one decoding round under a Table-4 variant grammar.

    JOINT       t sentence ids then one title (default pipeline path).
    TOP1        only the top evidence sentence may be selected.
    NOT_JOINT   titles only; decoded documents are appended after the top-t
                documents already retrieved, deduplicated.
    JOINT_DOCS  t+1 bracketed title segments, no sentence ids.
    """
    if mode not in MODES:
        raise ValueError(f"unknown decoder mode {mode!r}")
    id_to_title = {e.identifier: e.doc_title for e in ctx.evidence}

    if mode == MODE_JOINT:
        seqs = decode(scorer, trie, ctx, t=t, beam_q=beam_q)
        doc_sets = aggregate(seqs, k, id_to_title)
        ranked = ranked_docs_from_sequences(seqs, id_to_title)
    elif mode == MODE_TOP1:
        pool = (ctx.evidence[0].identifier,) if ctx.evidence else ()
        seqs = decode(scorer, trie, ctx, t=min(1, len(pool)), beam_q=beam_q, id_pool=pool)
        doc_sets = aggregate(seqs, k, id_to_title)
        ranked = ranked_docs_from_sequences(seqs, id_to_title)
    elif mode == MODE_JOINT_DOCS:
        seqs = decode(scorer, trie, ctx, t=0, beam_q=beam_q, required_titles=t + 1)
        doc_sets = aggregate(seqs, k, id_to_title)
        ranked = ranked_docs_from_sequences(seqs, id_to_title)
    else:  # NOT_JOINT
        seqs = decode(scorer, trie, ctx, t=0, beam_q=beam_q)
        retained = list(dict.fromkeys(prior_docs))[:t]
        groups: dict[tuple[str, ...], list[float]] = {}
        for seq in seqs:
            docs = tuple(sorted(set(retained) | {seq.doc_title}))
            groups.setdefault(docs, []).append(seq.logprob)
        doc_sets = sorted(
            (DocSetScore(doc_set=d, logprob=logsumexp(lps)) for d, lps in groups.items()),
            key=DocSetScore.sort_key,
        )[:k]
        ranked = list(dict.fromkeys(retained + [s.doc_title for s in seqs]))
    return VariantOutput(
        mode=mode,
        sequences=tuple(seqs),
        doc_sets=tuple(doc_sets),
        ranked_docs=tuple(ranked),
    )
