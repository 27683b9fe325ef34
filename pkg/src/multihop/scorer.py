"""Next-token scoring for constrained decoding.

The decoder only needs one operation: a log-probability distribution over
the currently allowed tokens, conditioned on the claim, the reranked
evidence sentences and the generated prefix. Two providers implement it:

* ReferenceScorer -- a deterministic lexical surrogate fit on the corpus;
  token scores are smoothed overlap counts between context tokens and the
  titles (or sentences) a token leads to. It exists so the full pipeline
  is runnable and testable end to end without a neural model.
* ExternalScorer (wire module) -- forwards the same call to an external
  process over the scoring protocol.

Both renormalize over the allowed set, so markup tokens offered as
singletons always cost log-probability zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .corpus import Corpus
from .decoder_trie import CLOSE, OPEN, whitespace_tokenizer
from .sparse_index import tokenize


@dataclass(frozen=True)
class ContextSentence:
    identifier: str
    doc_title: str
    text: str


@dataclass(frozen=True)
class ScoringContext:
    """Claim plus the current evidence sentences, identifiers E1..El.

    hyperlinks_augmented records whether the evidence texts already carry
    appended anchor titles, so external scorers can tell the variants apart.
    """

    claim: str
    evidence: tuple[ContextSentence, ...]
    hop: int = 1
    hyperlinks_augmented: bool = False

    def __post_init__(self):
        for pos, entry in enumerate(self.evidence, start=1):
            if entry.identifier != f"E{pos}":
                raise ValueError(
                    f"evidence identifiers must be consecutive E1..En, got {entry.identifier!r} at position {pos}"
                )

    @staticmethod
    def from_evidence(claim: str, evidence, hop: int = 1, hyperlinks_augmented: bool = False) -> "ScoringContext":
        """Build from any object with .entries carrying identifier/doc_title/text."""
        sentences = tuple(
            ContextSentence(identifier=e.identifier, doc_title=e.doc_title, text=e.text)
            for e in evidence.entries
        )
        return ScoringContext(
            claim=claim, evidence=sentences, hop=hop, hyperlinks_augmented=hyperlinks_augmented
        )

    def context_tokens(self) -> frozenset[str]:
        toks = set(tokenize(self.claim))
        for entry in self.evidence:
            toks.update(tokenize(entry.text))
        return frozenset(toks)


class _AffinityNode:
    __slots__ = ("children", "reach", "terminal_tokens")

    def __init__(self):
        self.children: dict[str, _AffinityNode] = {}
        self.reach: set[str] = set()  # tokens of every title reachable below
        self.terminal_tokens: set[str] | None = None


def renormalize(raw: Mapping[str, float], allowed: Iterable[str]) -> dict[str, float]:
    """Renormalize raw log-scores to a proper log-distribution over allowed.

    Allowed tokens missing from raw get probability zero; if nothing
    overlaps the result is undefined and a ValueError is raised.
    """
    present = sorted(t for t in allowed if t in raw)
    if not present:
        raise ValueError("scorer returned no log-probabilities for any allowed token")
    m = max(raw[t] for t in present)
    total = m + math.log(sum(math.exp(raw[t] - m) for t in present))
    return {t: raw[t] - total for t in present}


@dataclass(frozen=True)
class ReferenceScorer:
    """Deterministic lexical next-token scorer.

    At any position, score(v) is proportional to lam + affinity(v, ctx):
    for title tokens the affinity is the number of distinct context tokens
    (claim plus all evidence texts) occurring in any title reachable
    through v; for sentence identifiers it is the token overlap between
    that sentence and the claim; markup tokens have affinity zero.
    """

    lam: float
    root: _AffinityNode

    def next_token_logprobs(
        self, ctx: ScoringContext, prefix: Iterable[str], allowed: Iterable[str]
    ) -> dict[str, float]:
        allowed = sorted(set(allowed))
        if not allowed:
            raise ValueError("allowed token set is empty")
        prefix = list(prefix)
        title_so_far = _open_title_segment(prefix)
        id_texts = {e.identifier: e.text for e in ctx.evidence}
        ctx_tokens = ctx.context_tokens() if title_so_far is not None else None
        claim_tokens = set(tokenize(ctx.claim))

        weights = []
        for tok in allowed:
            if title_so_far is not None:
                aff = self._title_affinity(title_so_far, tok, ctx_tokens)
            elif tok in id_texts:
                aff = len(claim_tokens & set(tokenize(id_texts[tok])))
            else:
                aff = 0  # markup token outside a title segment
            weights.append(self.lam + aff)
        total = sum(weights)
        return {tok: math.log(w / total) for tok, w in zip(allowed, weights)}

    def _title_affinity(self, title_so_far: list[str], token: str, ctx_tokens: frozenset[str]) -> int:
        node = self._walk(title_so_far)
        if node is None:
            return 0
        if token == CLOSE:
            if node.terminal_tokens is None:
                return 0
            return len(ctx_tokens & node.terminal_tokens)
        child = node.children.get(token)
        if child is None:
            return 0
        return len(ctx_tokens & child.reach)

    def _walk(self, tokens: list[str]) -> _AffinityNode | None:
        node = self.root
        for tok in tokens:
            node = node.children.get(tok)
            if node is None:
                return None
        return node


def _open_title_segment(prefix: list[str]) -> list[str] | None:
    """Tokens of the currently open [ ... title segment, or None if the
    prefix is outside any title segment."""
    depth_open = None
    for i, tok in enumerate(prefix):
        if tok == OPEN:
            depth_open = i
        elif tok == CLOSE:
            depth_open = None
    if depth_open is None:
        return None
    return prefix[depth_open + 1 :]


def fit_reference_scorer(corpus: Corpus, lam: float = 1.0) -> ReferenceScorer:
    """Fit the lexical scorer: a title trie where every node knows the token
    vocabulary of the titles reachable below it."""
    if lam <= 0:
        raise ValueError(f"smoothing lam must be > 0, got {lam}")
    root = _AffinityNode()
    for title in corpus.titles():
        title_tokens = set(tokenize(title))
        node = root
        node.reach.update(title_tokens)
        for tok in whitespace_tokenizer(title):
            child = node.children.get(tok)
            if child is None:
                child = _AffinityNode()
                node.children[tok] = child
            child.reach.update(title_tokens)
            node = child
        node.terminal_tokens = title_tokens
    return ReferenceScorer(lam=lam, root=root)
