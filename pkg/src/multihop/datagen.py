"""Training-file generation for external neural backends.

Two record families are emitted: hop-wise retrieval examples (claim plus
shuffled gold/negative sentences in, sentence identifiers plus the
held-out document title out) and sufficiency-proof pairs (one proof built
on complete gold evidence repaired to SUFFICIENT, one built on truncated
evidence repaired to INSUFFICIENT). Everything is seeded and emitted in
input order, so a fixed seed reproduces byte-identical files.
"""

from __future__ import annotations

import json
import random
import sys
from typing import Iterable, Mapping, Sequence

from .corpus import Claim, Corpus, Sentence
from .natlog import (
    INSUFFICIENT,
    SUFFICIENT,
    Lexicon,
    align_and_prove,
    predict_sufficiency,
    render_proof,
    repair_proof,
)
from .reranker import EvidenceEntry, RankedEvidence

SEP = "</s>"
PRIMARY_POOL_DOCS = 10  # negatives come from the top candidates first


def _format_sentence(sent: Sentence) -> str:
    return f"[{sent.doc_title}] {sent.text}"


def _negative_pool(
    corpus: Corpus, candidate_titles: Sequence[str], gold_docs: set[str]
) -> tuple[list[Sentence], list[Sentence]]:
    primary: list[Sentence] = []
    deeper: list[Sentence] = []
    for rank, title in enumerate(dict.fromkeys(candidate_titles)):
        if title in gold_docs:
            continue
        doc = corpus.document(title)
        if doc is None:
            continue
        bucket = primary if rank < PRIMARY_POOL_DOCS else deeper
        bucket.extend(doc.sentences)
    return primary, deeper


def make_hop_examples(
    claims: Iterable[Claim],
    hop_t: int,
    l: int,
    corpus: Corpus,
    candidates: Mapping[str, Sequence[str]],
    seed: int,
    ordered: bool = True,
) -> list[dict]:
    """Hop-t training records: only claims with exactly hop_t gold sentences
    contribute. The input holds the first t-1 gold sentences plus l-t
    sampled negatives, shuffled; the target names the gold identifiers at
    their shuffled positions and the held-out document title. With
    ordered=False (no authoritative gold ordering) one record per held-out
    gold sentence is emitted instead of holding out the last."""
    if hop_t < 1:
        raise ValueError(f"hop_t must be >= 1, got {hop_t}")
    if l < hop_t:
        raise ValueError(f"l ({l}) must be >= hop_t ({hop_t})")
    records: list[dict] = []
    for claim in claims:
        gold = claim.gold_evidence
        if len(gold) != hop_t:
            continue
        gold_sentences = [corpus.resolve_sentence(title, idx) for title, idx in gold]
        if any(s is None for s in gold_sentences):
            print(f"datagen: claim {claim.claim_id}: unresolvable gold evidence, skipped", file=sys.stderr)
            continue
        gold_docs = {title for title, _ in gold}
        primary, deeper = _negative_pool(corpus, candidates.get(claim.claim_id, ()), gold_docs)
        holdouts = range(hop_t) if not ordered else (hop_t - 1,)
        for holdout in holdouts:
            rng = random.Random(f"{seed}:{claim.claim_id}:{holdout}")
            kept = [s for i, s in enumerate(gold_sentences) if i != holdout]
            needed = l - hop_t
            if len(primary) >= needed:
                negatives = rng.sample(primary, needed)
            else:
                pool = primary + deeper
                if len(pool) >= needed:
                    negatives = rng.sample(pool, needed)
                else:
                    negatives = list(pool)
                    print(
                        f"datagen: claim {claim.claim_id}: only {len(pool)} negatives for l-t={needed}",
                        file=sys.stderr,
                    )
            sentences = kept + negatives
            rng.shuffle(sentences)
            positions = {id(s): pos for pos, s in enumerate(sentences, start=1)}
            input_text = f"{claim.text} {SEP} " + f" {SEP} ".join(_format_sentence(s) for s in sentences)
            gold_ids = " ".join(f"E{positions[id(s)]}" for s in kept)
            target = (gold_ids + " " if gold_ids else "") + f"[ {gold_sentences[holdout].doc_title} ]"
            records.append(
                {
                    "claim_id": claim.claim_id,
                    "hop": hop_t,
                    "seed": seed,
                    "holdout": holdout,
                    "input": input_text,
                    "target": target,
                }
            )
    return records


def _gold_evidence(corpus: Corpus, gold: Sequence[tuple[str, int]], l: int) -> RankedEvidence:
    entries = []
    for pos, (title, idx) in enumerate(gold, start=1):
        sent = corpus.resolve_sentence(title, idx)
        if sent is None:
            raise ValueError(f"gold evidence ({title!r}, {idx}) not in corpus")
        entries.append(EvidenceEntry(f"E{pos}", sent.doc_title, sent.sent_index, sent.text, 0.0))
    return RankedEvidence(entries=tuple(entries), l=max(l, len(entries)))


def make_sufficiency_pairs(
    claims: Iterable[Claim],
    corpus: Corpus,
    lexicons: Sequence[Lexicon] = (),
    prover=None,
    l: int = 5,
) -> list[dict]:
    """Per claim with gold evidence and a SUPPORTED/REFUTED label, emit one
    proof record repaired to SUFFICIENT (full gold evidence) and one
    repaired to INSUFFICIENT (gold evidence minus its last sentence; empty
    evidence when only one gold sentence exists)."""
    records: list[dict] = []
    for claim in claims:
        if not claim.gold_evidence or claim.label not in ("SUPPORTED", "REFUTED"):
            continue
        full = _gold_evidence(corpus, claim.gold_evidence, l)
        partial = _gold_evidence(corpus, claim.gold_evidence[:-1], l)
        for target, evidence in ((SUFFICIENT, full), (INSUFFICIENT, partial)):
            if prover is not None:
                proof = prover.prove(claim.text, evidence, hop=len(evidence.entries) or 1)
            else:
                proof = align_and_prove(claim.text, evidence, lexicons)
            repaired = repair_proof(proof, target, claim.label, lexicons)
            assert predict_sufficiency(repaired) == target
            records.append(
                {
                    "claim_id": claim.claim_id,
                    "label": claim.label,
                    "target": target,
                    "claim": claim.text,
                    "evidence": [[e.doc_title, e.sent_index] for e in evidence.entries],
                    "proof": render_proof(repaired),
                }
            )
    return records


def write_records(records: Iterable[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
