"""Retrieval metrics over result records: recall@k, exact match, document
F1, and precision/recall of the insufficiency gate.

Rankings are padded before scoring: when the final hop ranks fewer
documents than a metric needs, the highest-ranked unused documents from
the previous hop are appended. Claims without gold documents (FEVER NEI)
are excluded from document metrics. A claim with several annotated gold
sets counts as a hit if any of them is covered.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .corpus import Claim


def padded_ranking(record: Mapping) -> list[str]:
    """Final document ranking padded with unused documents from the
    previous hop (appended in their hop t-1 rank order)."""
    hops = record.get("hops") or []
    if not hops:
        return []
    ranking = list(hops[-1]["ranked_docs"])
    if len(hops) >= 2:
        seen = set(ranking)
        ranking += [d for d in hops[-2]["ranked_docs"] if d not in seen]
    return ranking


def _scorable(claims: Sequence[Claim], records: Sequence[Mapping]) -> list[tuple[Claim, Mapping | None]]:
    by_id = {r["claim_id"]: r for r in records}
    return [(c, by_id.get(c.claim_id)) for c in claims if c.gold_doc_sets()]


def recall_at_k(records: Sequence[Mapping], claims: Sequence[Claim], k: int) -> float:
    """Fraction of gold-bearing claims whose full gold document set (any
    annotated set) appears within the padded top-k documents."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pairs = _scorable(claims, records)
    if not pairs:
        return 0.0
    hits = 0
    for claim, record in pairs:
        if record is None:
            continue
        top = set(padded_ranking(record)[:k])
        if any(gold <= top for gold in claim.gold_doc_sets()):
            hits += 1
    return hits / len(pairs)


def exact_match(records: Sequence[Mapping], claims: Sequence[Claim]) -> float:
    """Fraction of gold-bearing claims where the top-|gold| retrieved
    documents equal a gold set exactly."""
    pairs = _scorable(claims, records)
    if not pairs:
        return 0.0
    hits = 0
    for claim, record in pairs:
        if record is None:
            continue
        ranking = padded_ranking(record)
        if any(set(ranking[: len(gold)]) == gold for gold in claim.gold_doc_sets()):
            hits += 1
    return hits / len(pairs)


def doc_f1(records: Sequence[Mapping], claims: Sequence[Claim], k: int) -> float:
    """Mean harmonic mean of precision/recall between the padded top-k set
    and the gold set (best gold set when several are annotated)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pairs = _scorable(claims, records)
    if not pairs:
        return 0.0
    total = 0.0
    for claim, record in pairs:
        if record is None:
            continue
        retrieved = set(padded_ranking(record)[:k])
        best = 0.0
        for gold in claim.gold_doc_sets():
            if not retrieved or not gold:
                continue
            overlap = len(retrieved & gold)
            if overlap == 0:
                continue
            p = overlap / len(retrieved)
            r = overlap / len(gold)
            best = max(best, 2 * p * r / (p + r))
        total += best
    return total / len(pairs)


def insufficiency_pr(records: Sequence[Mapping], claims: Sequence[Claim]) -> tuple[float, float]:
    """Precision/recall of the gate's INSUFFICIENT decisions over all gate
    invocations of gold-bearing claims. The positive class is "needs more
    evidence at this hop": no gold document set is fully covered by the
    documents of E_t. Precision is reported as 0.0 when the gate never
    said INSUFFICIENT."""
    tp = pred_pos = actual_pos = 0
    for claim, record in _scorable(claims, records):
        if record is None:
            continue
        gold_sets = claim.gold_doc_sets()
        for hop in record.get("hops") or []:
            if hop.get("sufficiency") is None:
                continue
            evidence_docs = {e["doc_title"] for e in hop["evidence"]}
            positive = not any(gold <= evidence_docs for gold in gold_sets)
            predicted = hop["sufficiency"] == "INSUFFICIENT"
            actual_pos += positive
            pred_pos += predicted
            tp += positive and predicted
    precision = tp / pred_pos if pred_pos else 0.0
    recall = tp / actual_pos if actual_pos else 0.0
    return precision, recall


def _is_multihop(claim: Claim) -> bool:
    sizes = [len(g) for g in claim.gold_doc_sets()]
    return bool(sizes) and min(sizes) >= 2


def metrics_report(records: Sequence[Mapping], claims: Sequence[Claim], k: int = 5) -> dict:
    """All metrics, overall and restricted to multi-hop claims (every gold
    set needs at least two documents), as a flat key-value mapping."""
    multihop = [c for c in claims if _is_multihop(c)]
    precision, recall = insufficiency_pr(records, claims)
    report = {
        "claims_total": len(claims),
        "claims_with_gold": sum(1 for c in claims if c.gold_doc_sets()),
        "claims_multihop": len(multihop),
        "k": k,
        f"recall_at_{k}_overall": recall_at_k(records, claims, k),
        "exact_match_overall": exact_match(records, claims),
        f"doc_f1_at_{k}_overall": doc_f1(records, claims, k),
        "insufficiency_precision": precision,
        "insufficiency_recall": recall,
    }
    if multihop:
        report[f"recall_at_{k}_multihop"] = recall_at_k(records, multihop, k)
        report["exact_match_multihop"] = exact_match(records, multihop)
        report[f"doc_f1_at_{k}_multihop"] = doc_f1(records, multihop, k)
    return report


def render_report(report: Mapping) -> str:
    lines = []
    for key in sorted(report):
        value = report[key]
        if isinstance(value, float):
            lines.append(f"{key} = {value:.6f}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
