import math
import os
import sys

import pytest
from conftest import mk_evidence

from multihop.natlog import NatOp, parse_proof
from multihop.scorer import ContextSentence, ScoringContext
from multihop.wire import (
    PROTOCOL_VERSION,
    ExternalProver,
    ExternalReranker,
    ExternalScorer,
    SubprocessBackend,
    TransportError,
)

STUB = os.path.join(os.path.dirname(__file__), "stub_backend.py")


def stub(*flags, timeout=10.0):
    return SubprocessBackend([sys.executable, STUB, *flags], timeout=timeout)


def ctx_for(claim, entries=()):
    return ScoringContext(claim=claim, evidence=tuple(
        ContextSentence(f"E{i}", t, s) for i, (t, s) in enumerate(entries, start=1)
    ))


def test_protocol_version_constant():
    assert PROTOCOL_VERSION == 1


def test_score_round_trip_renormalizes():
    with stub() as backend:
        scorer = ExternalScorer(backend)
        ctx = ctx_for("meyers hosted", [("T", "some text")])
        out = scorer.next_token_logprobs(ctx, ["E1", "["], {"meyers", "rogen"})
        # stub raw scores: overlap with claim -> meyers=1, rogen=0;
        # renormalized: e/(e+1) and 1/(e+1)
        assert math.exp(out["meyers"]) == pytest.approx(math.e / (math.e + 1), abs=1e-9)
        assert math.exp(out["rogen"]) == pytest.approx(1 / (math.e + 1), abs=1e-9)
        assert sum(math.exp(v) for v in out.values()) == pytest.approx(1.0, abs=1e-9)


def test_rerank_round_trip():
    with stub() as backend:
        client = ExternalReranker(backend)
        scores = client.score_sentences(
            "seth meyers", ["prior text"],
            [("A", 0, "seth meyers appears"), ("B", 1, "nothing shared")], hop=1,
        )
        assert scores == [2.0, 0.0]


def test_prove_round_trip():
    with stub() as backend:
        client = ExternalProver(backend)
        evidence = mk_evidence([("A", 0, "some evidence text")])
        text = client.prove_text("a claim", evidence.entries, hop=1)
        proof = parse_proof(text)
        assert proof.mutations[0].op is NatOp.EQUIVALENCE


def test_sequential_requests_on_one_connection():
    with stub() as backend:
        client = ExternalReranker(backend)
        for _ in range(5):
            assert client.score_sentences("x", [], [("A", 0, "x")], hop=1) == [1.0]


def test_timeout_is_transport_error():
    with stub("--sleep", "1.5", timeout=0.3) as backend:
        with pytest.raises(TransportError, match="timeout"):
            backend.request("rerank", {"claim": "x", "prior_evidence": [], "candidates": [], "hop": 1})


def test_version_mismatch_is_transport_error():
    with stub("--bad-version") as backend:
        with pytest.raises(TransportError, match="version"):
            backend.request("rerank", {"claim": "x", "prior_evidence": [], "candidates": [], "hop": 1})


def test_remote_error_is_transport_error():
    with stub("--error") as backend:
        with pytest.raises(TransportError, match="boom"):
            backend.request("rerank", {"claim": "x", "prior_evidence": [], "candidates": [], "hop": 1})


def test_garbage_reply_is_transport_error():
    with stub("--garbage") as backend:
        with pytest.raises(TransportError, match="unparseable"):
            backend.request("rerank", {"claim": "x", "prior_evidence": [], "candidates": [], "hop": 1})


def test_dead_process_is_transport_error():
    with stub("--die") as backend:
        with pytest.raises(TransportError):
            backend.request("rerank", {"claim": "x", "prior_evidence": [], "candidates": [], "hop": 1})


def test_unstartable_backend():
    with pytest.raises(TransportError, match="cannot start"):
        SubprocessBackend(["/nonexistent/binary"])


def test_score_payload_carries_hop_and_hyperlink_flag():
    seen = {}

    class CapturingBackend:
        def request(self, kind, payload):
            seen.update(payload, kind=kind)
            return {"version": 1, "logprobs": {t: 0.0 for t in payload["allowed"]}}

    ctx = ScoringContext(
        claim="c",
        evidence=(ContextSentence("E1", "T", "text | links: Other"),),
        hop=2,
        hyperlinks_augmented=True,
    )
    ExternalScorer(CapturingBackend()).next_token_logprobs(ctx, ["E1"], {"a", "b"})
    assert seen["kind"] == "score"
    assert seen["hop"] == 2
    assert seen["hyperlinks"] is True
    assert seen["allowed"] == ["a", "b"]


def test_scorer_with_no_overlapping_tokens_errors():
    # remote returns logprobs only for tokens it knows; if none are allowed
    # the renormalization cannot proceed
    class EmptyBackend:
        def request(self, kind, payload):
            return {"version": 1, "logprobs": {}}

    scorer = ExternalScorer(EmptyBackend())
    with pytest.raises(TransportError):
        scorer.next_token_logprobs(ctx_for("c"), [], {"a"})
