import math
import random

import pytest
from conftest import mk_corpus, mk_evidence

from multihop.decoder_trie import CLOSE, OPEN
from multihop.scorer import ContextSentence, ScoringContext, fit_reference_scorer

NAMES = mk_corpus(
    [
        ("Seth Meyers", ["Seth Adam Meyers is a comedian ."]),
        ("Seth Rogen", ["Seth Rogen is an actor ."]),
        ("Emmy Awards", ["The awards honor television ."]),
    ]
)


def ctx_for(claim, entries=()):
    return ScoringContext(claim=claim, evidence=tuple(
        ContextSentence(f"E{i}", title, text) for i, (title, text) in enumerate(entries, start=1)
    ))


def test_context_requires_consecutive_ids():
    with pytest.raises(ValueError):
        ScoringContext(claim="c", evidence=(ContextSentence("E2", "A", "x"),))


def test_singleton_allowed_is_free():
    scorer = fit_reference_scorer(NAMES)
    ctx = ctx_for("anything")
    assert scorer.next_token_logprobs(ctx, [], {OPEN}) == {OPEN: 0.0}


def test_equal_affinity_splits_evenly():
    scorer = fit_reference_scorer(NAMES)
    ctx = ctx_for("nothing shared with either")
    out = scorer.next_token_logprobs(ctx, ["E1", OPEN, "Seth"], {"Meyers", "Rogen"})
    assert out["Meyers"] == pytest.approx(math.log(0.5))
    assert out["Rogen"] == pytest.approx(math.log(0.5))


def test_derived_affinity_fixture():
    # claim tokens {meyers, hosted, the, show}; under the "Seth" node the
    # Meyers child reaches title tokens {seth, meyers} (affinity 1), the
    # Rogen child {seth, rogen} (affinity 0); lam=1 gives weights 2 and 1.
    scorer = fit_reference_scorer(NAMES, lam=1.0)
    ctx = ctx_for("meyers hosted the show")
    out = scorer.next_token_logprobs(ctx, ["E1", OPEN, "Seth"], {"Meyers", "Rogen"})
    assert out["Meyers"] == pytest.approx(math.log(2 / 3), abs=1e-12)
    assert out["Rogen"] == pytest.approx(math.log(1 / 3), abs=1e-12)
    assert out["Meyers"] > out["Rogen"]


def test_two_child_probability_example():
    # one reachable title shares 0 tokens with the context, the other 3;
    # with lam=1 the probabilities are 1/5 and 4/5
    corpus = mk_corpus([("aa bb cc", ["x"]), ("zz yy xx", ["x"])])
    scorer = fit_reference_scorer(corpus, lam=1.0)
    ctx = ctx_for("aa bb cc")
    out = scorer.next_token_logprobs(ctx, [OPEN], {"aa", "zz"})
    assert math.exp(out["aa"]) == pytest.approx(4 / 5, abs=1e-12)
    assert math.exp(out["zz"]) == pytest.approx(1 / 5, abs=1e-12)


def test_lambda_limit_goes_uniform():
    corpus = mk_corpus([("aa bb cc", ["x"]), ("zz yy xx", ["x"])])
    scorer = fit_reference_scorer(corpus, lam=1e9)
    ctx = ctx_for("aa bb cc")
    out = scorer.next_token_logprobs(ctx, [OPEN], {"aa", "zz"})
    assert math.exp(out["aa"]) == pytest.approx(0.5, abs=1e-6)


def test_empty_claim_uses_evidence_affinity():
    scorer = fit_reference_scorer(NAMES, lam=1.0)
    ctx = ctx_for("", [("Emmy Awards", "seth meyers appears here")])
    out = scorer.next_token_logprobs(ctx, ["E1", OPEN, "Seth"], {"Meyers", "Rogen"})
    assert out["Meyers"] > out["Rogen"]


def test_sentence_id_affinity_is_claim_overlap():
    scorer = fit_reference_scorer(NAMES, lam=1.0)
    ctx = ctx_for(
        "seth meyers hosted",
        [("Emmy Awards", "completely unrelated words"), ("Seth Meyers", "seth meyers hosted a show")],
    )
    out = scorer.next_token_logprobs(ctx, [], {"E1", "E2"})
    # E2 overlaps the claim on 3 tokens, E1 on 0: weights 4 vs 1
    assert math.exp(out["E2"]) == pytest.approx(4 / 5, abs=1e-12)
    assert math.exp(out["E1"]) == pytest.approx(1 / 5, abs=1e-12)


def test_close_token_scores_terminal_title():
    # at a terminal node that is also a prefix, "]" competes with children
    corpus = mk_corpus([("Seth", ["x"]), ("Seth Meyers", ["x"])])
    scorer = fit_reference_scorer(corpus, lam=1.0)
    ctx = ctx_for("seth meyers")
    out = scorer.next_token_logprobs(ctx, [OPEN, "Seth"], {"Meyers", CLOSE})
    # CLOSE selects title "Seth" (shares 1 ctx token); Meyers leads to
    # "Seth Meyers" (shares 2): weights 2 vs 3
    assert math.exp(out[CLOSE]) == pytest.approx(2 / 5, abs=1e-12)
    assert math.exp(out["Meyers"]) == pytest.approx(3 / 5, abs=1e-12)


def test_distribution_sums_to_one():
    rng = random.Random(7)
    words = ["emmy", "seth", "meyers", "show", "host", "tv", "talk", "night"]
    corpus = mk_corpus([(f"{rng.choice(words)} {rng.choice(words)} {i}", ["x"]) for i in range(12)])
    scorer = fit_reference_scorer(corpus)
    for _ in range(50):
        claim = " ".join(rng.choices(words, k=4))
        ctx = ctx_for(claim, [("t", " ".join(rng.choices(words, k=5)))])
        allowed = set(rng.sample(["E1", OPEN, CLOSE] + words, rng.randint(1, 6)))
        prefix = [OPEN] if rng.random() < 0.5 else []
        out = scorer.next_token_logprobs(ctx, prefix, allowed)
        assert set(out) == allowed
        assert sum(math.exp(v) for v in out.values()) == pytest.approx(1.0, abs=1e-9)
        assert all(v <= 0.0 for v in out.values())


def test_reference_scorer_deterministic():
    scorer = fit_reference_scorer(NAMES)
    ctx = ctx_for("seth meyers", [("Seth Meyers", "a comedian")])
    a = scorer.next_token_logprobs(ctx, ["E1", OPEN], {"Seth", "Emmy"})
    for _ in range(5):
        b = fit_reference_scorer(NAMES).next_token_logprobs(ctx, ["E1", OPEN], {"Seth", "Emmy"})
        assert a == b  # bitwise identical


def test_context_sensitivity():
    # inserting a token unique to a title never decreases that title's
    # step log-probabilities under the reference scorer
    scorer = fit_reference_scorer(NAMES, lam=1.0)
    base, boosted = ctx_for("a claim about awards"), ctx_for("a claim about awards rogen")
    for prefix, allowed, token in ([[OPEN], {"Seth", "Emmy"}, "Seth"], [[OPEN, "Seth"], {"Meyers", "Rogen"}, "Rogen"]):
        before = scorer.next_token_logprobs(base, prefix, allowed)[token]
        after = scorer.next_token_logprobs(boosted, prefix, allowed)[token]
        assert after >= before


def test_invalid_lambda():
    with pytest.raises(ValueError):
        fit_reference_scorer(NAMES, lam=0.0)
