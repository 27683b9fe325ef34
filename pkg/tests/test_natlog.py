import itertools
import math
import random

import pytest
from conftest import mk_evidence

from multihop.natlog import (
    CORE_OPS,
    EXTENDED_OPS,
    INSUFFICIENT,
    SUFFICIENT,
    Lexicon,
    Mutation,
    NatOp,
    Proof,
    ProofParseError,
    align_and_prove,
    load_lexicon,
    paraphrase,
    parse_proof,
    predict_sufficiency,
    render_proof,
    repair_proof,
    span_similarity_reference,
)


def proof_of(*ops, claim_spans=None):
    mutations = tuple(
        Mutation(claim_spans[i] if claim_spans else f"span {i}", f"ev {i}", op)
        for i, op in enumerate(ops)
    )
    return Proof(mutations=mutations)


# ---------------------------------------------------------------------------
# sufficiency rule

def test_independence_means_insufficient():
    proof = Proof(
        (
            Mutation("The 66th Primetime Emmy Awards", "66th Primetime Emmy Awards", NatOp.EQUIVALENCE),
            Mutation("was hosted", "hosted the ceremony", NatOp.EQUIVALENCE),
            Mutation("by an Iraqi comedian", "", NatOp.INDEPENDENCE),
            Mutation("born in 1973", "born December 28 , 1973", NatOp.EQUIVALENCE),
        )
    )
    assert predict_sufficiency(proof) == INSUFFICIENT


def test_all_equivalence_sufficient():
    assert predict_sufficiency(proof_of(NatOp.EQUIVALENCE, NatOp.EQUIVALENCE)) == SUFFICIENT


def test_refuting_evidence_is_sufficient():
    assert predict_sufficiency(proof_of(NatOp.EQUIVALENCE, NatOp.NEGATION)) == SUFFICIENT


def test_extended_op_rejected():
    with pytest.raises(ValueError, match="repair"):
        predict_sufficiency(proof_of(NatOp.EQUIVALENCE, NatOp.FORWARD_ENTAILMENT))


def test_exhaustive_rule_small():
    ops = sorted(CORE_OPS, key=lambda o: o.value)
    for n in range(1, 5):
        for combo in itertools.product(ops, repeat=n):
            expected = INSUFFICIENT if NatOp.INDEPENDENCE in combo else SUFFICIENT
            assert predict_sufficiency(proof_of(*combo)) == expected


# ---------------------------------------------------------------------------
# parse / render

def test_parse_single_mutation():
    proof = parse_proof("{ Seth Meyers } [ Seth Adam Meyers ] ≡")
    assert len(proof) == 1
    assert proof.mutations[0] == Mutation("Seth Meyers", "Seth Adam Meyers", NatOp.EQUIVALENCE)


def test_parse_ascii_aliases():
    text = "{ a } [ b ] EQ { c } [ d ] NEG { e } [ f ] ALT { g } [ ] IND"
    proof = parse_proof(text)
    assert proof.ops() == (NatOp.EQUIVALENCE, NatOp.NEGATION, NatOp.ALTERNATION, NatOp.INDEPENDENCE)
    assert proof.mutations[3].evidence_span == ""


def test_parse_extended_ops():
    proof = parse_proof("{ a } [ b ] ⊑ { c } [ d ] RE { e } [ f ] ⌣")
    assert proof.ops() == (NatOp.FORWARD_ENTAILMENT, NatOp.REVERSE_ENTAILMENT, NatOp.COVER)


def test_missing_op_is_parse_error():
    with pytest.raises(ProofParseError):
        parse_proof("{ a } [ b ]")


def test_unbalanced_delimiters_report_offset():
    with pytest.raises(ProofParseError) as err:
        parse_proof("{ a  [ b ] EQ")
    assert err.value.offset == 0
    with pytest.raises(ProofParseError, match="offset"):
        parse_proof("{ a } [ b EQ")


def test_unknown_op_token():
    with pytest.raises(ProofParseError, match="XX"):
        parse_proof("{ a } [ b ] XX")


def test_empty_claim_span_rejected():
    with pytest.raises(ProofParseError, match="empty claim span"):
        parse_proof("{ } [ b ] EQ")


ROUND_TRIP_CASES = [
    "{ Seth Meyers } [ Seth Adam Meyers ] ≡",
    "{ a } [ ] #",
    "{ one two } [ three ] ¬",
    "{ x } [ y ] ⇃↾",
    "{ p } [ q ] ⊑ { r } [ s ] ⊒",
    "{ cover } [ case ] ⌣",
    "{ multi word claim span } [ multi word evidence ] ≡ { tail } [ ] #",
] + [
    " ".join(
        f"{{ w{i}{j} }} [ e{i}{j} ] {op}"
        for j, op in enumerate(["≡", "¬", "#", "⇃↾"][: (i % 4) + 1])
    )
    for i in range(13)
]


@pytest.mark.parametrize("text", ROUND_TRIP_CASES)
def test_render_parse_round_trip(text):
    assert len(ROUND_TRIP_CASES) >= 20
    proof = parse_proof(text)
    assert render_proof(proof) == text
    assert parse_proof(render_proof(proof)) == proof


def test_ascii_render_round_trips():
    proof = parse_proof("{ a } [ b ] ≡ { c } [ ] #")
    ascii_text = render_proof(proof, ascii_ops=True)
    assert ascii_text == "{ a } [ b ] EQ { c } [ ] IND"
    assert parse_proof(ascii_text) == proof


# ---------------------------------------------------------------------------
# paraphrases

def test_paraphrase_table():
    assert paraphrase(NatOp.EQUIVALENCE) == "Equivalent Spans"
    assert paraphrase(NatOp.NEGATION) == "Evidence span refutes claim span"
    assert paraphrase(NatOp.ALTERNATION) == "Evidence span contradicts the claim span"
    assert paraphrase(NatOp.INDEPENDENCE) == "Unrelated claim span and evidence span"


def test_paraphrase_rejects_extended():
    with pytest.raises(ValueError):
        paraphrase(NatOp.COVER)


# ---------------------------------------------------------------------------
# span similarity

def test_similarity_identical():
    assert span_similarity_reference("comedian", "comedian") == pytest.approx(1.0, abs=1e-12)


def test_similarity_disjoint():
    assert span_similarity_reference("abcde", "xyzuv") == 0.0


def test_similarity_empty():
    assert span_similarity_reference("", "anything") == 0.0
    assert span_similarity_reference("ab", "ab") == 0.0  # no trigrams


def test_similarity_hand_computed():
    # trigrams(comedian) = {com, ome, med, edi, dia, ian}; trigrams(comedy)
    # = {com, ome, med, edy}; dot 3, norms sqrt(6) and 2
    expected = 3 / (2 * math.sqrt(6))
    assert span_similarity_reference("comedian", "comedy") == pytest.approx(expected, abs=1e-12)
    assert 0.0 < span_similarity_reference("comedian", "comedy") < 1.0


# ---------------------------------------------------------------------------
# lexicons

def test_lexicon_symmetric_closure(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("host\tpresenter\tsyn\nhot\tcold\tant\ntunisia\tafrica\tent\n")
    lex = load_lexicon(str(path))
    assert ("presenter", "host") in lex.syn and ("host", "presenter") in lex.syn
    assert ("cold", "hot") in lex.ant
    assert ("tunisia", "africa") in lex.ent and ("africa", "tunisia") not in lex.ent
    assert lex.synonyms("host") == {"presenter"}


def test_lexicon_bad_line(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("just two\tfields\n")
    with pytest.raises(ValueError, match=":1"):
        load_lexicon(str(path))


def test_lexicon_unknown_relation(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("a\tb\tnope\n")
    with pytest.raises(ValueError, match="nope"):
        load_lexicon(str(path))


# ---------------------------------------------------------------------------
# align_and_prove

def test_exact_match_all_equivalence():
    evidence = mk_evidence([("Emmy Gala", 0, "Seth Meyers hosted the ceremony for the first time")])
    proof = align_and_prove("Seth Meyers hosted the ceremony", evidence)
    assert all(m.op is NatOp.EQUIVALENCE for m in proof.mutations)
    assert predict_sufficiency(proof) == SUFFICIENT
    assert proof.covers("Seth Meyers hosted the ceremony")


def test_unsupported_chunk_is_independence():
    evidence = mk_evidence([("Emmy Gala", 0, "Seth Meyers hosted the ceremony")])
    proof = align_and_prove("The ceremony was hosted by an Iraqi comedian", evidence)
    independent = [m for m in proof.mutations if m.op is NatOp.INDEPENDENCE]
    assert independent and any("Iraqi" in m.claim_span for m in independent)
    assert all(m.evidence_span == "" for m in independent)
    assert predict_sufficiency(proof) == INSUFFICIENT


def test_dates_do_not_match():
    evidence = mk_evidence([("Seth Meyers", 0, "Seth Meyers was born December 28 , 1973")])
    proof = align_and_prove("Seth Meyers born in 1974", evidence)
    assert predict_sufficiency(proof) == INSUFFICIENT
    assert any(m.op is NatOp.INDEPENDENCE and "1974" in m.claim_span for m in proof.mutations)


def test_greedy_takes_maximal_span():
    evidence = mk_evidence([("D", 0, "alpha beta gamma delta")])
    proof = align_and_prove("alpha beta gamma", evidence)
    assert len(proof) == 1
    assert proof.mutations[0].claim_span == "alpha beta gamma"


def test_negation_marker_parity():
    evidence = mk_evidence([("D", 0, "He did not host the show")])
    proof = align_and_prove("host the show", evidence)
    negated = [m for m in proof.mutations if m.op is NatOp.NEGATION]
    assert negated
    assert "not" in negated[0].evidence_span


def test_double_negation_is_equivalence():
    evidence = mk_evidence([("D", 0, "it is not true he did not host the show")])
    proof = align_and_prove("host the show", evidence)
    assert all(m.op is NatOp.EQUIVALENCE for m in proof.mutations)


def test_synonym_match_via_lexicon():
    lex = Lexicon()
    lex.add("funny", "humorous", "syn")
    evidence = mk_evidence([("D", 0, "a humorous person appeared")])
    without = align_and_prove("funny", evidence)
    assert without.mutations[0].op is NatOp.INDEPENDENCE
    proof = align_and_prove("funny", evidence, [lex])
    assert proof.mutations[0].op is NatOp.EQUIVALENCE
    assert proof.mutations[0].evidence_span == "humorous"


def test_antonym_match_is_negation():
    lex = Lexicon()
    lex.add("tall", "short", "ant")
    evidence = mk_evidence([("D", 0, "a short person appeared")])
    proof = align_and_prove("tall", evidence, [lex])
    assert proof.mutations[0].op is NatOp.NEGATION


def test_sibling_antonym_is_alternation():
    # antonym of a sibling (synonym of the chunk) matches the evidence
    lex = Lexicon()
    lex.add("happy", "cheerful", "syn")
    lex.add("cheerful", "gloomy", "ant")
    evidence = mk_evidence([("D", 0, "a gloomy person appeared")])
    proof = align_and_prove("happy", evidence, [lex])
    assert proof.mutations[0].op is NatOp.ALTERNATION
    assert proof.mutations[0].evidence_span == "gloomy"


def test_empty_evidence_single_independent_chunk():
    proof = align_and_prove("anything at all", mk_evidence([]))
    assert len(proof) == 1
    assert proof.mutations[0].op is NatOp.INDEPENDENCE
    assert proof.covers("anything at all")


def test_coverage_property_random_claims():
    rng = random.Random(99)
    words = ["seth", "meyers", "hosted", "the", "show", "iraqi", "comedian", "born", "1973"]
    evidence = mk_evidence([("D", 0, "seth meyers hosted the show"), ("E", 1, "he was born in 1973")])
    for _ in range(50):
        claim = " ".join(rng.choices(words, k=rng.randint(1, 9)))
        proof = align_and_prove(claim, evidence)
        assert proof.covers(claim)


# ---------------------------------------------------------------------------
# repair

def test_repair_entailment_to_independence():
    proof = proof_of(NatOp.EQUIVALENCE, NatOp.FORWARD_ENTAILMENT)
    repaired = repair_proof(proof, INSUFFICIENT, "SUPPORTED")
    assert repaired.ops() == (NatOp.EQUIVALENCE, NatOp.INDEPENDENCE)


def test_repair_injects_independence_at_most_dissimilar():
    proof = Proof(
        (
            Mutation("comedian", "comedian", NatOp.EQUIVALENCE),
            Mutation("zzzz", "qqqq", NatOp.EQUIVALENCE),
        )
    )
    repaired = repair_proof(proof, INSUFFICIENT, "SUPPORTED")
    assert repaired.ops() == (NatOp.EQUIVALENCE, NatOp.INDEPENDENCE)


def test_repair_insufficient_tie_breaks_earliest():
    proof = Proof(
        (
            Mutation("aaaa", "zzzz", NatOp.EQUIVALENCE),
            Mutation("bbbb", "qqqq", NatOp.EQUIVALENCE),
        )
    )
    repaired = repair_proof(proof, INSUFFICIENT, "SUPPORTED")
    assert repaired.ops() == (NatOp.INDEPENDENCE, NatOp.EQUIVALENCE)


def test_repair_minimality():
    proof = proof_of(NatOp.EQUIVALENCE, NatOp.NEGATION, NatOp.EQUIVALENCE)
    repaired = repair_proof(proof, INSUFFICIENT, "SUPPORTED")
    changed = [i for i, (a, b) in enumerate(zip(proof.ops(), repaired.ops())) if a != b]
    assert len(changed) == 1


def test_repair_sufficient_supported_fallback():
    proof = proof_of(NatOp.EQUIVALENCE, NatOp.INDEPENDENCE)
    repaired = repair_proof(proof, SUFFICIENT, "SUPPORTED")
    assert repaired.ops() == (NatOp.EQUIVALENCE, NatOp.EQUIVALENCE)


def test_repair_sufficient_refuted_fallback():
    proof = proof_of(NatOp.INDEPENDENCE)
    repaired = repair_proof(proof, SUFFICIENT, "REFUTED")
    assert repaired.ops() == (NatOp.NEGATION,)


def test_repair_sufficient_lexicon_reassignment():
    lex = Lexicon()
    lex.add("funny", "humorous", "syn")
    lex.add("tall", "short", "ant")
    proof = Proof(
        (
            Mutation("funny", "humorous", NatOp.INDEPENDENCE),
            Mutation("tall", "short", NatOp.INDEPENDENCE),
            Mutation("hosted", "did not host", NatOp.INDEPENDENCE),
            Mutation("unmatched", "nothing related", NatOp.INDEPENDENCE),
        )
    )
    repaired = repair_proof(proof, SUFFICIENT, "SUPPORTED", [lex])
    assert repaired.ops() == (NatOp.EQUIVALENCE, NatOp.ALTERNATION, NatOp.NEGATION, NatOp.EQUIVALENCE)


def test_repair_insufficient_on_empty_proof_errors():
    with pytest.raises(ValueError):
        repair_proof(Proof(()), INSUFFICIENT, "SUPPORTED")


def test_repair_validates_arguments():
    proof = proof_of(NatOp.EQUIVALENCE)
    with pytest.raises(ValueError):
        repair_proof(proof, "MAYBE", "SUPPORTED")
    with pytest.raises(ValueError):
        repair_proof(proof, SUFFICIENT, "NEI")


def test_repair_soundness_randomized():
    rng = random.Random(4242)
    all_ops = list(NatOp)
    for _ in range(200):
        n = rng.randint(1, 6)
        proof = Proof(
            tuple(
                Mutation(f"c{i} {rng.choice('abcdef')}", rng.choice(["", f"e{i}", "not x"]), rng.choice(all_ops))
                for i in range(n)
            )
        )
        for target in (SUFFICIENT, INSUFFICIENT):
            for label in ("SUPPORTED", "REFUTED"):
                repaired = repair_proof(proof, target, label)
                assert predict_sufficiency(repaired) == target
