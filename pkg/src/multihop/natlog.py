"""Natural-logic sufficiency proofs.

A proof is an ordered sequence of mutations, each rewriting one claim span
into an evidence span under an operator. Sufficiency proofs use a
four-operator alphabet (equivalence, negation, alternation, independence);
evidence is insufficient iff any mutation carries independence, which makes
the prediction faithful by construction. Entailment and cover operators
appear only in proofs produced by external generators and must be repaired
away before the sufficiency rule applies.

Text form, one mutation per group:  { claim span } [ evidence span ] OP
with ASCII aliases accepted for every operator token.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Sequence

SUFFICIENT = "SUFFICIENT"
INSUFFICIENT = "INSUFFICIENT"

NEGATION_MARKERS = frozenset({"not", "never", "no"})


class NatOp(Enum):
    EQUIVALENCE = "EQUIVALENCE"
    NEGATION = "NEGATION"
    ALTERNATION = "ALTERNATION"
    INDEPENDENCE = "INDEPENDENCE"
    # extended input alphabet, legal only before repair
    FORWARD_ENTAILMENT = "FORWARD_ENTAILMENT"
    REVERSE_ENTAILMENT = "REVERSE_ENTAILMENT"
    COVER = "COVER"


CORE_OPS = frozenset({NatOp.EQUIVALENCE, NatOp.NEGATION, NatOp.ALTERNATION, NatOp.INDEPENDENCE})
EXTENDED_OPS = frozenset(NatOp) - CORE_OPS

_OP_SYMBOL = {
    NatOp.EQUIVALENCE: "≡",  # ≡
    NatOp.NEGATION: "¬",  # ¬
    NatOp.ALTERNATION: "⇃↾",  # down/up harpoons
    NatOp.INDEPENDENCE: "#",
    NatOp.FORWARD_ENTAILMENT: "⊑",  # ⊑
    NatOp.REVERSE_ENTAILMENT: "⊒",  # ⊒
    NatOp.COVER: "⌣",  # ⌣
}
_OP_ASCII = {
    NatOp.EQUIVALENCE: "EQ",
    NatOp.NEGATION: "NEG",
    NatOp.ALTERNATION: "ALT",
    NatOp.INDEPENDENCE: "IND",
    NatOp.FORWARD_ENTAILMENT: "FE",
    NatOp.REVERSE_ENTAILMENT: "RE",
    NatOp.COVER: "COV",
}
_TOKEN_TO_OP = {}
for _op in NatOp:
    _TOKEN_TO_OP[_OP_SYMBOL[_op]] = _op
    _TOKEN_TO_OP[_OP_ASCII[_op]] = _op

_PARAPHRASE = {
    NatOp.EQUIVALENCE: "Equivalent Spans",
    NatOp.NEGATION: "Evidence span refutes claim span",
    NatOp.ALTERNATION: "Evidence span contradicts the claim span",
    NatOp.INDEPENDENCE: "Unrelated claim span and evidence span",
}


@dataclass(frozen=True)
class Mutation:
    claim_span: str
    evidence_span: str
    op: NatOp

    def __post_init__(self):
        if not self.claim_span.strip():
            raise ValueError("claim_span must be non-empty")


@dataclass(frozen=True)
class Proof:
    mutations: tuple[Mutation, ...]

    def __len__(self) -> int:
        return len(self.mutations)

    def ops(self) -> tuple[NatOp, ...]:
        return tuple(m.op for m in self.mutations)

    def covers(self, claim_text: str) -> bool:
        """Concatenated claim spans reconstruct the claim, whitespace-normalized."""
        joined = " ".join(" ".join(m.claim_span.split()) for m in self.mutations)
        return joined == " ".join(claim_text.split())


class ProofParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


def render_proof(proof: Proof, ascii_ops: bool = False) -> str:
    table = _OP_ASCII if ascii_ops else _OP_SYMBOL
    parts = []
    for m in proof.mutations:
        group = ["{", m.claim_span, "}", "[", m.evidence_span, "]", table[m.op]]
        parts.append(" ".join(p for p in group if p))
    return " ".join(parts)


def parse_proof(text: str) -> Proof:
    mutations = []
    i, n = 0, len(text)
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        if text[i] != "{":
            raise ProofParseError(f"expected '{{', found {text[i]!r}", i)
        close = text.find("}", i + 1)
        if close < 0:
            raise ProofParseError("unbalanced '{'", i)
        claim_span = text[i + 1 : close].strip()
        if not claim_span:
            raise ProofParseError("empty claim span", i)
        i = close + 1
        while i < n and text[i].isspace():
            i += 1
        if i >= n or text[i] != "[":
            raise ProofParseError("expected '[' after claim span", i)
        close = text.find("]", i + 1)
        if close < 0:
            raise ProofParseError("unbalanced '['", i)
        evidence_span = text[i + 1 : close].strip()
        i = close + 1
        while i < n and text[i].isspace():
            i += 1
        start = i
        while i < n and not text[i].isspace() and text[i] != "{":
            i += 1
        token = text[start:i]
        if not token:
            raise ProofParseError("missing operator token", start)
        op = _TOKEN_TO_OP.get(token)
        if op is None:
            raise ProofParseError(f"unknown operator token {token!r}", start)
        mutations.append(Mutation(claim_span=claim_span, evidence_span=evidence_span, op=op))
    return Proof(mutations=tuple(mutations))


def predict_sufficiency(proof: Proof) -> str:
    """INSUFFICIENT iff any mutation carries the independence operator."""
    for m in proof.mutations:
        if m.op in EXTENDED_OPS:
            raise ValueError(f"sufficiency is undefined for {m.op.value}; repair the proof first")
    if any(m.op is NatOp.INDEPENDENCE for m in proof.mutations):
        return INSUFFICIENT
    return SUFFICIENT


def paraphrase(op: NatOp) -> str:
    if op in EXTENDED_OPS:
        raise ValueError(f"no paraphrase for extended operator {op.value}")
    return _PARAPHRASE[op]


# ---------------------------------------------------------------------------
# Lexicons

REL_SYN = "syn"
REL_ANT = "ant"
REL_ENT = "ent"


@dataclass
class Lexicon:
    source: str = ""
    syn: set[tuple[str, str]] = None
    ant: set[tuple[str, str]] = None
    ent: set[tuple[str, str]] = None

    def __post_init__(self):
        self.syn = set(self.syn or ())
        self.ant = set(self.ant or ())
        self.ent = set(self.ent or ())

    def add(self, a: str, b: str, relation: str) -> None:
        a, b = _norm_term(a), _norm_term(b)
        if relation == REL_SYN:
            self.syn.add((a, b))
            self.syn.add((b, a))  # symmetric closure
        elif relation == REL_ANT:
            self.ant.add((a, b))
            self.ant.add((b, a))
        elif relation == REL_ENT:
            self.ent.add((a, b))
        else:
            raise ValueError(f"unknown lexicon relation {relation!r}")

    def synonyms(self, term: str) -> set[str]:
        term = _norm_term(term)
        return {b for a, b in self.syn if a == term}

    def antonyms(self, term: str) -> set[str]:
        term = _norm_term(term)
        return {b for a, b in self.ant if a == term}


def load_lexicon(path: str, source: str | None = None) -> Lexicon:
    """Tab-separated (term_a, term_b, relation in {syn, ant, ent}) per line."""
    lex = Lexicon(source=source or path)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            lex.add(fields[0], fields[1], fields[2])
    return lex


def _norm_term(term: str) -> str:
    return " ".join(term.lower().split())


def _syn_related(a: str, b: str, lexicons: Sequence[Lexicon]) -> bool:
    a, b = _norm_term(a), _norm_term(b)
    if a == b and a:
        return True
    return any((a, b) in lex.syn for lex in lexicons)


def _ant_related(a: str, b: str, lexicons: Sequence[Lexicon]) -> bool:
    a, b = _norm_term(a), _norm_term(b)
    return any((a, b) in lex.ant for lex in lexicons)


# ---------------------------------------------------------------------------
# Reference proof generation by lexical alignment

_WORD_CLEAN = re.compile(r"[^0-9a-z]+")


def _norm_word(word: str) -> str:
    return _WORD_CLEAN.sub("", word.lower())


def _evidence_words(evidence) -> list[list[str]]:
    if evidence is None:
        texts = []
    elif hasattr(evidence, "texts"):
        texts = evidence.texts()
    else:
        texts = list(evidence)
    return [text.split() for text in texts]


def _occurrences(span_norm: list[str], sent_norm: list[str]) -> list[int]:
    hits = []
    k = len(span_norm)
    for i in range(len(sent_norm) - k + 1):
        if sent_norm[i : i + k] == span_norm:
            hits.append(i)
    return hits


class _EvidenceMatcher:
    """Finds claim-span matches in the evidence sentences, tracking negation
    parity (count of not/never/no earlier in the same sentence)."""

    def __init__(self, evidence, lexicons: Sequence[Lexicon]):
        self.sentences = _evidence_words(evidence)
        self.norm = [[_norm_word(w) for w in sent] for sent in self.sentences]
        self.lexicons = lexicons

    def _find_term(self, term_words: list[str]) -> list[tuple[int, int, int, int]]:
        """(sentence index, start, end, negation parity) for every occurrence."""
        found = []
        if not term_words or not all(term_words):
            return found
        for si, sent in enumerate(self.norm):
            for start in _occurrences(term_words, sent):
                parity = sum(1 for w in sent[:start] if w in NEGATION_MARKERS) % 2
                found.append((si, start, start + len(term_words), parity))
        return found

    def _span_text(self, si: int, start: int, end: int) -> str:
        return " ".join(self.sentences[si][start:end])

    def match(self, chunk_words: list[str]) -> tuple[NatOp, str] | None:
        """Classify one candidate claim chunk, or None if nothing matches.

        Exact/synonym occurrences under even negation parity give
        equivalence, under odd parity negation; a direct antonym gives
        negation; an antonym of a sibling term (a synonym of the chunk)
        gives alternation.
        """
        chunk_norm = [_norm_word(w) for w in chunk_words]
        if not all(chunk_norm):
            return None
        chunk_term = " ".join(chunk_norm)

        candidates = [chunk_norm] + [s.split() for s in sorted(self._all_synonyms(chunk_term))]
        odd_hit = None
        for term_words in candidates:
            for si, start, end, parity in self._find_term(term_words):
                if parity == 0:
                    return (NatOp.EQUIVALENCE, self._span_text(si, start, end))
                if odd_hit is None:
                    marker = self._nearest_marker(si, start)
                    odd_hit = (NatOp.NEGATION, self._span_text(si, marker, end))
        if odd_hit is not None:
            return odd_hit

        for ant in sorted(self._all_antonyms(chunk_term)):
            hits = self._find_term(ant.split())
            if hits:
                si, start, end, _ = hits[0]
                return (NatOp.NEGATION, self._span_text(si, start, end))

        for sibling in sorted(self._all_synonyms(chunk_term)):
            for ant in sorted(self._all_antonyms(sibling)):
                hits = self._find_term(ant.split())
                if hits:
                    si, start, end, _ = hits[0]
                    return (NatOp.ALTERNATION, self._span_text(si, start, end))
        return None

    def _nearest_marker(self, si: int, before: int) -> int:
        for i in range(before - 1, -1, -1):
            if self.norm[si][i] in NEGATION_MARKERS:
                return i
        return before

    def _all_synonyms(self, term: str) -> set[str]:
        out = set()
        for lex in self.lexicons:
            out |= lex.synonyms(term)
        return out

    def _all_antonyms(self, term: str) -> set[str]:
        out = set()
        for lex in self.lexicons:
            out |= lex.antonyms(term)
        return out


def align_and_prove(claim, evidence, lexicons: Sequence[Lexicon] = ()) -> Proof:
    """Reference proof generator: greedy maximal-span lexical alignment.

    The claim is chunked left to right, always taking the longest span
    that matches the evidence (exactly, by synonym, under negation, or by
    antonymy); runs of unmatched words become independence mutations with
    an empty evidence span. The resulting proof covers the claim.
    """
    claim_text = claim.text if hasattr(claim, "text") else str(claim)
    words = claim_text.split()
    matcher = _EvidenceMatcher(evidence, lexicons)
    mutations: list[Mutation] = []
    pending: list[str] = []

    def flush_pending():
        if pending:
            mutations.append(Mutation(" ".join(pending), "", NatOp.INDEPENDENCE))
            pending.clear()

    i = 0
    while i < len(words):
        matched = None
        for j in range(len(words), i, -1):
            matched = matcher.match(words[i:j])
            if matched is not None:
                flush_pending()
                op, ev_span = matched
                mutations.append(Mutation(" ".join(words[i:j]), ev_span, op))
                i = j
                break
        if matched is None:
            pending.append(words[i])
            i += 1
    flush_pending()
    return Proof(mutations=tuple(mutations))


# ---------------------------------------------------------------------------
# Span similarity and proof repair

def span_similarity_reference(a: str, b: str) -> float:
    """Cosine similarity of character-trigram count vectors; 0.0 when either
    side has no trigrams (strings shorter than 3 characters included)."""
    va = Counter(a[i : i + 3] for i in range(len(a) - 2))
    vb = Counter(b[i : i + 3] for i in range(len(b) - 2))
    if not va or not vb:
        return 0.0
    dot = sum(count * vb[tri] for tri, count in va.items())
    norm = math.sqrt(sum(c * c for c in va.values())) * math.sqrt(sum(c * c for c in vb.values()))
    return dot / norm


def repair_proof(
    proof: Proof,
    target: str,
    label: str,
    lexicons: Sequence[Lexicon] = (),
    similarity: Callable[[str, str], float] = span_similarity_reference,
) -> Proof:
    """Rewrite operators until the sufficiency prediction equals target.

    Entailment and cover operators always become independence. To force
    insufficiency when none is present, the mutation with the most
    dissimilar spans (earliest on ties) becomes independence. To force
    sufficiency, each independence mutation is first reassigned through
    the lexicons (synonym -> equivalence, antonym -> alternation, negation
    marker -> negation); whatever remains becomes equivalence for
    supported claims and negation for refuted ones.
    """
    if target not in (SUFFICIENT, INSUFFICIENT):
        raise ValueError(f"target must be SUFFICIENT or INSUFFICIENT, got {target!r}")
    mutations = [
        replace(m, op=NatOp.INDEPENDENCE) if m.op in EXTENDED_OPS else m for m in proof.mutations
    ]

    if target == INSUFFICIENT:
        if not mutations:
            raise ValueError("cannot make an empty proof insufficient")
        if not any(m.op is NatOp.INDEPENDENCE for m in mutations):
            sims = [similarity(m.claim_span, m.evidence_span) for m in mutations]
            worst = min(range(len(sims)), key=lambda i: (sims[i], i))
            mutations[worst] = replace(mutations[worst], op=NatOp.INDEPENDENCE)
        return Proof(mutations=tuple(mutations))

    if label not in ("SUPPORTED", "REFUTED"):
        raise ValueError(f"label must be SUPPORTED or REFUTED, got {label!r}")
    fallback = NatOp.EQUIVALENCE if label == "SUPPORTED" else NatOp.NEGATION
    for i, m in enumerate(mutations):
        if m.op is not NatOp.INDEPENDENCE:
            continue
        if _syn_related(m.claim_span, m.evidence_span, lexicons):
            mutations[i] = replace(m, op=NatOp.EQUIVALENCE)
        elif _ant_related(m.claim_span, m.evidence_span, lexicons):
            mutations[i] = replace(m, op=NatOp.ALTERNATION)
        elif any(_norm_word(w) in NEGATION_MARKERS for w in m.evidence_span.split()):
            mutations[i] = replace(m, op=NatOp.NEGATION)
        else:
            mutations[i] = replace(m, op=fallback)
    return Proof(mutations=tuple(mutations))
