"""Knowledge-base loading and addressing.

The corpus is a list of documents with unique titles, each pre-segmented
into sentences. Sentence identity is (doc_title, sent_index); segmentation
is never computed here because the input distributions ship pre-segmented
and recomputing it would corrupt sentence identifiers.
"""

from __future__ import annotations

import json
import sys
import unicodedata
from dataclasses import dataclass, field


class CorpusError(ValueError):
    """Malformed corpus/claims input (parse failure or invariant violation)."""


def nfc(text: str) -> str:
    """Unicode NFC normalization; titles are compared byte-exact after this."""
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class Sentence:
    doc_title: str
    sent_index: int
    text: str
    hyperlinks: tuple[str, ...] = ()


@dataclass(frozen=True)
class Document:
    title: str
    doc_index: int
    sentences: tuple[Sentence, ...]

    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


@dataclass(frozen=True)
class Claim:
    claim_id: str
    text: str
    label: str | None = None  # SUPPORTED / REFUTED / NEI
    gold_evidence: tuple[tuple[str, int], ...] = ()
    # Additional annotator-provided gold sets (FEVER multi-annotation);
    # evaluation counts a claim as a hit if ANY gold set is covered.
    alt_gold_evidence: tuple[tuple[tuple[str, int], ...], ...] = ()

    def gold_docs(self) -> tuple[str, ...]:
        """Gold document titles of the primary annotation, first-seen order."""
        seen: dict[str, None] = {}
        for title, _ in self.gold_evidence:
            seen.setdefault(title, None)
        return tuple(seen)

    def gold_doc_sets(self) -> tuple[frozenset[str], ...]:
        """All annotated gold document sets (primary first, then alternates)."""
        sets = []
        if self.gold_evidence:
            sets.append(frozenset(t for t, _ in self.gold_evidence))
        for alt in self.alt_gold_evidence:
            s = frozenset(t for t, _ in alt)
            if s and s not in sets:
                sets.append(s)
        return tuple(sets)


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)
    title_lookup: dict[str, int] = field(default_factory=dict)
    dangling_links: int = 0  # hyperlink anchors that resolve to no title

    def __len__(self) -> int:
        return len(self.documents)

    def titles(self) -> list[str]:
        return [d.title for d in self.documents]

    def has_title(self, title: str) -> bool:
        return title in self.title_lookup

    def document(self, title: str) -> Document | None:
        idx = self.title_lookup.get(title)
        return self.documents[idx] if idx is not None else None

    def resolve_sentence(self, doc_title: str, sent_index: int) -> Sentence | None:
        doc = self.document(doc_title)
        if doc is None or not 0 <= sent_index < len(doc.sentences):
            return None
        return doc.sentences[sent_index]


def resolve_sentence(corpus: Corpus, doc_title: str, sent_index: int) -> Sentence | None:
    return corpus.resolve_sentence(doc_title, sent_index)


def _parse_document(record: dict, doc_index: int) -> Document:
    title = nfc(str(record["title"]))
    raw_sentences = record["sentences"]
    if not raw_sentences:
        raise CorpusError(f"document {title!r} has no sentences")
    sentences = []
    for i, s in enumerate(raw_sentences):
        links = tuple(nfc(str(a)) for a in s.get("hyperlinks", ()))
        sentences.append(Sentence(doc_title=title, sent_index=i, text=str(s["text"]), hyperlinks=links))
    return Document(title=title, doc_index=doc_index, sentences=tuple(sentences))


def load_corpus(path: str) -> Corpus:
    """Load a line-delimited corpus file: one JSON record per line with
    fields {title, sentences: [{text, hyperlinks?}]}.

    Duplicate titles are rejected naming the offending title. Dangling
    hyperlink anchors are kept but counted (they simply never resolve).
    """
    corpus = Corpus()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                doc = _parse_document(record, doc_index=len(corpus.documents))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed corpus record: {exc}") from exc
            if doc.title in corpus.title_lookup:
                raise CorpusError(f"{path}:{lineno}: duplicate document title {doc.title!r}")
            corpus.title_lookup[doc.title] = doc.doc_index
            corpus.documents.append(doc)
    for doc in corpus.documents:
        for sent in doc.sentences:
            corpus.dangling_links += sum(1 for a in sent.hyperlinks if a not in corpus.title_lookup)
    if corpus.dangling_links:
        print(f"corpus: {corpus.dangling_links} unresolvable hyperlink anchor(s)", file=sys.stderr)
    return corpus


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write the corpus back out in the input format (load round-trips)."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus.documents:
            record = {
                "title": doc.title,
                "sentences": [
                    {"text": s.text, **({"hyperlinks": list(s.hyperlinks)} if s.hyperlinks else {})}
                    for s in doc.sentences
                ],
            }
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


_LABEL_ALIASES = {
    "SUPPORTED": "SUPPORTED",
    "SUPPORTS": "SUPPORTED",
    "REFUTED": "REFUTED",
    "REFUTES": "REFUTED",
    "NEI": "NEI",
    "NOT ENOUGH INFO": "NEI",
}


def _parse_claim(record: dict) -> Claim:
    label = record.get("label")
    if label is not None:
        key = str(label).upper()
        if key not in _LABEL_ALIASES:
            raise CorpusError(f"unknown claim label {label!r}")
        label = _LABEL_ALIASES[key]
    gold = tuple((nfc(str(t)), int(i)) for t, i in record.get("gold_evidence") or ())
    alt = tuple(
        tuple((nfc(str(t)), int(i)) for t, i in ev)
        for ev in record.get("alt_gold_evidence") or ()
    )
    return Claim(
        claim_id=str(record["claim_id"]),
        text=str(record["text"]),
        label=label,
        gold_evidence=gold,
        alt_gold_evidence=alt,
    )


def load_claims(path: str) -> list[Claim]:
    """Load a line-delimited claims file: {claim_id, text, label?,
    gold_evidence?: [[title, sent_index], ...], alt_gold_evidence?}."""
    claims = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                claims.append(_parse_claim(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, CorpusError):
                    raise
                raise CorpusError(f"{path}:{lineno}: malformed claim record: {exc}") from exc
    return claims


def check_gold_resolvable(corpus: Corpus, claims: list[Claim]) -> list[str]:
    """Return messages for gold evidence entries that do not resolve."""
    problems = []
    for claim in claims:
        for title, idx in claim.gold_evidence:
            if corpus.resolve_sentence(title, idx) is None:
                problems.append(f"claim {claim.claim_id}: gold ({title!r}, {idx}) not in corpus")
    return problems
