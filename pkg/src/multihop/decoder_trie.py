"""Prefix trie over document titles plus the markup grammar that switches
between the two generation search spaces (sentence identifiers, titles).

A legal generation under the default grammar is

    <id_1> ... <id_t> [ <title token> ... <title token> ]

with the t identifiers distinct and drawn from the current evidence, and
the bracketed token sequence spelling exactly one corpus title. The
grammar also supports variants that skip the identifier phase or decode
several bracketed title segments in a row.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Callable, Iterable

OPEN = "["
CLOSE = "]"
TRIE_END = "<end>"

PHASE_SENTENCE_IDS = "SENTENCE_IDS"
PHASE_OPEN_BRACKET = "OPEN_BRACKET"
PHASE_TITLE = "TITLE"
PHASE_CLOSED = "CLOSED"

TRIE_MAGIC = "#multihop-trie v1"


class GrammarError(ValueError):
    """A token outside the allowed set was fed to advance()."""


def whitespace_tokenizer(title: str) -> list[str]:
    return title.split()


class TrieNode:
    __slots__ = ("children", "title")

    def __init__(self):
        self.children: dict[str, TrieNode] = {}
        self.title: str | None = None  # set when a full title terminates here


class DecoderTrie:
    """Trie of tokenized titles; every root-to-terminal path spells exactly
    one title. Node children double as the allowed-next-token sets."""

    def __init__(self):
        self.root = TrieNode()
        self.n_titles = 0
        self.n_nodes = 1
        self.total_tokens = 0
        self._sequences: list[tuple[tuple[str, ...], str]] = []

    def insert(self, tokens: Iterable[str], title: str) -> None:
        tokens = tuple(tokens)
        if not tokens:
            raise ValueError(f"title {title!r} tokenizes to nothing")
        node = self.root
        for tok in tokens:
            child = node.children.get(tok)
            if child is None:
                child = TrieNode()
                node.children[tok] = child
                self.n_nodes += 1
            node = child
        if node.title is not None:
            raise ValueError(f"duplicate title {title!r}")
        node.title = title
        self.n_titles += 1
        self.total_tokens += len(tokens)
        self._sequences.append((tokens, title))

    def walk(self, prefix: Iterable[str]) -> TrieNode | None:
        node = self.root
        for tok in prefix:
            node = node.children.get(tok)
            if node is None:
                return None
        return node

    def allowed_next(self, prefix: Iterable[str]) -> set[str]:
        """Child tokens at the prefix; includes TRIE_END where a title ends."""
        node = self.walk(prefix)
        if node is None:
            return set()
        allowed = set(node.children)
        if node.title is not None:
            allowed.add(TRIE_END)
        return allowed

    def contains(self, tokens: Iterable[str]) -> bool:
        node = self.walk(tokens)
        return node is not None and node.title is not None

    def footprint_bytes(self) -> int:
        """Size of the serialized form (the persistent representation)."""
        return len(self._payload().encode("utf-8")) + len(TRIE_MAGIC) + 2

    def _payload(self) -> str:
        return json.dumps(
            {"sequences": [[list(toks), title] for toks, title in self._sequences]},
            ensure_ascii=False,
            sort_keys=True,
        )


def build_trie(titles: list[str], tokenizer: Callable[[str], list[str]] = whitespace_tokenizer) -> DecoderTrie:
    if not titles:
        raise ValueError("titles must be non-empty")
    trie = DecoderTrie()
    for title in titles:
        trie.insert(tokenizer(title), title)
    return trie


def save_trie(trie: DecoderTrie, path: str) -> int:
    with open(path, "w", encoding="utf-8") as f:
        f.write(TRIE_MAGIC + "\n")
        f.write(trie._payload() + "\n")
    return os.path.getsize(path)


def load_trie(path: str) -> DecoderTrie:
    with open(path, encoding="utf-8") as f:
        magic = f.readline().rstrip("\n")
        if magic != TRIE_MAGIC:
            raise ValueError(f"{path}: not a multihop trie file (header {magic!r})")
        payload = json.loads(f.readline())
    trie = DecoderTrie()
    for tokens, title in payload["sequences"]:
        trie.insert(tokens, title)
    return trie


def trie_footprint_bytes(path: str) -> int:
    return os.path.getsize(path)


@dataclass(frozen=True)
class MarkupState:
    """Value-like decoding state, copied per beam hypothesis.

    The trie and the identifier universe are fixed for one decode and are
    carried by the state so hypotheses are self-contained; advance() never
    mutates, it returns a new state.
    """

    trie: DecoderTrie
    evidence_ids: tuple[str, ...]
    required_ids: int
    phase: str
    emitted_ids: tuple[str, ...] = ()
    node: TrieNode | None = None
    titles_done: tuple[str, ...] = ()
    required_titles: int = 1

    @staticmethod
    def initial(
        trie: DecoderTrie,
        evidence_ids: Iterable[str],
        required_ids: int,
        required_titles: int = 1,
    ) -> "MarkupState":
        ids = tuple(evidence_ids)
        if required_ids < 0:
            raise ValueError("required_ids must be >= 0")
        if required_ids > len(set(ids)):
            raise ValueError(f"required_ids={required_ids} exceeds {len(set(ids))} distinct evidence ids")
        if required_titles < 1:
            raise ValueError("required_titles must be >= 1")
        phase = PHASE_SENTENCE_IDS if required_ids > 0 else PHASE_OPEN_BRACKET
        return MarkupState(
            trie=trie,
            evidence_ids=ids,
            required_ids=required_ids,
            phase=phase,
            required_titles=required_titles,
        )

    @property
    def closed(self) -> bool:
        return self.phase == PHASE_CLOSED


def allowed_tokens(state: MarkupState) -> set[str]:
    """Legal next tokens. Distinct identifiers until exactly required_ids are
    emitted, then "[", then trie children (CLOSE where a title terminates),
    then "]". CLOSED admits nothing."""
    if state.phase == PHASE_SENTENCE_IDS:
        emitted = set(state.emitted_ids)
        return {i for i in state.evidence_ids if i not in emitted}
    if state.phase == PHASE_OPEN_BRACKET:
        return {OPEN}
    if state.phase == PHASE_TITLE:
        node = state.node if state.node is not None else state.trie.root
        allowed = set(node.children)
        if node.title is not None:
            allowed.add(CLOSE)
        return allowed
    return set()


def advance(state: MarkupState, token: str) -> MarkupState:
    if token not in allowed_tokens(state):
        raise GrammarError(f"token {token!r} not allowed in phase {state.phase}")
    if state.phase == PHASE_SENTENCE_IDS:
        emitted = state.emitted_ids + (token,)
        phase = PHASE_OPEN_BRACKET if len(emitted) == state.required_ids else PHASE_SENTENCE_IDS
        return replace(state, emitted_ids=emitted, phase=phase)
    if state.phase == PHASE_OPEN_BRACKET:
        return replace(state, phase=PHASE_TITLE, node=state.trie.root)
    # TITLE phase
    node = state.node if state.node is not None else state.trie.root
    if token == CLOSE:
        titles = state.titles_done + (node.title,)
        if len(titles) == state.required_titles:
            return replace(state, phase=PHASE_CLOSED, node=None, titles_done=titles)
        return replace(state, phase=PHASE_OPEN_BRACKET, node=None, titles_done=titles)
    return replace(state, node=node.children[token])
