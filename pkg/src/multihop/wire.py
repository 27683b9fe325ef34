"""External-backend wire protocol.

One transport, three message kinds. Requests and responses are single
JSON lines over a child process's stdin/stdout (UTF-8). Every message
carries a mandatory protocol "version" field. Kinds:

  score  -> {claim, evidence: [{identifier, doc_title, text}], prefix: [...],
             allowed: [...], hop}        => {logprobs: {token: value}}
  rerank -> {claim, prior_evidence: [...texts], candidates:
             [{doc_title, sent_index, text}], hop} => {scores: [...]}
  prove  -> {claim, evidence: [...], beam, hop}    => {proof: "text"}

Calls on one connection are strictly sequential (request/response); the
pipeline opens one backend per worker or serializes access through the
built-in lock. A response of {"error": ...}, a timeout, a version
mismatch or a dead process all surface as TransportError.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from typing import Iterable, Sequence

from .scorer import ScoringContext, renormalize

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class TransportError(RuntimeError):
    """External backend unreachable, timed out, or answered garbage."""


class SubprocessBackend:
    """Line-delimited JSON request/response over a child process's pipes."""

    def __init__(self, cmd: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.cmd = list(cmd)
        self.timeout = timeout
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start backend {self.cmd}: {exc}") from exc
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        for line in self._proc.stdout:
            self._replies.put(line)
        self._replies.put(None)  # EOF sentinel

    def request(self, kind: str, payload: dict) -> dict:
        message = {"version": PROTOCOL_VERSION, "kind": kind, **payload}
        with self._lock:
            if self._proc.poll() is not None:
                raise TransportError(f"backend {self.cmd}: process exited with {self._proc.returncode}")
            try:
                self._proc.stdin.write(json.dumps(message, ensure_ascii=False) + "\n")
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                raise TransportError(f"backend {self.cmd}: write failed: {exc}") from exc
            try:
                line = self._replies.get(timeout=self.timeout)
            except queue.Empty:
                raise TransportError(f"backend {self.cmd}: timeout after {self.timeout}s") from None
        if line is None:
            self._replies.put(None)  # EOF is permanent; later calls must not block
            raise TransportError(f"backend {self.cmd}: process closed its stdout")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"backend {self.cmd}: unparseable reply {line!r}") from exc
        if not isinstance(reply, dict):
            raise TransportError(f"backend {self.cmd}: reply is not an object")
        if reply.get("version") != PROTOCOL_VERSION:
            raise TransportError(f"backend {self.cmd}: protocol version mismatch in {reply!r}")
        if "error" in reply:
            raise TransportError(f"backend {self.cmd}: remote error: {reply['error']}")
        return reply

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def _evidence_payload(evidence) -> list[dict]:
    return [
        {"identifier": e.identifier, "doc_title": e.doc_title, "text": e.text}
        for e in evidence
    ]


class ExternalScorer:
    """Remote next-token scorer; whatever the remote returns is renormalized
    over the allowed set so constrained decoding sees a proper distribution."""

    def __init__(self, backend: SubprocessBackend):
        self.backend = backend

    def next_token_logprobs(self, ctx: ScoringContext, prefix: Iterable[str], allowed: Iterable[str]) -> dict[str, float]:
        allowed = sorted(set(allowed))
        reply = self.backend.request(
            "score",
            {
                "claim": ctx.claim,
                "evidence": _evidence_payload(ctx.evidence),
                "prefix": list(prefix),
                "allowed": allowed,
                "hop": ctx.hop,
                "hyperlinks": ctx.hyperlinks_augmented,
            },
        )
        logprobs = reply.get("logprobs")
        if not isinstance(logprobs, dict):
            raise TransportError(f"score reply missing logprobs: {reply!r}")
        try:
            return renormalize({str(t): float(v) for t, v in logprobs.items()}, allowed)
        except ValueError as exc:
            raise TransportError(str(exc)) from exc


class ExternalReranker:
    def __init__(self, backend: SubprocessBackend):
        self.backend = backend

    def score_sentences(
        self, claim: str, prior_texts: Sequence[str], candidates: Sequence[tuple[str, int, str]], hop: int
    ) -> list[float]:
        reply = self.backend.request(
            "rerank",
            {
                "claim": claim,
                "prior_evidence": list(prior_texts),
                "candidates": [
                    {"doc_title": t, "sent_index": i, "text": text} for t, i, text in candidates
                ],
                "hop": hop,
            },
        )
        scores = reply.get("scores")
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise TransportError(f"rerank reply has {len(scores) if isinstance(scores, list) else 'no'} scores for {len(candidates)} candidates")
        return [float(s) for s in scores]


class ExternalProver:
    def __init__(self, backend: SubprocessBackend, beam: int = 5):
        self.backend = backend
        self.beam = beam

    def prove_text(self, claim: str, evidence, hop: int) -> str:
        reply = self.backend.request(
            "prove",
            {"claim": claim, "evidence": _evidence_payload(evidence), "beam": self.beam, "hop": hop},
        )
        proof = reply.get("proof")
        if not isinstance(proof, str):
            raise TransportError(f"prove reply missing proof text: {reply!r}")
        return proof
