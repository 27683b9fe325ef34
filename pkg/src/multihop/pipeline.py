"""The retrieval hop loop: initial retrieval, sentence reranking, the
sufficiency gate, and constrained autoregressive retrieval, iterated with
dynamic termination.

Hop 1 retrieves k candidate documents with BM25 (or reads a precomputed
initial ranking) and reranks their sentences into E_1. From then on each
hop first generates a sufficiency proof over (claim, E_t): if the proof
carries no independence mutation, or the hop cap is reached, retrieval
stops; otherwise the decoder scores sentence/document sequences jointly,
their aggregation becomes D_{t+1}, and the reranker produces E_{t+1}.
The gate runs after every rerank, hop 1 included, so single-hop claims
terminate without a single decoder call.

All shared state (corpus, index, trie, scorer parameters, lexicons) is
immutable after construction; claims are independent work units.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from . import natlog
from .beam_decoder import MODE_JOINT, MODES, DocSetScore, decode_variant
from .corpus import Claim, Corpus
from .decoder_trie import DecoderTrie
from .natlog import Proof, align_and_prove, parse_proof, predict_sufficiency, render_proof
from .reranker import BACKEND_EXTERNAL, BACKEND_REFERENCE, EvidenceEntry, RankedEvidence, rerank
from .scorer import ScoringContext, fit_reference_scorer
from .sparse_index import InvertedIndex, bm25_rank
from .wire import ExternalProver, ExternalReranker, ExternalScorer, SubprocessBackend, TransportError


@dataclass
class PipelineConfig:
    k: int = 10  # document sets kept per hop (also hop-1 candidate count)
    l: int = 5  # evidence sentences kept by the reranker
    n_max: int = 2  # hop cap; the gate may stop earlier
    beam_q: int = 25
    proof_beam: int = 5  # forwarded to external provers; reference prover is deterministic
    variant: str = MODE_JOINT
    hyperlinks: bool = False
    scorer_backend: str = "reference"  # "reference" or a command line for the wire protocol
    reranker_backend: str = "reference"
    prover_backend: str = "reference"
    scorer_lambda: float = 1.0
    retain_prior_docs: bool = False  # force-keep hop-t docs in D_{t+1} rankings
    seed: int = 0
    workers: int = 0  # 0 = available parallelism

    def validate(self) -> None:
        if self.l < 1 or self.k < 1:
            raise ValueError(f"k and l must be >= 1 (k={self.k}, l={self.l})")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.beam_q < self.k:
            raise ValueError(f"beam_q ({self.beam_q}) must be >= k ({self.k})")
        if self.variant not in MODES:
            raise ValueError(f"variant must be one of {MODES}, got {self.variant!r}")
        if self.workers < 0:
            raise ValueError(f"workers must be >= 0, got {self.workers}")

    def to_metadata(self) -> dict:
        meta = asdict(self)
        meta["length_normalization"] = "none"  # raw summed log-probabilities
        return meta


@dataclass(frozen=True)
class HopState:
    t: int
    doc_sets: tuple[DocSetScore, ...]
    ranked_docs: tuple[str, ...]
    evidence: RankedEvidence
    proof: Proof | None
    sufficiency: str | None


@dataclass(frozen=True)
class RetrievalResult:
    claim_id: str
    hops: tuple[HopState, ...]
    n_dyn: int
    metadata: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def final_ranked_docs(self) -> tuple[str, ...]:
        return self.hops[-1].ranked_docs if self.hops else ()

    @property
    def final_evidence(self) -> RankedEvidence:
        return self.hops[-1].evidence if self.hops else RankedEvidence((), 0)


def augment_hyperlinks(evidence: RankedEvidence, corpus: Corpus) -> RankedEvidence:
    """Suffix each evidence text with its resolvable hyperlink anchors;
    identifiers are unchanged, dangling anchors are skipped."""
    entries = []
    for e in evidence.entries:
        anchors = [a for a in dict.fromkeys(e.hyperlinks) if corpus.has_title(a)]
        text = e.text + (" | links: " + " ; ".join(anchors) if anchors else "")
        entries.append(EvidenceEntry(e.identifier, e.doc_title, e.sent_index, text, e.score, e.hyperlinks))
    return RankedEvidence(entries=tuple(entries), l=evidence.l)


class ReferenceProver:
    """Sufficiency proof generation by lexical alignment (the in-repo stand-in
    for a neural proof generator)."""

    def __init__(self, lexicons: Sequence[natlog.Lexicon] = ()):
        self.lexicons = tuple(lexicons)

    def prove(self, claim_text: str, evidence: RankedEvidence, hop: int) -> Proof:
        return align_and_prove(claim_text, evidence, self.lexicons)


class WireProver:
    """External proof generator; entailment/cover operators in the returned
    proof are replaced with independence before the sufficiency rule runs,
    mirroring how such proofs are normalized for sufficiency prediction."""

    def __init__(self, client: ExternalProver):
        self.client = client

    def prove(self, claim_text: str, evidence: RankedEvidence, hop: int) -> Proof:
        text = self.client.prove_text(claim_text, evidence.entries, hop)
        try:
            proof = parse_proof(text)
        except natlog.ProofParseError as exc:
            raise TransportError(f"external prover returned an unparseable proof: {exc}") from exc
        mutations = tuple(
            natlog.Mutation(m.claim_span, m.evidence_span, natlog.NatOp.INDEPENDENCE)
            if m.op in natlog.EXTENDED_OPS
            else m
            for m in proof.mutations
        )
        return Proof(mutations=mutations)


class Pipeline:
    def __init__(
        self,
        corpus: Corpus,
        index: InvertedIndex,
        trie: DecoderTrie | None,
        config: PipelineConfig,
        scorer=None,
        reranker_client=None,
        prover=None,
        lexicons: Sequence[natlog.Lexicon] = (),
        initial_rankings: Mapping[str, Sequence[str]] | None = None,
    ):
        config.validate()
        self.corpus = corpus
        self.index = index
        self.trie = trie
        self.config = config
        self.lexicons = tuple(lexicons)
        self.initial_rankings = initial_rankings
        self._owned_backends: list[SubprocessBackend] = []

        if scorer is not None:
            self.scorer = scorer
        elif config.scorer_backend == "reference":
            self.scorer = fit_reference_scorer(corpus, config.scorer_lambda)
        else:
            self.scorer = ExternalScorer(self._spawn(config.scorer_backend))

        if reranker_client is not None:
            self.reranker_client = reranker_client
            self.reranker_backend = BACKEND_EXTERNAL
        elif config.reranker_backend == "reference":
            self.reranker_client = None
            self.reranker_backend = BACKEND_REFERENCE
        else:
            self.reranker_client = ExternalReranker(self._spawn(config.reranker_backend))
            self.reranker_backend = BACKEND_EXTERNAL

        if prover is not None:
            self.prover = prover
        elif config.prover_backend == "reference":
            self.prover = ReferenceProver(self.lexicons)
        else:
            self.prover = WireProver(
                ExternalProver(self._spawn(config.prover_backend), beam=config.proof_beam)
            )

    def _spawn(self, command: str) -> SubprocessBackend:
        backend = SubprocessBackend(command.split())
        self._owned_backends.append(backend)
        return backend

    def close(self):
        for backend in self._owned_backends:
            backend.close()

    def _initial_ranking(self, claim: Claim) -> list[tuple[str, float]]:
        if self.initial_rankings is not None:
            titles = list(self.initial_rankings.get(claim.claim_id, ()))[: self.config.k]
            return [(title, -float(rank)) for rank, title in enumerate(titles)]
        return bm25_rank(self.index, claim.text, self.config.k)

    def _rerank(self, claim: Claim, prior: RankedEvidence | None, doc_sets: Iterable[Iterable[str]], hop: int) -> RankedEvidence:
        evidence = rerank(
            claim.text,
            prior,
            doc_sets,
            self.corpus,
            self.config.l,
            backend=self.reranker_backend,
            external=self.reranker_client,
            hop=hop,
            k1=self.index.k1,
            b=self.index.b,
        )
        if self.config.hyperlinks:
            evidence = augment_hyperlinks(evidence, self.corpus)
        return evidence

    def run(self, claim: Claim) -> RetrievalResult:
        """Retrieve evidence for one claim; backend transport failures abort
        this claim with a structured error record and leave others alone."""
        cfg = self.config
        hops: list[HopState] = []
        try:
            initial = self._initial_ranking(claim)
            # at hop 1 the set score is the initial-retrieval score, not a log-probability
            doc_sets = tuple(DocSetScore(doc_set=(title,), logprob=score) for title, score in initial)
            ranked_docs = tuple(title for title, _ in initial)
            evidence = self._rerank(claim, None, [[t] for t, _ in initial], hop=1)
            t = 1
            while True:
                proof = self.prover.prove(claim.text, evidence, t)
                sufficiency = predict_sufficiency(proof)
                hops.append(HopState(t, doc_sets, ranked_docs, evidence, proof, sufficiency))
                if sufficiency == natlog.SUFFICIENT or t >= cfg.n_max:
                    break
                doc_sets, ranked_docs = self._next_hop(claim, evidence, ranked_docs, t)
                evidence = self._rerank(claim, evidence, [ds.doc_set for ds in doc_sets], hop=t + 1)
                t += 1
            return RetrievalResult(
                claim_id=claim.claim_id, hops=tuple(hops), n_dyn=len(hops), metadata=cfg.to_metadata()
            )
        except TransportError as exc:
            return RetrievalResult(
                claim_id=claim.claim_id,
                hops=tuple(hops),
                n_dyn=len(hops),
                metadata=cfg.to_metadata(),
                error={"type": "transport", "message": str(exc)},
            )

    def _next_hop(self, claim: Claim, evidence: RankedEvidence, ranked_docs: tuple[str, ...], t: int):
        cfg = self.config
        if self.trie is None or self.trie.n_titles == 0:
            return (), ()
        ctx = ScoringContext.from_evidence(
            claim.text, evidence, hop=t, hyperlinks_augmented=cfg.hyperlinks
        )
        out = decode_variant(
            cfg.variant,
            self.scorer,
            self.trie,
            ctx,
            t=min(t, len(evidence.entries)),
            beam_q=cfg.beam_q,
            k=cfg.k,
            prior_docs=ranked_docs,
        )
        new_ranked = list(out.ranked_docs)
        if cfg.retain_prior_docs:
            new_ranked += [d for d in ranked_docs if d not in set(new_ranked)]
        return out.doc_sets, tuple(new_ranked)

    def run_many(self, claims: Sequence[Claim], workers: int | None = None) -> list[RetrievalResult]:
        """Process claims on a bounded worker pool, preserving input order
        (which keeps output files byte-identical across worker counts)."""
        workers = workers if workers is not None else self.config.workers
        if workers == 0:
            workers = os.cpu_count() or 1
        if workers <= 1 or len(claims) <= 1:
            return [self.run(c) for c in claims]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.run, claims))


def run(claim: Claim, corpus: Corpus, index: InvertedIndex, trie: DecoderTrie | None, config: PipelineConfig) -> RetrievalResult:
    return Pipeline(corpus, index, trie, config).run(claim)


# ---------------------------------------------------------------------------
# Result records (one JSON line per claim; field order is canonicalized so
# identical runs produce byte-identical files)

def _evidence_record(evidence: RankedEvidence) -> list[dict]:
    return [
        {
            "identifier": e.identifier,
            "doc_title": e.doc_title,
            "sent_index": e.sent_index,
            "text": e.text,
            "score": e.score,
        }
        for e in evidence.entries
    ]


def result_to_record(result: RetrievalResult) -> dict:
    return {
        "claim_id": result.claim_id,
        "n_dyn": result.n_dyn,
        "final_docs": list(result.final_ranked_docs),
        "evidence": _evidence_record(result.final_evidence),
        "hops": [
            {
                "t": h.t,
                "doc_sets": [{"titles": list(ds.doc_set), "logprob": ds.logprob} for ds in h.doc_sets],
                "ranked_docs": list(h.ranked_docs),
                "evidence": _evidence_record(h.evidence),
                "proof": render_proof(h.proof) if h.proof is not None else None,
                "sufficiency": h.sufficiency,
            }
            for h in result.hops
        ],
        "error": result.error,
        "metadata": result.metadata,
    }


def write_results(results: Iterable[RetrievalResult], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for result in results:
            f.write(json.dumps(result_to_record(result), ensure_ascii=False, sort_keys=True) + "\n")


def read_result_records(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(json.loads(line))
    return records


def load_initial_rankings(path: str) -> dict[str, list[str]]:
    """Precomputed per-claim initial rankings: {claim_id, titles: [...]}
    per line; titles may also be [title, score] pairs (scores ignored)."""
    rankings: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                titles = [t[0] if isinstance(t, list) else str(t) for t in record["titles"]]
                rankings[str(record["claim_id"])] = titles
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed initial-ranking record: {exc}") from exc
    return rankings
