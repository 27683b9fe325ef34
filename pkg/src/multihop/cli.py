"""Operator entry point.

Subcommands: build-index, build-trie, pipeline, prove, check-sufficiency,
datagen, eval, footprint. Machine-readable output goes to files (or
stdout), progress goes to stderr. Exit status: 0 success, 1 input error,
2 backend/transport error. Configuration precedence is flags > config
file > defaults; the effective values are echoed into output metadata.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import datagen, evaluation
from .beam_decoder import MODES
from .corpus import CorpusError, load_claims, load_corpus
from .decoder_trie import build_trie, load_trie, save_trie, trie_footprint_bytes
from .natlog import (
    Lexicon,
    align_and_prove,
    load_lexicon,
    paraphrase,
    parse_proof,
    predict_sufficiency,
    render_proof,
)
from .pipeline import (
    Pipeline,
    PipelineConfig,
    load_initial_rankings,
    read_result_records,
    write_results,
)
from .reranker import EvidenceEntry, RankedEvidence
from .sparse_index import bm25_rank, build_index, index_footprint_bytes, load_index, save_index
from .wire import TransportError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_lexicons(paths) -> list[Lexicon]:
    return [load_lexicon(p) for p in paths or ()]


# ---------------------------------------------------------------------------
# pipeline config assembly: flags > config file > defaults

def _parse_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {field.name!r}: not a boolean: {raw!r}")
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw


def _build_config(args) -> PipelineConfig:
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    values = {}
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(fields[key], raw)
    for name in fields:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return PipelineConfig(**values)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_build_index(args) -> int:
    corpus = load_corpus(args.corpus)
    index = build_index(corpus, k1=args.k1, b=args.b)
    size = save_index(index, args.out)
    _log(f"indexed {index.doc_count} documents -> {args.out} ({size} bytes)")
    return 0


def _cmd_build_trie(args) -> int:
    corpus = load_corpus(args.corpus)
    trie = build_trie(corpus.titles())
    size = save_trie(trie, args.out)
    _log(f"trie over {trie.n_titles} titles ({trie.total_tokens} tokens) -> {args.out} ({size} bytes)")
    return 0


def _cmd_pipeline(args) -> int:
    config = _build_config(args)
    config.validate()
    corpus = load_corpus(args.corpus)
    index = load_index(args.index)
    trie = load_trie(args.trie) if args.trie else (build_trie(corpus.titles()) if len(corpus) else None)
    claims = load_claims(args.claims)
    lexicons = _load_lexicons(args.lexicon)
    initial = load_initial_rankings(args.initial_rankings) if args.initial_rankings else None
    pipe = Pipeline(corpus, index, trie, config, lexicons=lexicons, initial_rankings=initial)
    try:
        _log(f"running {len(claims)} claims (variant={config.variant}, n_max={config.n_max}, workers={config.workers})")
        results = pipe.run_many(claims)
        write_results(results, args.out)
    finally:
        pipe.close()
    failures = sum(1 for r in results if r.error)
    _log(f"wrote {len(results)} results -> {args.out} ({failures} claim errors)")
    return 2 if failures else 0


def _load_evidence_file(path: str, corpus) -> RankedEvidence:
    entries = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            title = record.get("doc_title", "")
            if "text" in record:
                text, idx = record["text"], int(record.get("sent_index", -1))
            else:
                if corpus is None:
                    raise ValueError(f"{path}:{lineno}: sentence reference needs --corpus")
                idx = int(record["sent_index"])
                sent = corpus.resolve_sentence(title, idx)
                if sent is None:
                    raise ValueError(f"{path}:{lineno}: ({title!r}, {idx}) not in corpus")
                text = sent.text
            entries.append(EvidenceEntry(f"E{len(entries) + 1}", title, idx, text, 0.0))
    return RankedEvidence(entries=tuple(entries), l=max(1, len(entries)))


def _cmd_prove(args) -> int:
    corpus = load_corpus(args.corpus) if args.corpus else None
    evidence = _load_evidence_file(args.evidence, corpus)
    lexicons = _load_lexicons(args.lexicon)
    proof = align_and_prove(args.claim, evidence, lexicons)
    decision = predict_sufficiency(proof)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8")
    try:
        out.write(f"proof = {render_proof(proof)}\n")
        out.write(f"sufficiency = {decision}\n")
        for i, m in enumerate(proof.mutations, start=1):
            out.write(f"mutation_{i} = {{ {m.claim_span} }} [ {m.evidence_span} ] : {paraphrase(m.op)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_check_sufficiency(args) -> int:
    if args.proof_file:
        with open(args.proof_file, encoding="utf-8") as f:
            text = f.read()
    else:
        text = args.proof
    proof = parse_proof(text)
    print(predict_sufficiency(proof))
    return 0


def _cmd_datagen(args) -> int:
    corpus = load_corpus(args.corpus)
    claims = load_claims(args.claims)
    if args.kind == "hop":
        if args.candidates:
            candidates = load_initial_rankings(args.candidates)
        elif args.index:
            index = load_index(args.index)
            candidates = {
                c.claim_id: [t for t, _ in bm25_rank(index, c.text, args.k)] for c in claims
            }
        else:
            raise ValueError("datagen --kind hop needs --candidates or --index")
        records = datagen.make_hop_examples(
            claims, args.hop, args.l, corpus, candidates, seed=args.seed, ordered=not args.unordered
        )
    else:
        lexicons = _load_lexicons(args.lexicon)
        records = datagen.make_sufficiency_pairs(claims, corpus, lexicons)
    datagen.write_records(records, args.out)
    _log(f"wrote {len(records)} {args.kind} records -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    records = read_result_records(args.results)
    claims = load_claims(args.claims)
    report = evaluation.metrics_report(records, claims, k=args.k)
    text = evaluation.render_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        _log(f"report -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_footprint(args) -> int:
    total = 0
    if args.index:
        size = index_footprint_bytes(args.index)
        total += size
        print(f"index_bytes = {size}")
    if args.trie:
        size = trie_footprint_bytes(args.trie)
        total += size
        print(f"trie_bytes = {size}")
    print(f"total_bytes = {total}")
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="multihop", description="Multi-hop evidence retrieval for fact verification")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-index", help="build the BM25 inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=0.6)
    p.add_argument("--b", type=float, default=0.4)
    p.set_defaults(func=_cmd_build_index)

    p = sub.add_parser("build-trie", help="build the title prefix trie")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_trie)

    p = sub.add_parser("pipeline", help="run retrieval over a claims file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--trie")
    p.add_argument("--claims", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value file with PipelineConfig fields")
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--beam-q", dest="beam_q", type=int)
    p.add_argument("--proof-beam", dest="proof_beam", type=int)
    p.add_argument("--variant", choices=MODES)
    p.add_argument("--hyperlinks", action="store_const", const=True, default=None)
    p.add_argument("--retain-prior-docs", dest="retain_prior_docs", action="store_const", const=True, default=None)
    p.add_argument("--scorer-cmd", dest="scorer_backend")
    p.add_argument("--reranker-cmd", dest="reranker_backend")
    p.add_argument("--prover-cmd", dest="prover_backend")
    p.add_argument("--scorer-lambda", dest="scorer_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--initial-rankings", help="precomputed D_1 file (claim_id -> ranked titles)")
    p.add_argument("--lexicon", action="append")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("prove", help="generate a sufficiency proof for one claim")
    p.add_argument("--claim", required=True)
    p.add_argument("--evidence", required=True, help="JSONL: {doc_title, text} or {doc_title, sent_index}")
    p.add_argument("--corpus")
    p.add_argument("--lexicon", action="append")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_prove)

    p = sub.add_parser("check-sufficiency", help="classify a rendered proof")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--proof")
    group.add_argument("--proof-file")
    p.set_defaults(func=_cmd_check_sufficiency)

    p = sub.add_parser("datagen", help="emit training files for external backends")
    p.add_argument("--kind", choices=("hop", "sufficiency"), required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hop", type=int, default=2)
    p.add_argument("--l", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10, help="candidate documents per claim when using --index")
    p.add_argument("--index")
    p.add_argument("--candidates", help="precomputed candidate ranking file")
    p.add_argument("--unordered", action="store_true", help="emit one record per held-out gold sentence")
    p.add_argument("--lexicon", action="append")
    p.set_defaults(func=_cmd_datagen)

    p = sub.add_parser("eval", help="score a result file against gold claims")
    p.add_argument("--results", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("footprint", help="report persisted component sizes in bytes")
    p.add_argument("--index")
    p.add_argument("--trie")
    p.set_defaults(func=_cmd_footprint)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except TransportError as exc:
        _log(f"transport error: {exc}")
        return 2
    except (CorpusError, ValueError, OSError, json.JSONDecodeError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
