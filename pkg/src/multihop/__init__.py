"""Multi-hop evidence retrieval for fact verification.

Retrieve-and-rerank with a trie-constrained autoregressive decoder that
scores evidence sentences and document titles jointly, and a natural-logic
proof system that ends the hop loop as soon as the retrieved evidence is
sufficient.
"""

from .beam_decoder import DocSetScore, ScoredSequence, aggregate, decode, decode_variant
from .corpus import Claim, Corpus, Document, Sentence, load_claims, load_corpus, save_corpus
from .decoder_trie import DecoderTrie, MarkupState, advance, allowed_tokens, build_trie
from .natlog import (
    INSUFFICIENT,
    SUFFICIENT,
    Lexicon,
    Mutation,
    NatOp,
    Proof,
    align_and_prove,
    parse_proof,
    predict_sufficiency,
    render_proof,
    repair_proof,
    span_similarity_reference,
)
from .pipeline import Pipeline, PipelineConfig, RetrievalResult
from .reranker import RankedEvidence, rerank
from .scorer import ReferenceScorer, ScoringContext, fit_reference_scorer
from .sparse_index import InvertedIndex, bm25_rank, build_index, tokenize

__version__ = "0.1.0"
