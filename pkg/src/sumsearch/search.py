"""Comment-augmented code retrieval.

Every indexed snippet carries two unit-comparable vectors: the tree-encoded
code vector and the encoding of the comment the summarizer generated for it.
A query is encoded with the natural-language encoder and scored against each
entry by the convex combination beta * cos(query, code) +
(1 - beta) * cos(query, comment). Encoders stay frozen; only beta is fitted,
by an MRR grid search on validation queries.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .decoder import DecodeConfig
from .indent_tree import IndentTreeError
from .metrics import RankResult
from .model import Summarizer
from .tokenizer import tokenize_nl

log = logging.getLogger(__name__)

MANIFEST_NAME = "index.json"
VECTORS_NAME = "index_vectors.bin"

BETA_GRID = [round(i * 0.05, 2) for i in range(21)]


@dataclass
class SearchConfig:
    beta: float = 0.5
    top_k: int = 10

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class IndexEntry:
    code_vec: np.ndarray  # 1 x d_model
    comment_vec: np.ndarray  # 1 x d_model
    code_text: str
    comment_text: str


@dataclass
class SearchIndex:
    entries: dict[str, IndexEntry] = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return sorted(self.entries)


@dataclass
class RankedResults:
    """(snippet id, score) pairs in descending score order, ties by id."""

    hits: list[tuple[str, float]]

    def ids(self) -> list[str]:
        return [h[0] for h in self.hits]


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine of a zero vector")
    return float(u @ v / (nu * nv))


def build_index(snippets, model: Summarizer, rng_seed: int = 0) -> SearchIndex:
    """Encode each (id, code) snippet and the comment generated for it.

    Snippets whose statement tree cannot be built are skipped with a warning
    and recorded in the index manifest. A generated comment may be empty; it
    is indexed as a single unknown-token placeholder so its vector is usable.
    """
    index = SearchIndex()
    decode_cfg = DecodeConfig(max_steps=model.cfg.max_decode_steps)
    for snippet_id, code_text in snippets:
        try:
            code_vec = model.encode_code(code_text).pooled.values.copy()
        except IndentTreeError as e:
            log.warning("skipping snippet %s: %s", snippet_id, e)
            index.skipped.append({"id": snippet_id, "reason": str(e)})
            continue
        ids = model.generate_ids(ad.constant(code_vec), decode_cfg, rng_seed)
        comment_tokens = model.comment_tokens(ids)
        comment_text = " ".join(comment_tokens)
        comment_vec = model.encode_nl(comment_tokens or ["<unk>"]).pooled.values.copy()
        index.entries[snippet_id] = IndexEntry(
            code_vec=code_vec,
            comment_vec=comment_vec,
            code_text=code_text,
            comment_text=comment_text,
        )
    return index


def _entry_score(query_vec: np.ndarray, entry: IndexEntry, beta: float) -> float:
    return beta * cosine(query_vec, entry.code_vec) + (1.0 - beta) * cosine(query_vec, entry.comment_vec)


def score(query, entry: IndexEntry, cfg: SearchConfig, model: Summarizer) -> float:
    """Weighted similarity of one query against one index entry."""
    query_vec = model.encode_nl(query).pooled.values
    return _entry_score(query_vec, entry, cfg.beta)


def rank(query, index: SearchIndex, cfg: SearchConfig, model: Summarizer) -> RankedResults:
    """Score every entry, sort descending (ties by ascending id), keep top_k."""
    if len(index) == 0:
        raise ValueError("cannot rank against an empty index")
    query_vec = model.encode_nl(query).pooled.values
    scored = [
        (snippet_id, _entry_score(query_vec, index.entries[snippet_id], cfg.beta))
        for snippet_id in index.ids()
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RankedResults(hits=scored[: cfg.top_k])


def rank_result(query_id: str, relevant_id: str, ranked: RankedResults) -> RankResult:
    ids = tuple(ranked.ids())
    position = ids.index(relevant_id) + 1 if relevant_id in ids else None
    return RankResult(query_id=query_id, candidate_ids=ids, rank=position)


def _similarity_table(queries, index: SearchIndex, model: Summarizer):
    """Precomputed (code_sims, comment_sims) per query for fast beta sweeps."""
    ids = index.ids()
    table = []
    for tokens, relevant_id in queries:
        qv = model.encode_nl(tokens).pooled.values
        code_sims = np.array([cosine(qv, index.entries[i].code_vec) for i in ids])
        comment_sims = np.array([cosine(qv, index.entries[i].comment_vec) for i in ids])
        table.append((code_sims, comment_sims, relevant_id))
    return ids, table


def _mrr_for_beta(ids, table, beta: float) -> float:
    total = 0.0
    for code_sims, comment_sims, relevant_id in table:
        scores = beta * code_sims + (1.0 - beta) * comment_sims
        order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
        position = next((r for r, j in enumerate(order, start=1) if ids[j] == relevant_id), None)
        if position is not None:
            total += 1.0 / position
    return total / len(table)


def tune_beta(queries, index: SearchIndex, model: Summarizer) -> tuple[float, dict[float, float]]:
    """Grid-search beta in steps of 0.05, maximizing validation MRR (ties: smaller beta).

    ``queries`` is a sequence of (token sequence, relevant snippet id).
    Returns the winner and the full beta -> MRR map.
    """
    queries = list(queries)
    if not queries:
        raise ValueError("tune_beta needs at least one query")
    if len(index) == 0:
        raise ValueError("cannot tune beta on an empty index")
    ids, table = _similarity_table(queries, index, model)
    sweep = {beta: _mrr_for_beta(ids, table, beta) for beta in BETA_GRID}
    best = max(BETA_GRID, key=lambda b: (sweep[b], -b))
    return best, sweep


def pairwise_satisfaction(queries, index: SearchIndex, cfg: SearchConfig, model: Summarizer) -> float:
    """Fraction of (query, other-snippet) pairs where the paired snippet outscores the other."""
    queries = list(queries)
    ids, table = _similarity_table(queries, index, model)
    satisfied = 0
    total = 0
    for code_sims, comment_sims, relevant_id in table:
        scores = cfg.beta * code_sims + (1.0 - cfg.beta) * comment_sims
        rel_pos = ids.index(relevant_id)
        for j in range(len(ids)):
            if j == rel_pos:
                continue
            total += 1
            if scores[rel_pos] > scores[j]:
                satisfied += 1
    return satisfied / total if total else 1.0


def save_index(index: SearchIndex, out_dir, beta: float | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "beta": beta,
        "ids": index.ids(),
        "comments": {i: index.entries[i].comment_text for i in index.ids()},
        "codes": {i: index.entries[i].code_text for i in index.ids()},
        "skipped": index.skipped,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    arrays = {}
    for snippet_id in index.ids():
        arrays[f"code.{snippet_id}"] = index.entries[snippet_id].code_vec
        arrays[f"comment.{snippet_id}"] = index.entries[snippet_id].comment_vec
    ad.save_arrays(out / VECTORS_NAME, arrays)


def load_index(in_dir) -> tuple[SearchIndex, float | None]:
    src = Path(in_dir)
    manifest = json.loads((src / MANIFEST_NAME).read_text(encoding="utf-8"))
    arrays = ad.load_arrays(src / VECTORS_NAME)
    index = SearchIndex(skipped=manifest.get("skipped", []))
    for snippet_id in manifest["ids"]:
        index.entries[snippet_id] = IndexEntry(
            code_vec=arrays[f"code.{snippet_id}"],
            comment_vec=arrays[f"comment.{snippet_id}"],
            code_text=manifest["codes"][snippet_id],
            comment_text=manifest["comments"][snippet_id],
        )
    return index, manifest.get("beta")
