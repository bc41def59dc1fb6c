"""Summarization metrics (BLEU-n, ROUGE-L, METEOR-lite, CIDEr) and retrieval
metrics (MRR, nDCG, success rate at k).

All scores are reported in [0, 1]. BLEU is corpus-level (aggregate counts
with brevity penalty); ROUGE-L, METEOR and CIDEr are averaged per example.
METEOR here matches unigrams exactly (no stemming or synonym sets) with the
usual recall-weighted F-mean and fragmentation penalty. CIDEr averages
tf-idf cosine similarity over n-gram orders 1..4; the conventional x10
scaling is divided back out so the reported value stays in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# summarization metrics


def bleu_n(candidates, references, n: int) -> float:
    """Corpus BLEU with clipped precision over orders 1..n and brevity penalty."""
    candidates = [list(c) for c in candidates]
    references = [list(r) for r in references]
    if len(candidates) != len(references):
        raise ValueError(f"got {len(candidates)} candidates but {len(references)} references")
    if not references or any(len(r) == 0 for r in references):
        raise ValueError("references must be non-empty")
    log_precisions = []
    for order in range(1, n + 1):
        matches = 0
        total = 0
        for cand, ref in zip(candidates, references):
            cand_counts = _ngrams(cand, order)
            ref_counts = _ngrams(ref, order)
            matches += sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
            total += sum(cand_counts.values())
        if total == 0 or matches == 0:
            return 0.0
        log_precisions.append(math.log(matches / total))
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    if cand_len == 0:
        return 0.0
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(sum(log_precisions) / n)


def rouge_l(candidate, reference, beta: float = 1.2) -> float:
    """LCS-based F-measure with recall weight beta."""
    cand = list(candidate)
    ref = list(reference)
    if not cand or not ref:
        return 0.0
    # classic LCS dynamic program, rolling rows
    prev = [0] * (len(ref) + 1)
    for c_tok in cand:
        cur = [0] * (len(ref) + 1)
        for j, r_tok in enumerate(ref, start=1):
            cur[j] = prev[j - 1] + 1 if c_tok == r_tok else max(prev[j], cur[j - 1])
        prev = cur
    lcs = prev[-1]
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return ((1 + beta ** 2) * precision * recall) / (recall + beta ** 2 * precision)


def _align_unigrams(cand, ref) -> list[tuple[int, int]]:
    """Exact-match alignment of candidate to reference positions.

    Scans the candidate left to right, preferring the reference position that
    continues the current chunk, otherwise the leftmost free occurrence.
    """
    free: dict[str, list[int]] = {}
    for j, token in enumerate(ref):
        free.setdefault(token, []).append(j)
    pairs: list[tuple[int, int]] = []
    prev_ref = None
    for i, token in enumerate(cand):
        slots = free.get(token)
        if not slots:
            continue
        if prev_ref is not None and prev_ref + 1 in slots:
            j = prev_ref + 1
        else:
            j = slots[0]
        slots.remove(j)
        pairs.append((i, j))
        prev_ref = j
    return pairs


def meteor_lite(candidate, reference) -> float:
    """Exact-match METEOR: F-mean 10PR/(R+9P) times (1 - 0.5*(chunks/matches)^3)."""
    cand = list(candidate)
    ref = list(reference)
    if not cand or not ref:
        return 0.0
    pairs = _align_unigrams(cand, ref)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


def cider(candidates, references, n_max: int = 4) -> float:
    """Mean tf-idf cosine over n-gram orders, idf taken from the reference corpus."""
    candidates = [list(c) for c in candidates]
    references = [list(r) for r in references]
    if len(candidates) != len(references):
        raise ValueError(f"got {len(candidates)} candidates but {len(references)} references")
    if not candidates:
        raise ValueError("empty corpus")
    num_docs = len(references)
    doc_freq = []
    for order in range(1, n_max + 1):
        df: Counter = Counter()
        for ref in references:
            df.update(set(_ngrams(ref, order)))
        doc_freq.append(df)
    per_pair = []
    for cand, ref in zip(candidates, references):
        order_sims = []
        for order in range(1, n_max + 1):
            df = doc_freq[order - 1]
            cand_tf = _ngrams(cand, order)
            ref_tf = _ngrams(ref, order)
            # idf = log(N) - log(max(1, df)); unseen n-grams get the full log(N)
            def idf(g):
                return math.log(num_docs) - math.log(max(1.0, df[g]))

            cand_vec = {g: count * idf(g) for g, count in cand_tf.items()}
            ref_vec = {g: count * idf(g) for g, count in ref_tf.items()}
            dot = sum(w * ref_vec.get(g, 0.0) for g, w in cand_vec.items())
            cand_norm = math.sqrt(sum(w * w for w in cand_vec.values()))
            ref_norm = math.sqrt(sum(w * w for w in ref_vec.values()))
            order_sims.append(dot / (cand_norm * ref_norm) if cand_norm > 0 and ref_norm > 0 else 0.0)
        per_pair.append(sum(order_sims) / n_max)
    return sum(per_pair) / len(per_pair)


# ---------------------------------------------------------------------------
# retrieval metrics


@dataclass(frozen=True)
class RankResult:
    """One query's ranked candidate ids and the 1-based rank of its first hit."""

    query_id: str
    candidate_ids: tuple[str, ...]
    rank: int | None

    def __post_init__(self):
        if len(set(self.candidate_ids)) != len(self.candidate_ids):
            raise ValueError(f"query {self.query_id!r}: duplicate candidate ids")
        if self.rank is not None and not 1 <= self.rank <= len(self.candidate_ids):
            raise ValueError(f"query {self.query_id!r}: rank {self.rank} outside candidate list")


def mrr(results) -> float:
    results = list(results)
    if not results:
        raise ValueError("mrr of empty result list")
    return sum(1.0 / r.rank for r in results if r.rank is not None) / len(results)


def ndcg(results, relevant: dict[str, set[str]], k: int) -> float:
    """Binary-relevance nDCG at k, averaged over queries."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    results = list(results)
    if not results:
        raise ValueError("ndcg of empty result list")
    total = 0.0
    for r in results:
        rel = relevant.get(r.query_id, set())
        if not rel:
            continue
        dcg = sum(
            1.0 / math.log2(i + 1)
            for i, cand in enumerate(r.candidate_ids[:k], start=1)
            if cand in rel
        )
        idcg = sum(1.0 / math.log2(i + 1) for i in range(1, min(k, len(rel)) + 1))
        total += dcg / idcg
    return total / len(results)


def success_at_k(results, k: int) -> float:
    """Fraction of queries with at least one hit in the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    results = list(results)
    if not results:
        raise ValueError("success_at_k of empty result list")
    hits = sum(1 for r in results if r.rank is not None and r.rank <= k)
    return hits / len(results)


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    scores: dict[str, float]
    per_example: dict[str, list[float]] = field(default_factory=dict)

    def to_json(self) -> str:
        import json

        return json.dumps({"scores": self.scores}, indent=2, sort_keys=True)

    def breakdown_tsv(self, ids) -> str:
        names = sorted(self.per_example)
        lines = ["\t".join(["id"] + names)]
        for i, rid in enumerate(ids):
            lines.append("\t".join([rid] + [f"{self.per_example[name][i]:.6f}" for name in names]))
        return "\n".join(lines) + "\n"


def summarization_report(candidates, references) -> MetricReport:
    """BLEU-1, METEOR, ROUGE-L and CIDEr over aligned candidate/reference lists."""
    rouge_scores = [rouge_l(c, r) for c, r in zip(candidates, references)]
    meteor_scores = [meteor_lite(c, r) for c, r in zip(candidates, references)]
    scores = {
        "bleu_1": bleu_n(candidates, references, 1),
        "meteor": sum(meteor_scores) / len(meteor_scores),
        "rouge_l": sum(rouge_scores) / len(rouge_scores),
        "cider": cider(candidates, references),
    }
    return MetricReport(scores=scores, per_example={"rouge_l": rouge_scores, "meteor": meteor_scores})


def retrieval_report(results, relevant: dict[str, set[str]], k: int) -> MetricReport:
    scores = {
        "mrr": mrr(results),
        f"ndcg@{k}": ndcg(results, relevant, k),
        "sr@5": success_at_k(results, 5),
        "sr@10": success_at_k(results, 10),
        f"sr@{k}": success_at_k(results, k),
    }
    return MetricReport(scores=scores)
