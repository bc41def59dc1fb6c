"""Corpus ingestion, deterministic splitting, and vocabulary construction.

The on-disk corpus format is UTF-8 JSONL: one object per line with string
fields "code" and "comment" plus an optional "id". Records without an id get
their 1-based line number as a decimal string.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from collections import Counter

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid pair data."""


@dataclass(frozen=True)
class CodeCommentPair:
    """One code snippet with its reference comment."""

    id: str
    code: str
    comment: str

    def __post_init__(self):
        if not self.code.strip():
            raise CorpusError(f"pair {self.id!r}: empty code")
        if not self.comment.strip():
            raise CorpusError(f"pair {self.id!r}: empty comment")


@dataclass(frozen=True)
class PairSet:
    """An ordered collection of pairs with unique ids."""

    pairs: tuple[CodeCommentPair, ...]

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate pair ids: {dupes[:5]}")

    @property
    def size(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]


def load_corpus(path) -> PairSet:
    """Read a JSONL corpus file, validating every line."""
    pairs: list[CodeCommentPair] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"line {lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(record, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            for key in ("code", "comment"):
                if key not in record:
                    raise CorpusError(f"line {lineno}: missing field {key}")
                if not isinstance(record[key], str):
                    raise CorpusError(f"line {lineno}: field {key} must be a string")
            pair_id = record.get("id", str(lineno))
            if not isinstance(pair_id, str):
                raise CorpusError(f"line {lineno}: field id must be a string")
            try:
                pairs.append(CodeCommentPair(id=pair_id, code=record["code"], comment=record["comment"]))
            except CorpusError as e:
                raise CorpusError(f"line {lineno}: {e}") from None
    if not pairs:
        raise CorpusError(f"{path}: empty corpus")
    return PairSet(tuple(pairs))


def split_corpus(pairs: PairSet, seed: int) -> tuple[PairSet, PairSet, PairSet]:
    """Deterministic shuffle, then a contiguous 60/20/20 split.

    Train and validation sizes are floored; the remainder goes to test.
    """
    n = pairs.size
    if n < 5:
        raise CorpusError(f"need at least 5 pairs to split, got {n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    shuffled = [pairs[i] for i in order]
    n_train = int(n * 0.6)
    n_val = int(n * 0.2)
    train = PairSet(tuple(shuffled[:n_train]))
    val = PairSet(tuple(shuffled[n_train:n_train + n_val]))
    test = PairSet(tuple(shuffled[n_train + n_val:]))
    return train, val, test


@dataclass
class Vocab:
    """Token/id bijection with four reserved entries (pad, unk, bos, eos)."""

    token_to_id: dict[str, int] = field(default_factory=dict)
    id_to_token: list[str] = field(default_factory=lambda: list(RESERVED_TOKENS))
    max_size: int = 8192
    min_freq: int = 1

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token_for(self, idx: int) -> str:
        return self.id_to_token[idx]

    def to_json(self) -> str:
        return json.dumps(
            {"tokens": self.id_to_token[len(RESERVED_TOKENS):], "max_size": self.max_size, "min_freq": self.min_freq}
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        data = json.loads(text)
        vocab = cls(max_size=data["max_size"], min_freq=data["min_freq"])
        for token in data["tokens"]:
            vocab.token_to_id[token] = len(vocab.id_to_token)
            vocab.id_to_token.append(token)
        return vocab


def build_vocab(token_seqs, max_size: int = 8192, min_freq: int = 1) -> Vocab:
    """Rank tokens by (frequency desc, token asc) and keep the top max_size - 4."""
    if max_size <= len(RESERVED_TOKENS):
        raise ValueError(f"max_size must exceed {len(RESERVED_TOKENS)}, got {max_size}")
    counts: Counter[str] = Counter()
    for seq in token_seqs:
        counts.update(seq)
    ranked = sorted(
        (t for t, c in counts.items() if c >= min_freq),
        key=lambda t: (-counts[t], t),
    )
    vocab = Vocab(max_size=max_size, min_freq=min_freq)
    for token in ranked[: max_size - len(RESERVED_TOKENS)]:
        vocab.token_to_id[token] = len(vocab.id_to_token)
        vocab.id_to_token.append(token)
    return vocab


def encode_ids(seq, vocab: Vocab, add_bos_eos: bool = False) -> list[int]:
    """Map tokens to ids, UNK for out-of-vocabulary ones."""
    ids = [vocab.id_for(t) for t in seq]
    if add_bos_eos:
        return [BOS] + ids + [EOS]
    return ids


def decode_ids(ids, vocab: Vocab) -> list[str]:
    return [vocab.token_for(i) for i in ids]
