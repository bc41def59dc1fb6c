"""Symbol-based code tokenization and whitespace-based natural-language tokenization.

Code text is split at a fixed symbol set plus whitespace. Delimiters that
carry meaning (operators, brackets, punctuation) survive as one-character
tokens; whitespace, underscores and quote characters are dropped, so
``target_dicts`` becomes ``target`` ``dicts`` and string delimiters vanish.
Natural language splits on whitespace runs with trailing sentence
punctuation stripped. Both tokenizers lowercase and never raise.
"""

from __future__ import annotations

from dataclasses import dataclass

CODE = "code"
NL = "nl"

# Characters that always split code text. The ones in _DROPPED are removed
# entirely; the rest are kept as single-character tokens.
SPLIT_CHARS = frozenset('.,"\':*()!-_')
_DROPPED = frozenset("_\"'")
_NL_TRAILING = ".,!?"


@dataclass(frozen=True)
class TokenSeq:
    """An ordered token sequence tagged as code or natural language."""

    tokens: tuple[str, ...]
    kind: str = CODE

    def __post_init__(self):
        if self.kind not in (CODE, NL):
            raise ValueError(f"kind must be {CODE!r} or {NL!r}, got {self.kind!r}")

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]


def tokenize_code(text: str) -> TokenSeq:
    """Split source text into lowercase tokens at the symbol set and whitespace."""
    tokens: list[str] = []
    word: list[str] = []

    def flush():
        if word:
            tokens.append("".join(word))
            word.clear()

    for ch in text:
        if ch.isspace():
            flush()
        elif ch in SPLIT_CHARS:
            flush()
            if ch not in _DROPPED:
                tokens.append(ch)
        else:
            word.append(ch.lower())
    flush()
    return TokenSeq(tuple(tokens), CODE)


def tokenize_nl(text: str) -> TokenSeq:
    """Split a comment or query on whitespace runs, lowercased, trailing .,!? stripped."""
    tokens = []
    for piece in text.split():
        stripped = piece.lower().rstrip(_NL_TRAILING)
        if stripped:
            tokens.append(stripped)
    return TokenSeq(tuple(tokens), NL)
