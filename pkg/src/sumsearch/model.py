"""The full summarizer: both encoders, the decoder, and persistence.

A model owns a code-side encoder stack (driven through the statement tree), a
natural-language encoder stack (shared by comment prefixes, generated
comments, and queries), the decoder parameters, and the two vocabularies.
Weights persist in the binary checkpoint format of :mod:`.autodiff`;
vocabularies and dimensions ride along as JSON sidecar files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import decoder as dec
from . import encoder as enc
from .config import TrainConfig
from .corpus import Vocab
from .indent_tree import build_tree
from .tokenizer import tokenize_code, tokenize_nl

CHECKPOINT_NAME = "checkpoint.bin"
CODE_VOCAB_NAME = "vocab_code.json"
NL_VOCAB_NAME = "vocab_nl.json"
CONFIG_NAME = "config.json"


class Summarizer:
    """Encoder-decoder comment generator over indent trees."""

    def __init__(self, code_vocab: Vocab, nl_vocab: Vocab, cfg: TrainConfig, rng: np.random.Generator):
        self.code_vocab = code_vocab
        self.nl_vocab = nl_vocab
        self.cfg = cfg
        self.code_enc = enc.init_stack(
            len(code_vocab), cfg.d_model, cfg.heads, cfg.layers, cfg.d_ff, cfg.max_seq_len, rng
        )
        self.nl_enc = enc.init_stack(
            len(nl_vocab), cfg.d_model, cfg.heads, cfg.layers, cfg.d_ff, cfg.max_seq_len, rng
        )
        self.dec, self.proj = dec.init_params(cfg.d_model, len(nl_vocab), rng)

    # -- parameter access ---------------------------------------------------

    def params(self) -> dict[str, ad.DiffArray]:
        out = enc.stack_params(self.code_enc, "actor.code")
        out.update(enc.stack_params(self.nl_enc, "actor.nl"))
        out.update(dec.decoder_params(self.dec, self.proj))
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.values.copy() for name, p in self.params().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        params = self.params()
        for name, values in snapshot.items():
            target = params[name]
            if target.values.shape != values.shape:
                raise ValueError(f"shape mismatch for {name}: {target.values.shape} vs {values.shape}")
            target.values = np.asarray(values, dtype=ad.default_dtype()).copy()
            target.grad = None

    # -- encoding and generation --------------------------------------------

    def encode_code(self, code_text: str) -> enc.SeqEncoding:
        return enc.encode_tree(build_tree(code_text), self.code_enc, self.code_vocab)

    def encode_nl(self, tokens) -> enc.SeqEncoding:
        return enc.encode_sequence(tokens, self.nl_enc, self.nl_vocab)

    def generate_ids(self, code_repr: ad.DiffArray, cfg: dec.DecodeConfig | None = None, rng_seed: int = 0) -> list[int]:
        cfg = cfg or dec.DecodeConfig(max_steps=self.cfg.max_decode_steps)
        return dec.generate(code_repr, self.dec, self.proj, self.nl_enc, cfg, rng_seed)

    def comment_tokens(self, ids) -> list[str]:
        return [self.nl_vocab.token_for(i) for i in ids]

    def summarize(self, code_text: str, cfg: dec.DecodeConfig | None = None, rng_seed: int = 0) -> str:
        """Tree-encode a snippet and decode a comment (greedy by default)."""
        pooled = self.encode_code(code_text).pooled
        ids = self.generate_ids(pooled, cfg, rng_seed)
        return " ".join(self.comment_tokens(ids))

    # -- persistence ---------------------------------------------------------

    def save(self, out_dir, extra_arrays: dict[str, np.ndarray] | None = None) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        arrays = self.snapshot()
        if extra_arrays:
            arrays.update(extra_arrays)
        ad.save_arrays(out / CHECKPOINT_NAME, arrays)
        (out / CODE_VOCAB_NAME).write_text(self.code_vocab.to_json(), encoding="utf-8")
        (out / NL_VOCAB_NAME).write_text(self.nl_vocab.to_json(), encoding="utf-8")
        (out / CONFIG_NAME).write_text(self.cfg.to_json(), encoding="utf-8")
        return out / CHECKPOINT_NAME

    @classmethod
    def load(cls, checkpoint_path) -> tuple["Summarizer", dict[str, np.ndarray]]:
        """Load a model from a checkpoint file or its directory.

        Returns the model plus any non-actor arrays found in the checkpoint
        (e.g. the critic head), keyed by their stored names.
        """
        path = Path(checkpoint_path)
        run_dir = path if path.is_dir() else path.parent
        ckpt = run_dir / CHECKPOINT_NAME
        if not ckpt.exists():
            raise FileNotFoundError(f"no checkpoint found at {ckpt}")
        cfg = TrainConfig.from_json((run_dir / CONFIG_NAME).read_text(encoding="utf-8"))
        code_vocab = Vocab.from_json((run_dir / CODE_VOCAB_NAME).read_text(encoding="utf-8"))
        nl_vocab = Vocab.from_json((run_dir / NL_VOCAB_NAME).read_text(encoding="utf-8"))
        model = cls(code_vocab, nl_vocab, cfg, np.random.default_rng(cfg.seed))
        arrays = ad.load_arrays(ckpt)
        actor = {k: v for k, v in arrays.items() if k.startswith("actor.")}
        rest = {k: v for k, v in arrays.items() if not k.startswith("actor.")}
        model.restore(actor)
        return model, rest


def build_vocabs(pairs, cfg: TrainConfig) -> tuple[Vocab, Vocab]:
    """Code and comment vocabularies from a training pair set."""
    from .corpus import build_vocab

    code_seqs = [tokenize_code(p.code) for p in pairs]
    nl_seqs = [tokenize_nl(p.comment) for p in pairs]
    code_vocab = build_vocab(code_seqs, cfg.vocab_max, cfg.vocab_min_freq)
    nl_vocab = build_vocab(nl_seqs, cfg.vocab_max, cfg.vocab_min_freq)
    return code_vocab, nl_vocab
