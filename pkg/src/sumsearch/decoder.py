"""Step-wise comment generation over a pooled code representation.

The generator carries a running state vector. It starts as an affine
projection of the code vector; after each emitted token the full prefix is
re-encoded by the natural-language encoder and the state is refreshed from
the concatenation [previous state, prefix encoding, code vector] through an
affine map with tanh. Re-encoding the prefix every step is quadratic in
output length, which is acceptable at the step caps used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .corpus import BOS, EOS
from .encoder import EncoderStack, encode_id_matrix

GREEDY = "greedy"
SAMPLE = "sample"


@dataclass
class OutputProjection:
    """Affine map from the state vector to comment-vocabulary logits."""

    w: DiffArray  # d_state x vocab
    b: DiffArray  # 1 x vocab


@dataclass
class DecoderParams:
    w_init: DiffArray  # d_model x d_state
    b_init: DiffArray  # 1 x d_state
    w_step: DiffArray  # 3*d_state x d_state
    b_step: DiffArray  # 1 x d_state


@dataclass
class DecodeConfig:
    max_steps: int = 30
    mode: str = GREEDY
    temperature: float = 1.0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.mode not in (GREEDY, SAMPLE):
            raise ValueError(f"mode must be {GREEDY!r} or {SAMPLE!r}, got {self.mode!r}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass
class DecodeState:
    """Generation state: the code vector, the emitted prefix, and the hidden vector."""

    code_repr: DiffArray  # 1 x d_model
    hidden: DiffArray  # 1 x d_state
    prefix_ids: tuple[int, ...] = ()
    t: int = 1
    terminal: bool = False


def init_params(d_model: int, vocab_size: int, rng: np.random.Generator) -> tuple[DecoderParams, OutputProjection]:
    from .encoder import _glorot

    dec = DecoderParams(
        w_init=ad.parameter(_glorot(rng, d_model, d_model)),
        b_init=ad.parameter(np.zeros((1, d_model))),
        w_step=ad.parameter(_glorot(rng, 3 * d_model, d_model)),
        b_step=ad.parameter(np.zeros((1, d_model))),
    )
    proj = OutputProjection(
        w=ad.parameter(_glorot(rng, d_model, vocab_size)),
        b=ad.parameter(np.zeros((1, vocab_size))),
    )
    return dec, proj


def decoder_params(dec: DecoderParams, proj: OutputProjection) -> dict[str, DiffArray]:
    return {
        "actor.dec.w_init": dec.w_init,
        "actor.dec.b_init": dec.b_init,
        "actor.dec.w_step": dec.w_step,
        "actor.dec.b_step": dec.b_step,
        "actor.dec.w_out": proj.w,
        "actor.dec.b_out": proj.b,
    }


def init_state(code_repr: DiffArray, dec: DecoderParams) -> DecodeState:
    hidden = ad.add(ad.matmul(code_repr, dec.w_init), dec.b_init)
    return DecodeState(code_repr=code_repr, hidden=hidden)


def logits(state: DecodeState, proj: OutputProjection) -> DiffArray:
    return ad.add(ad.matmul(state.hidden, proj.w), proj.b)


def next_distribution(state: DecodeState, proj: OutputProjection) -> DiffArray:
    """Probability row over the comment vocabulary for the next token."""
    return ad.softmax_rows(logits(state, proj))


def advance(state: DecodeState, token_id: int, dec: DecoderParams, nl_stack: EncoderStack) -> DecodeState:
    """Append a token and refresh the hidden state from the re-encoded prefix."""
    vocab_size = nl_stack.embedding.shape[0]
    if not 0 <= token_id < vocab_size:
        raise ValueError(f"token id {token_id} out of range for vocab of {vocab_size}")
    prefix = state.prefix_ids + (token_id,)
    prefix_vec = ad.mean_rows(encode_id_matrix(prefix[-nl_stack.max_len:], nl_stack))
    joined = ad.concat_cols([state.hidden, prefix_vec, state.code_repr])
    hidden = ad.tanh(ad.add(ad.matmul(joined, dec.w_step), dec.b_step))
    return replace(
        state,
        hidden=hidden,
        prefix_ids=prefix,
        t=state.t + 1,
        terminal=state.terminal or token_id == EOS,
    )


def _sample_id(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs.astype(np.float64))
    cdf /= cdf[-1]
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(cdf) - 1))


def generate(
    code_repr: DiffArray,
    dec: DecoderParams,
    proj: OutputProjection,
    nl_stack: EncoderStack,
    cfg: DecodeConfig,
    rng_seed: int = 0,
) -> list[int]:
    """Emit up to max_steps token ids; stops at EOS. BOS/EOS never appear in the output."""
    rng = np.random.default_rng(rng_seed)
    state = init_state(code_repr, dec)
    out: list[int] = []
    for _ in range(cfg.max_steps):
        z = logits(state, proj)
        if cfg.mode == GREEDY:
            token = int(np.argmax(z.values[0]))  # argmax takes the smallest id on ties
        else:
            scaled = z.values[0] / cfg.temperature
            shifted = np.exp(scaled - scaled.max())
            token = _sample_id(shifted / shifted.sum(), rng)
        if token == EOS:
            break
        if token != BOS:
            out.append(token)
        state = advance(state, token, dec, nl_stack)
    return out


def reference_log_likelihood(
    code_repr: DiffArray,
    target_ids: list[int],
    dec: DecoderParams,
    proj: OutputProjection,
    nl_stack: EncoderStack,
) -> DiffArray:
    """Sum of teacher-forced log-probabilities of the target ids (EOS included)."""
    if not target_ids:
        raise ValueError("empty target sequence")
    state = init_state(code_repr, dec)
    total = None
    for target in target_ids:
        logp_row = ad.log_softmax_rows(logits(state, proj))
        onehot = np.zeros((1, proj.w.shape[1]))
        onehot[0, target] = 1.0
        picked = ad.sum_all(ad.mul(logp_row, ad.constant(onehot)))
        total = picked if total is None else ad.add(total, picked)
        if target != EOS:
            state = advance(state, target, dec, nl_stack)
    return total
