"""Sequence and tree encoders built on multi-head self-attention.

The sequence encoder is the standard stack: token embedding plus sinusoidal
positions, then N layers of (self-attention, feed-forward), each wrapped in a
residual connection and layer norm. The tree encoder runs the same stack
twice over: once per statement, then bottom-up over each internal node's
vector list (its own statement vector followed by its children's vectors),
so shallow statements absorb the summaries of their nested blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .corpus import UNK, Vocab, encode_ids
from .indent_tree import IndentTree, postorder_schedule
from .tokenizer import tokenize_code


@dataclass
class AttentionParams:
    """Per-head projections plus the shared output projection."""

    w_q: list[DiffArray]  # each d_model x d_k
    w_k: list[DiffArray]
    w_v: list[DiffArray]
    w_o: DiffArray  # d_model x d_model

    @property
    def heads(self) -> int:
        return len(self.w_q)

    @property
    def d_k(self) -> int:
        return self.w_q[0].shape[1]


@dataclass
class EncoderLayer:
    attn: AttentionParams
    ffn_w1: DiffArray
    ffn_b1: DiffArray
    ffn_w2: DiffArray
    ffn_b2: DiffArray
    ln1_gain: DiffArray
    ln1_bias: DiffArray
    ln2_gain: DiffArray
    ln2_bias: DiffArray


@dataclass
class EncoderStack:
    embedding: DiffArray  # vocab x d_model
    pos_table: np.ndarray  # max_len x d_model, constant
    layers: list[EncoderLayer]
    ln_eps: float = 1e-5

    @property
    def d_model(self) -> int:
        return self.embedding.shape[1]

    @property
    def max_len(self) -> int:
        return self.pos_table.shape[0]


@dataclass
class SeqEncoding:
    """Contextual token rows plus their row-mean pooled summary."""

    token_matrix: DiffArray  # L x d_model
    pooled: DiffArray  # 1 x d_model


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def sinusoid_table(max_len: int, d_model: int) -> np.ndarray:
    """Positions encoded as interleaved sin/cos at geometrically spaced frequencies."""
    table = np.zeros((max_len, d_model))
    position = np.arange(max_len)[:, None]
    div = np.exp(np.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div[: d_model // 2])
    return table


def init_attention(d_model: int, heads: int, rng: np.random.Generator) -> AttentionParams:
    if d_model % heads != 0:
        raise ValueError(f"d_model {d_model} not divisible by head count {heads}")
    d_k = d_model // heads
    return AttentionParams(
        w_q=[ad.parameter(_glorot(rng, d_model, d_k)) for _ in range(heads)],
        w_k=[ad.parameter(_glorot(rng, d_model, d_k)) for _ in range(heads)],
        w_v=[ad.parameter(_glorot(rng, d_model, d_k)) for _ in range(heads)],
        w_o=ad.parameter(_glorot(rng, d_model, d_model)),
    )


def init_layer(d_model: int, heads: int, d_ff: int, rng: np.random.Generator) -> EncoderLayer:
    return EncoderLayer(
        attn=init_attention(d_model, heads, rng),
        ffn_w1=ad.parameter(_glorot(rng, d_model, d_ff)),
        ffn_b1=ad.parameter(np.zeros((1, d_ff))),
        ffn_w2=ad.parameter(_glorot(rng, d_ff, d_model)),
        ffn_b2=ad.parameter(np.zeros((1, d_model))),
        ln1_gain=ad.parameter(np.ones((1, d_model))),
        ln1_bias=ad.parameter(np.zeros((1, d_model))),
        ln2_gain=ad.parameter(np.ones((1, d_model))),
        ln2_bias=ad.parameter(np.zeros((1, d_model))),
    )


def init_stack(
    vocab_size: int,
    d_model: int,
    heads: int,
    n_layers: int,
    d_ff: int,
    max_len: int,
    rng: np.random.Generator,
) -> EncoderStack:
    # unit-variance embeddings keep token content comparable to the positional
    # signal (norm ~sqrt(d/2)); smaller scales drown identity in position
    return EncoderStack(
        embedding=ad.parameter(rng.normal(0.0, 1.0, size=(vocab_size, d_model))),
        pos_table=sinusoid_table(max_len, d_model),
        layers=[init_layer(d_model, heads, d_ff, rng) for _ in range(n_layers)],
    )


def stack_params(stack: EncoderStack, prefix: str) -> dict[str, DiffArray]:
    """Named parameters, e.g. ``{prefix}.enc.layer0.attn.h0.wq``."""
    params = {f"{prefix}.enc.emb": stack.embedding}
    for i, layer in enumerate(stack.layers):
        base = f"{prefix}.enc.layer{i}"
        for h in range(layer.attn.heads):
            params[f"{base}.attn.h{h}.wq"] = layer.attn.w_q[h]
            params[f"{base}.attn.h{h}.wk"] = layer.attn.w_k[h]
            params[f"{base}.attn.h{h}.wv"] = layer.attn.w_v[h]
        params[f"{base}.attn.wo"] = layer.attn.w_o
        params[f"{base}.ffn.w1"] = layer.ffn_w1
        params[f"{base}.ffn.b1"] = layer.ffn_b1
        params[f"{base}.ffn.w2"] = layer.ffn_w2
        params[f"{base}.ffn.b2"] = layer.ffn_b2
        params[f"{base}.ln1.gain"] = layer.ln1_gain
        params[f"{base}.ln1.bias"] = layer.ln1_bias
        params[f"{base}.ln2.gain"] = layer.ln2_gain
        params[f"{base}.ln2.bias"] = layer.ln2_bias
    return params


def embed(ids, stack: EncoderStack) -> DiffArray:
    """Embedding rows plus sinusoidal position rows."""
    ids = list(ids)
    if not ids:
        raise ValueError("cannot embed an empty id sequence")
    if len(ids) > stack.max_len:
        raise ValueError(f"sequence length {len(ids)} exceeds positional table ({stack.max_len})")
    if any(i < 0 or i >= stack.embedding.shape[0] for i in ids):
        raise ValueError(f"token id out of range for vocab of {stack.embedding.shape[0]}")
    tok = ad.take_rows(stack.embedding, ids)
    pos = ad.constant(stack.pos_table[: len(ids)])
    return ad.add(tok, pos)


def self_attention(x: DiffArray, params: AttentionParams) -> DiffArray:
    """Multi-head scaled dot-product attention over the rows of x (no mask)."""
    inv_sqrt_dk = 1.0 / math.sqrt(params.d_k)
    head_outputs = []
    for wq, wk, wv in zip(params.w_q, params.w_k, params.w_v):
        q = ad.matmul(x, wq)
        k = ad.matmul(x, wk)
        v = ad.matmul(x, wv)
        scores = ad.scale(ad.matmul(q, ad.transpose(k)), inv_sqrt_dk)
        weights = ad.softmax_rows(scores)
        head_outputs.append(ad.matmul(weights, v))
    return ad.matmul(ad.concat_cols(head_outputs), params.w_o)


def attention_weights(x: DiffArray, params: AttentionParams) -> list[np.ndarray]:
    """Per-head softmax weight matrices, for inspection and tests."""
    inv_sqrt_dk = 1.0 / math.sqrt(params.d_k)
    out = []
    for wq, wk in zip(params.w_q, params.w_k):
        q = x.values @ wq.values
        k = x.values @ wk.values
        scores = (q @ k.T) * inv_sqrt_dk
        shifted = np.exp(scores - scores.max(axis=1, keepdims=True))
        out.append(shifted / shifted.sum(axis=1, keepdims=True))
    return out


def encoder_layer(x: DiffArray, layer: EncoderLayer, ln_eps: float = 1e-5) -> DiffArray:
    attended = ad.layer_norm(ad.add(x, self_attention(x, layer.attn)), layer.ln1_gain, layer.ln1_bias, ln_eps)
    hidden = ad.relu(ad.add(ad.matmul(attended, layer.ffn_w1), layer.ffn_b1))
    ff = ad.add(ad.matmul(hidden, layer.ffn_w2), layer.ffn_b2)
    return ad.layer_norm(ad.add(attended, ff), layer.ln2_gain, layer.ln2_bias, ln_eps)


def encode_id_matrix(ids, stack: EncoderStack) -> DiffArray:
    """Embed ids and run the full layer stack; rows stay per-token."""
    x = embed(ids, stack)
    for layer in stack.layers:
        x = encoder_layer(x, layer, stack.ln_eps)
    return x


def encode_sequence(tokens, stack: EncoderStack, vocab: Vocab) -> SeqEncoding:
    """Encode a token sequence; pooled vector is the row mean."""
    ids = encode_ids(tokens, vocab)
    if not ids:
        raise ValueError("cannot encode an empty token sequence")
    ids = ids[: stack.max_len]
    matrix = encode_id_matrix(ids, stack)
    return SeqEncoding(token_matrix=matrix, pooled=ad.mean_rows(matrix))


def _compose(vectors: list[DiffArray], stack: EncoderStack) -> DiffArray:
    """Run the layer stack over a list of node vectors treated as token rows."""
    x = ad.add(ad.concat_rows(vectors), ad.constant(stack.pos_table[: len(vectors)]))
    for layer in stack.layers:
        x = encoder_layer(x, layer, stack.ln_eps)
    return x


def encode_tree(tree: IndentTree, stack: EncoderStack, vocab: Vocab) -> SeqEncoding:
    """Encode a statement tree bottom-up.

    Every statement is first encoded as a sequence and pooled into one vector.
    Then, in post order, each internal node's vector list (itself first, then
    its children's resolved vectors) is re-encoded by the same stack and
    pooled; the final vector of the root summarizes the snippet.
    """
    node_vecs: dict[int, DiffArray] = {}
    node_matrices: dict[int, DiffArray] = {}
    for node in tree.nodes:
        tokens = tokenize_code(node.statement_text)
        ids = encode_ids(tokens, vocab) or [UNK]
        ids = ids[: stack.max_len]
        matrix = encode_id_matrix(ids, stack)
        node_matrices[node.node_id] = matrix
        node_vecs[node.node_id] = ad.mean_rows(matrix)

    plan = postorder_schedule(tree)
    last_matrix = node_matrices[tree.root.node_id]
    for step in plan:
        matrix = _compose([node_vecs[i] for i in step.input_node_ids], stack)
        node_vecs[step.output_node] = ad.mean_rows(matrix)
        last_matrix = matrix
    return SeqEncoding(token_matrix=last_matrix, pooled=node_vecs[tree.root.node_id])
