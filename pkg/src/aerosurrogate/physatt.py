"""Physics-attention core: learned slicing, token aggregation, token
self-attention, deslicing, and the full residual layer.

Points are softly assigned to M latent slices, slices are pooled into
tokens, tokens attend to each other, and the result is broadcast back to
the points through the same slice weights. The layer wraps this in the
canonical pre-norm Transformer block.

All operations exist in two forms: a graph form on autodiff Tensors (used
by the model and training) and thin ndarray wrappers for direct use.
"""

from dataclasses import dataclass, fields
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import SplitMix64

LAYER_NORM_EPS = 1e-5
_TOKEN_DENOM_FLOOR = 1e-30


@dataclass
class LayerParams:
    """Trainable parameters of one physics-attention layer.

    slice_proj has width heads*M; with heads=1 it is the plain CxM slice
    projection. log_tau parameterizes the slicing temperature tau=exp(log_tau)
    to keep it positive while trainable.
    """

    slice_proj: np.ndarray    # (C, H*M)
    slice_bias: np.ndarray    # (H*M,)
    log_tau: np.ndarray       # scalar ()
    w_q: np.ndarray           # (C, C)
    b_q: np.ndarray
    w_k: np.ndarray
    b_k: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    ffn_w1: np.ndarray        # (C, H_f)
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray        # (H_f, C)
    ffn_b2: np.ndarray
    ln1_gain: np.ndarray      # (C,)
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    heads: int = 1

    @property
    def channels(self) -> int:
        return self.slice_proj.shape[0]

    @property
    def slices(self) -> int:
        return self.slice_proj.shape[1] // self.heads

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)
                if f.name != "heads"]


def _uniform_init(rng: SplitMix64, shape: tuple, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    n = int(np.prod(shape)) if shape else 1
    vals = (rng.uniform_array(n) * 2.0 - 1.0) * bound
    return vals.reshape(shape).astype(dtype)


def init_layer_params(channels: int, slices: int, heads: int, ffn_width: int,
                      rng: SplitMix64, dtype=np.float32) -> LayerParams:
    """Seeded init: projections uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
    biases zero, layer-norm gain 1 / bias 0, tau = 0.5."""
    if channels % heads != 0:
        raise ValueError(f"channels {channels} not divisible by heads {heads}")
    c = channels
    return LayerParams(
        slice_proj=_uniform_init(rng, (c, heads * slices), c, dtype),
        slice_bias=np.zeros(heads * slices, dtype=dtype),
        log_tau=np.asarray(math.log(0.5), dtype=dtype),
        w_q=_uniform_init(rng, (c, c), c, dtype),
        b_q=np.zeros(c, dtype=dtype),
        w_k=_uniform_init(rng, (c, c), c, dtype),
        b_k=np.zeros(c, dtype=dtype),
        w_v=_uniform_init(rng, (c, c), c, dtype),
        b_v=np.zeros(c, dtype=dtype),
        w_o=_uniform_init(rng, (c, c), c, dtype),
        b_o=np.zeros(c, dtype=dtype),
        ffn_w1=_uniform_init(rng, (c, ffn_width), c, dtype),
        ffn_b1=np.zeros(ffn_width, dtype=dtype),
        ffn_w2=_uniform_init(rng, (ffn_width, c), ffn_width, dtype),
        ffn_b2=np.zeros(c, dtype=dtype),
        ln1_gain=np.ones(c, dtype=dtype),
        ln1_bias=np.zeros(c, dtype=dtype),
        ln2_gain=np.ones(c, dtype=dtype),
        ln2_bias=np.zeros(c, dtype=dtype),
        heads=heads,
    )


# ---------------------------------------------------------------------------
# graph-form operations (single head, the literal equations)


def slice_weights_t(x: Tensor, projection: Tensor, bias: Tensor, tau) -> Tensor:
    """Row-stochastic slice weights: softmax over M of (x.P + b)/tau."""
    logits = ad.add(ad.matmul(x, projection), bias)
    if isinstance(tau, Tensor):
        logits = ad.div(logits, tau)
    else:
        logits = ad.mul(logits, 1.0 / float(tau))
    if not np.all(np.isfinite(logits.value)):
        raise FloatingPointError("non-finite slice logits")
    return ad.softmax(logits, axis=-1)


def aggregate_tokens_t(x: Tensor, w: Tensor) -> Tensor:
    """Weighted-mean tokens: z_j = sum_i w_ij x_i / sum_i w_ij."""
    num = ad.matmul(ad.transpose(w), x)                       # (M, C)
    denom = ad.sum_(w, axis=0, keepdims=False)                # (M,)
    denom = ad.maximum_const(denom, _TOKEN_DENOM_FLOOR)
    return ad.div(num, ad.reshape(denom, (-1, 1)))


def token_attention_t(z: Tensor, w_q, b_q, w_k, b_k, w_v, b_v,
                      w_o, b_o, scale: float | None = None) -> Tensor:
    """Self-attention among tokens followed by the output projection."""
    q = ad.add(ad.matmul(z, w_q), b_q)
    k = ad.add(ad.matmul(z, w_k), b_k)
    v = ad.add(ad.matmul(z, w_v), b_v)
    d = z.shape[-1] if scale is None else scale
    logits = ad.mul(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(d))
    attn = ad.softmax(logits, axis=-1)
    return ad.add(ad.matmul(ad.matmul(attn, v), w_o), b_o)


def deslice_t(z_prime: Tensor, w: Tensor) -> Tensor:
    """Broadcast transformed tokens back to points: x'_i = sum_j w_ij z'_j."""
    return ad.matmul(w, z_prime)


def physics_attention_t(x: Tensor, p: LayerParams, params: dict | None = None) -> Tensor:
    """Multi-head physics attention. With heads=1 this is exactly
    deslice(token_attention(aggregate(slice(x)))).

    `params` optionally supplies Tensor-wrapped parameters (training path);
    otherwise the layer's ndarrays are used as constants.
    """
    t = _wrap(p, params)
    h = p.heads
    c = p.channels
    m = p.slices
    ch = c // h
    tau = ad.exp(t["log_tau"])
    w_all = ad.add(ad.matmul(x, t["slice_proj"]), t["slice_bias"])
    w_all = ad.div(w_all, tau)

    head_weights = []
    head_tokens = []
    for i in range(h):
        w_i = ad.softmax(ad.getitem(w_all, (slice(None), slice(i * m, (i + 1) * m))),
                         axis=-1)                              # (N, M)
        x_i = ad.getitem(x, (slice(None), slice(i * ch, (i + 1) * ch)))
        head_weights.append(w_i)
        head_tokens.append(aggregate_tokens_t(x_i, w_i))       # (M, Ch)

    z = ad.concat(head_tokens, axis=1)                         # (M, C)
    q = ad.add(ad.matmul(z, t["w_q"]), t["b_q"])
    k = ad.add(ad.matmul(z, t["w_k"]), t["b_k"])
    v = ad.add(ad.matmul(z, t["w_v"]), t["b_v"])
    attended = []
    for i in range(h):
        cols = (slice(None), slice(i * ch, (i + 1) * ch))
        q_i, k_i, v_i = ad.getitem(q, cols), ad.getitem(k, cols), ad.getitem(v, cols)
        logits = ad.mul(ad.matmul(q_i, ad.transpose(k_i)), 1.0 / math.sqrt(ch))
        attended.append(ad.matmul(ad.softmax(logits, axis=-1), v_i))
    z_prime = ad.add(ad.matmul(ad.concat(attended, axis=1), t["w_o"]), t["b_o"])

    outs = []
    for i in range(h):
        z_i = ad.getitem(z_prime, (slice(None), slice(i * ch, (i + 1) * ch)))
        outs.append(deslice_t(z_i, head_weights[i]))           # (N, Ch)
    return ad.concat(outs, axis=1)


def attention_block_t(x: Tensor, p: LayerParams, params: dict | None = None) -> Tensor:
    """Pre-norm residual block:
    x_hat = PhysicsAttn(LN(x)) + x; out = FFN(LN(x_hat)) + x_hat."""
    t = _wrap(p, params)
    attn_in = ad.layer_norm(x, t["ln1_gain"], t["ln1_bias"], eps=LAYER_NORM_EPS)
    x_hat = ad.add(physics_attention_t(attn_in, p, params), x)
    ffn_in = ad.layer_norm(x_hat, t["ln2_gain"], t["ln2_bias"], eps=LAYER_NORM_EPS)
    hidden = ad.gelu(ad.add(ad.matmul(ffn_in, t["ffn_w1"]), t["ffn_b1"]))
    ffn_out = ad.add(ad.matmul(hidden, t["ffn_w2"]), t["ffn_b2"])
    return ad.add(ffn_out, x_hat)


def _wrap(p: LayerParams, params: dict | None) -> dict:
    if params is not None:
        return params
    return {name: Tensor(arr) for name, arr in p.named_arrays()}


# ---------------------------------------------------------------------------
# ndarray wrappers


def slice_weights(x: np.ndarray, projection: np.ndarray, bias: np.ndarray,
                  tau: float) -> np.ndarray:
    return slice_weights_t(Tensor(x), Tensor(projection), Tensor(bias), tau).value


def aggregate_tokens(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    if x.shape[0] != w.shape[0]:
        raise ValueError(f"point counts differ: x has {x.shape[0]}, w has {w.shape[0]}")
    return aggregate_tokens_t(Tensor(x), Tensor(w)).value


def token_attention(z: np.ndarray, w_q, b_q, w_k, b_k, w_v, b_v,
                    w_o, b_o) -> np.ndarray:
    return token_attention_t(Tensor(z), Tensor(w_q), Tensor(b_q), Tensor(w_k),
                             Tensor(b_k), Tensor(w_v), Tensor(b_v),
                             Tensor(w_o), Tensor(b_o)).value


def deslice(z_prime: np.ndarray, w: np.ndarray) -> np.ndarray:
    if z_prime.shape[0] != w.shape[1]:
        raise ValueError("token count mismatch between z' and w")
    return deslice_t(Tensor(z_prime), Tensor(w)).value


def attention_block(x: np.ndarray, p: LayerParams) -> np.ndarray:
    return attention_block_t(Tensor(x), p).value
