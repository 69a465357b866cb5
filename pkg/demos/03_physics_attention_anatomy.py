"""Walk through one physics-attention layer step by step.

The layer routes N points into M learned slices (soft assignment),
attends over the M slice tokens instead of the N points (O(M^2) rather
than O(N^2)), then broadcasts the updated tokens back to the points with
the same assignment weights.
"""

import numpy as np

from aerosurrogate.physatt import (aggregate_tokens, deslice,
                                   init_layer_params, slice_weights,
                                   token_attention, attention_block)
from aerosurrogate.rng import SplitMix64

n, c, m = 6, 4, 3
params = init_layer_params(channels=c, slices=m, heads=1, ffn_width=2 * c,
                           rng=SplitMix64(0), dtype=np.float64)
x = np.random.default_rng(0).normal(size=(n, c))

# step 1: soft assignment of points to slices
tau = float(np.exp(params.log_tau))
w = slice_weights(x, params.slice_proj, params.slice_bias, tau)
print(f"slice weights: shape {w.shape}, every row sums to "
      f"{w.sum(axis=1).round(12)[0]}")
print(w.round(3))

# step 2: weighted-mean aggregation into slice tokens
z = aggregate_tokens(x, w)
print(f"\ntokens: shape {z.shape} (one {c}-channel token per slice)")

# step 3: standard attention among the M tokens
z_new = token_attention(z, params.w_q, params.b_q, params.w_k, params.b_k,
                        params.w_v, params.b_v, params.w_o, params.b_o)
print(f"attended tokens: shape {z_new.shape}")

# step 4: broadcast back to points with the same weights
x_new = deslice(z_new, w)
print(f"desliced point features: shape {x_new.shape}")

# the full residual layer wraps the four steps with layer norm and an FFN
out = attention_block(x, params)
print(f"\nfull layer output: shape {out.shape}")

# permutation equivariance: shuffling points shuffles outputs identically
perm = np.random.default_rng(1).permutation(n)
out_perm = attention_block(x[perm], params)
print(f"permutation equivariance error: "
      f"{np.abs(out_perm - out[perm]).max():.2e}")
