"""Top-k gated fusion of per-layer embeddings, mixture-of-experts style.

A stack of L layer embeddings is fused into one vector: the final layer
acts as the gate input, a linear-plus-softmax gate scores the L-1 lower
layers, only the top-k survive (renormalized), and the weighted sum is
added back onto the final layer. Sparsity means most layers contribute
exactly nothing, which the demo verifies by perturbing them.
"""

import numpy as np

from sasvkit.moe import GateParams, LayerStack, fuse, gate_probs, top_k_mask

rng = np.random.default_rng(11)
L, D = 7, 12

layers = rng.standard_normal((L, D))
stack = LayerStack(layers)
params = GateParams.random(L - 1, D, top_k=3, seed=5)

probs = gate_probs(stack.final, params)
mask = top_k_mask(probs, params.top_k)

print("gate probabilities over the lower layers:")
for i, (p, m) in enumerate(zip(probs, mask)):
    marker = f" -> selected, renormalized weight {m:.4f}" if m > 0 else ""
    print(f"  layer {i}: {p:.4f}{marker}")

fused = fuse(stack, params)
print(f"\nfused vector norm: {np.linalg.norm(fused):.4f}")

# perturb a non-selected layer: the output must not move at all
victim = int(np.flatnonzero(mask == 0)[0])
perturbed = layers.copy()
perturbed[victim] += 1e6
refused = fuse(LayerStack(perturbed), params)
print(f"perturbing non-selected layer {victim} by 1e6: "
      f"output bit-identical = {np.array_equal(fused, refused)}")

# unweighted variant simply sums the selected layers
plain = fuse(stack, params, unweighted=True)
print(f"unweighted fusion differs: {not np.allclose(plain, fused)}")
