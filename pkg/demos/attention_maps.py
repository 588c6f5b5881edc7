"""
Where does the class token look?

Runs a small randomly initialized encoder over a structured image and
prints, per layer, how the class token spreads its attention across the
patch grid. Fresh random weights attend almost uniformly; training is
what sharpens these maps.
"""

import numpy as np

from colorvit.model import ModelConfig, VisionTransformer

cfg = ModelConfig(image_size=32, patch_size=8, embed_dim=32, depth=3,
                  num_heads=4, ffn_dim=64, num_classes=4)
net = VisionTransformer(cfg, seed=7)
print(f"{cfg.num_patches} patches of {cfg.patch_size}x{cfg.patch_size}, "
      f"{net.num_parameters()} parameters")

# one bright quadrant on a dark field
image = np.zeros((3, 32, 32), dtype=np.float32)
image[:, :16, :16] = 1.0

out = net.forward(image, return_attention=True)
print("per-layer attention shapes:", [a.shape for a in out.attention])

for layer, attn in enumerate(out.attention):
    # row 0 is the class token; column 0 is its self-attention
    cls_row = attn[0].mean(axis=0)[0]
    to_patches = cls_row[1:].reshape(4, 4)
    print(f"layer {layer}: cls self-weight {cls_row[0]:.4f}, "
          f"row sum {cls_row.sum():.6f}")
    print(np.array2string(to_patches, precision=4, suppress_small=True))

probs = out.probabilities[0]
print("probabilities (untrained):", np.array2string(probs, precision=4))
