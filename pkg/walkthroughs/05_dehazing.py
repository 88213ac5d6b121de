"""
Dehazing with a 288-weight network
==================================

Synthesize hazy patches, train the transmission network briefly, and
compare it with the dark channel prior on held-out patches and on a
full synthetic hazy image.
"""

import numpy as np

from fpcnet import corpus, dehazing as dh, models, trainer

ITERATIONS = 5000

tiles = corpus.tiles()
data = dh.synthesize_dh_dataset(tiles, n_patches=30000, seed=0)
train_set, test_set = data.subset("train"), data.subset("test")

spec = models.build("fpcnet-dh")
report = trainer.train(spec, dh.PatchProvider(train_set), trainer.TrainConfig(iterations=ITERATIONS, seed=0))
print(f"held-out transmission MSE: network {dh.transmission_mse(spec, report.params, test_set):.4f}, "
      f"dark channel prior {dh.dcp_mse(test_set):.4f}")

# one full image with a smooth transmission field
name, clear = tiles[3]
rng = np.random.default_rng(1)
t = dh.smooth_transmission(clear.shape[1:], rng, (0.2, 1.0))
hazy = dh.synthesize_hazy_image(clear, t, 0.9)

J_net, t_net, A_net = dh.dehaze(hazy, spec, report.params)
J_dcp, t_dcp, A_dcp = dh.dcp_dehaze(hazy)
for label, J in (("network", J_net), ("dark channel prior", J_dcp)):
    J = np.clip(J, 0, 1)
    print(f"{label:>20}: PSNR {dh.psnr(J, clear):.2f} dB, SSIM {dh.ssim(J, clear):.3f}")
print("estimated airlight", A_net.round(3), "(true 0.9)")
