"""
Where does the network look?
============================

Channel-averaged pooling responses give every pixel a weight. Scattered
back through the shuffle permutation they form a sparse map on the
source image, and weighted histograms summarise which colours or
intensities the network attends to.
"""

import numpy as np

from fpcnet import corpus, inspect, models
from fpcnet.ensemble import sample_ensembles

image = corpus.load_photo("coffee")[:, :128, :128]

spec = models.build("fpcnet-cc", width_div=4)
params = models.init_params(spec, seed=0)
ensembles = sample_ensembles(image, 8, (32, 32), seed=0)

total = np.zeros(image.shape[1:])
for e in ensembles:
    w = inspect.activation_weights(spec, params, e, "pool1_1")
    total += inspect.reproject(w, e)
print(f"weighted pixels {np.count_nonzero(total)} of {total.size}, mass {total.sum():.3f}")

hist = inspect.weighted_chroma_histogram([(image, total)], bins=16)
i, j = np.unravel_index(hist.mass.argmax(), hist.mass.shape)
print(f"heaviest chroma bin: R/G ~ {hist.edges[0][i]:.2f}, B/G ~ {hist.edges[1][j]:.2f}")

# dark-channel statistics of clear tiles
tiles = [img for _, img in corpus.tiles()]
plain = inspect.min_channel_histogram(tiles, bins=10)
cum = plain.cumulative() / plain.total
print("share of pixels with min(R,G,B) below 0.2:", round(float(cum[1]), 3))
with open("min_channel.svg", "w") as fh:
    fh.write(inspect.curve_svg({"clear tiles": plain.cumulative()}, plain.edges[0]))
