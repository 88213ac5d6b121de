"""
Pixel ensembles
===============

Shuffling an image's pixels destroys spatial structure but keeps the
value distribution. Small blocks of a shuffled image behave like i.i.d.
draws, so their means settle on the image mean quickly.
"""

import numpy as np

from fpcnet.corpus import load_photo
from fpcnet.ensemble import sample_ensembles, shuffle_image, subset_mean_check

image = load_photo("chelsea")[:, :256, :256]
print("image", image.shape, "channel means", image.reshape(3, -1).mean(1).round(4))

# one full shuffle; the permutation is kept for re-projection later
shuffled = shuffle_image(image, seed=0)
back = shuffled.scatter()
print("scatter undoes the shuffle:", np.array_equal(back, image))

# many 32x32 ensembles, each drawn independently without replacement
ensembles = sample_ensembles(image, 128, (32, 32), seed=1)
means = np.array([e.pixels.reshape(3, -1).mean(1) for e in ensembles])
print("spread of ensemble means per channel:", means.std(0).round(4))

# block means of a shuffled image approach the global mean as blocks grow
for size in (4, 16, 64, 256):
    dev = subset_mean_check(shuffled, size, trials=200, seed=2)
    print(f"subset of {size:4d} pixels: mean |block mean - image mean| = {dev.mean():.4f}")
