"""
Collapsing a k x k kernel to 1 x 1
==================================

On a shuffled image a k x k convolution followed by average pooling is
close to a 1 x 1 convolution whose weights are the spatial sums of the
original kernel. On an unshuffled patch the gap is larger because
neighbouring pixels are correlated.
"""

import numpy as np

from fpcnet.corpus import load_photo
from fpcnet.equivalence import collapse_kernel, rows_to_csv, sweep_equivalence, verify_equivalence

rng = np.random.default_rng(0)
kernel = rng.uniform(-1, 1, (1, 3, 3, 3))
print("collapsed kernel:\n", collapse_kernel(kernel).round(3))

# exact on constant input
flat = np.full((3, 5, 5), 0.4)
report = verify_equivalence(flat, kernel)
print("constant input gap:", report.abs_diff[0])

# paired comparison on a textured photo
image = load_photo("astronaut")[:, 100:228, 100:228]
rows = sweep_equivalence(image, (2, 3, 5), trials=500, seed=7)
print(rows_to_csv(rows))
