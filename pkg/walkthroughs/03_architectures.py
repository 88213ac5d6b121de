"""
The three networks
==================

Build each network, print its layer table and its weight and
multiply-add counts, then push a random input through it.
"""

import numpy as np

from fpcnet import models

for name in ("fpcnet-dh", "fpcnet-cc", "basenet"):
    spec = models.build(name)
    print(f"{name}: {models.count_params(spec):,} weights, {models.count_flops(spec):,} multiply-adds")
    for label, shape_in, shape_out in spec.shape_table():
        print(f"    {label:<12} {str(shape_in):>28} -> {shape_out}")
    params = models.init_params(spec, seed=0)
    x = np.random.default_rng(0).random(spec.input_shape)
    print("    output:", models.forward(spec, params, x).round(4))
