"""
Colour constancy at desk scale
==============================

Cast the bundled clear tiles with random illuminants, train a narrow
colour-constancy network for a few thousand iterations, and compare its
angular error with gray world on held-out tiles.

Set ``ITERATIONS`` higher for a better model; 20000 takes about 20
minutes on one core.
"""

import numpy as np

from fpcnet import color_constancy as cc
from fpcnet import corpus, models, trainer

ITERATIONS = 2000

data = cc.synthesize_cc_dataset(corpus.tiles(), casts_per_image=4, seed=0)
train_items, test_items = data.split("train"), data.split("test")
print(f"{len(train_items)} training casts, {len(test_items)} held out")

spec = models.build("fpcnet-cc", width_div=4)
provider = cc.EnsembleProvider(train_items, (32, 32))
report = trainer.train(spec, provider, trainer.TrainConfig(iterations=ITERATIONS, seed=0))
print(f"final training loss {report.final_loss:.5f}")

errors = cc.evaluate(test_items, spec, report.params, n_ensembles=64)
print(cc.metrics_csv({name: cc.cc_metrics(e) for name, e in errors.items()}))

# correct one held-out image with the learned estimate
item = test_items[0]
E = cc.estimate_illuminant(item.image, spec, report.params)
print("true cast", item.illuminant.round(3), "estimate", E.round(3),
      f"error {cc.angular_error(E, item.illuminant):.2f} deg")
corrected = cc.correct_image(item.image, E)
print("corrected channel means", corrected.reshape(3, -1).mean(1).round(3))
