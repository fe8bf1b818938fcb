"""
A 120-6-3-1 network trained through the same loss
=================================================

The network takes the standardized 120 window features, has two tanh
hidden layers of 6 and 3 units and a linear output.  The loss gradient
with respect to the prediction is the only thing the objective has to
provide, so the improved loss drops straight in.
"""
import numpy as np

from extremeloss import metrics, mlp, pipeline, synth
from extremeloss.loss import ImprovedLoss, LossConfig, SquaredError

raw, _ = synth.generate(synth.SynthConfig(start="2018-09-01T00:00:00",
                                          end="2018-12-01T00:00:00", seed=1))
cleaned, _ = pipeline.clean(raw)
split = pipeline.split_by_month(pipeline.build_windows(pipeline.aggregate(cleaned)),
                                ((2018, 10),), LossConfig())

params = mlp.MlpParams(epochs=40, seed=7)
improved = ImprovedLoss(LossConfig(a=0.9).with_weights(split.train.y))
for name, objective in (("baseline", SquaredError()), ("a=0.9", improved)):
    model = mlp.train(split.train.X, split.train.y, objective, params)
    r = metrics.evaluate(model.predict(split.test.X), split.test.y, LossConfig())
    trace = np.array(model.loss_trace)
    print(f"{name:9s} loss {trace[0]:.3g} -> {trace[-1]:.3g}  recall {r.recall_combined:.3f}  "
          f"bias_high {r.bias_high:+.3f}")

# %%
# Training is seeded end to end: the same seed gives the same bytes.
again = mlp.train(split.train.X, split.train.y, improved, params)
print("deterministic:", mlp.serialize(again) == mlp.serialize(model))
