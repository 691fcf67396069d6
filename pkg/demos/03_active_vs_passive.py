"""Passive criteria never run the network; active ones must.

The feature-map criteria (average rank, nuclear-norm energy) need sample
inputs and forward passes.  The weight-only criteria rank the same layer
without a single convolution being evaluated - that is the entire point of
passive pruning, and it shows up directly in the timings.
"""

import time

import numpy as np

from pfprune import build_fixture, score_layer
from pfprune import forward

model = build_fixture("dcase21")
layer = "C2"
rng = np.random.default_rng(0)
samples = [rng.standard_normal(model.input_shape).astype(np.float32) for _ in range(8)]

print(f"scoring {layer} of DCASE21_Net, 8 samples for the active methods\n")
print("method         | forward passes | seconds | top-3 filters")
for method in ("operator_norm", "l1", "l2", "gm", "hrank", "energy"):
    forward.reset_conv_call_count()
    t0 = time.perf_counter()
    kwargs = {"samples": samples} if method in ("hrank", "energy") else {}
    rep = score_layer(model.graph, model.weights, layer, method, **kwargs)
    elapsed = time.perf_counter() - t0
    top = np.argsort(rep.normalized_scores, kind="stable")[::-1][:3]
    print(f"{method:14s} | {forward.conv_call_count():14d} | {elapsed:7.3f} | {top.tolist()}")

print("\nPassive methods: zero forward passes, milliseconds.")
print("Active methods pay one partial network evaluation per sample.")

# Active methods refuse to run without data; the contrast is enforced.
try:
    score_layer(model.graph, model.weights, layer, "hrank")
except ValueError as exc:
    print(f"\nhrank without samples -> {exc}")
