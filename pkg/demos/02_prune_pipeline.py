"""Full pruning pipeline on the DCASE21 baseline, in-library.

rank every conv layer -> build a 50% plan -> rewrite the network ->
account for the savings -> check that pruning only removed channels.
"""

import numpy as np

from pfprune import (
    apply_plan,
    build_fixture,
    compare,
    cost_report,
    discover_groups,
    make_plan,
    score_layer,
    verify_equivalence,
)
from pfprune.cost import format_cost_table

model = build_fixture("dcase21")
print(f"unpruned DCASE21_Net ({model.content_hash()[:12]}...)\n")
print(format_cost_table(cost_report(model)), "\n")

# 1. importance of every filter, data-free
reports = {c: score_layer(model.graph, model.weights, c, "operator_norm")
           for c in model.graph.conv_ids()}
for layer, rep in reports.items():
    lowest = np.argsort(rep.normalized_scores, kind="stable")[:3]
    print(f"{layer}: weakest filters by operator-norm importance -> {lowest.tolist()}")

# 2. a plan dropping half the filters of every conv layer
groups = discover_groups(model.graph)
plan = make_plan(reports, groups, p=0.5)
for g in plan.groups:
    print(f"plan: {'/'.join(g.layers)} keeps {len(g.keep)} of "
          f"{len(g.keep) + len(g.drop)} filters")

# 3. rewrite weights; every consumer loses the matching input channels
pruned = apply_plan(model, plan)
print("\npruned model:\n")
print(format_cost_table(cost_report(pruned)), "\n")

comp = compare(cost_report(model), cost_report(pruned))
print(f"parameters: -{comp['total_params_reduction_pct']:.2f}%")
print(f"MACs:       -{comp['total_macs_reduction_pct']:.2f}%")

# 4. slicing check: at layers whose inputs are untouched, the pruned
#    activations must equal the original ones restricted to kept channels
rng = np.random.default_rng(0)
samples = [rng.standard_normal(model.input_shape).astype(np.float32) for _ in range(2)]
result = verify_equivalence(model, pruned, plan, samples)
print(f"\nequivalence check ok={result['ok']}; per-layer max deviation:")
for layer, entry in result["layers"].items():
    tag = "asserted exact" if entry["asserted"] else "reported only"
    print(f"  {layer}: {entry['max_abs_diff']:.3e}  [{tag}]")
