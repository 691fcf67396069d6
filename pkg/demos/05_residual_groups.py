"""Pruning residual networks: who must share a mask, and why.

Inside a bottleneck block the first two convs feed only the next conv, so
each can be pruned alone.  The block-exit convs are different: their
outputs meet identity shortcuts at elementwise adds, chaining every block
of a stage (plus the stage's conv shortcut) into one group that must share
a single keep/drop mask.
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
)

model = build_fixture("resnet50")
groups = discover_groups(model.graph)

singles = [g for g in groups if len(g.members) == 1]
coupled = [g for g in groups if len(g.members) > 1]
print(f"ResNet50_Net: {len(model.graph.conv_ids())} convs -> "
      f"{len(singles)} independent layers + {len(coupled)} add-coupled groups\n")
for g in coupled:
    print(f"  shared mask: {', '.join(g.members)}")

# Prune stage 5 on both branches: the group (exit convs + conv shortcut)
# aggregates member scores by summation, then one mask serves them all.
stage5 = next(g for g in coupled if g.members[0].startswith("s5"))
main_branch = [c for c in model.graph.conv_ids()
               if c.startswith("s5") and c.endswith(("_a", "_b"))]
selection = list(stage5.members) + main_branch

reports = {c: score_layer(model.graph, model.weights, c, "operator_norm")
           for c in selection}
plan = make_plan(reports, groups, p=0.5, layer_selection=selection)
pruned = apply_plan(model, plan)

shapes = pruned.shapes()
print("\nafter pruning stage 5 at p=0.5 (main + residual branch):")
for add in ("s5b1_add", "s5b2_add", "s5b3_add"):
    a, b = pruned.graph.nodes[add].inputs
    print(f"  {add}: inputs {shapes[a]} + {shapes[b]}  (masks agree)")

comp = compare(cost_report(model), cost_report(pruned))
print(f"\nnetwork-wide savings from one stage: "
      f"params -{comp['total_params_reduction_pct']:.1f}%, "
      f"MACs -{comp['total_macs_reduction_pct']:.1f}%")

# Pruning only part of a coupled group is rejected - the mask is shared.
try:
    make_plan(reports, groups, 0.5, ["s5b1_c"])
except ValueError as exc:
    print(f"\npartial selection -> {exc}")
