"""Why entry-wise norms can misjudge a filter.

A convolution layer acts on its input like a linear operator: the largest
singular value of a filter says how strongly that filter can stretch an
input, regardless of how its weight mass is arranged.  Entry-wise norms
only see the weight mass.  This script builds a tiny layer where the two
views disagree.
"""

import numpy as np

from pfprune import KernelTensor, operator_norm, score_entrywise, score_operator_norm

# Three filters over one input channel, kernels vectorized to length 4:
#   f1 spreads its weight evenly, f2 concentrates everything in one entry,
#   f3 is f1 with alternating signs.
f1 = np.array([1.0, 1.0, 1.0, 1.0])
f2 = np.array([3.0, 0.0, 0.0, 0.0])
f3 = np.array([-1.0, 1.0, -1.0, 1.0])
kernel = KernelTensor(np.stack([f1, f2, f3]).reshape(3, 1, 1, 4).astype(np.float32))

print("filter | l1 norm | l2 norm | operator norm")
for j, f in enumerate((f1, f2, f3)):
    sigma = operator_norm(kernel.filter_matrix(j))
    print(f"  f{j + 1}   |   {np.abs(f).sum():.1f}   |  {np.linalg.norm(f):.2f}   |   {sigma:.2f}")

# f2 has the smallest l1 norm (3 vs 4) yet the largest operator norm (3 vs 2):
# it stretches inputs harder than either of the others.
l1 = score_entrywise(kernel, 1)
op = score_operator_norm(kernel)

print("\nnormalized importance, l1 criterion:   ", l1.normalized_scores.round(4))
print("normalized importance, operator-norm:  ", op.normalized_scores.round(4))

drop_l1 = int(np.argsort(l1.normalized_scores, kind="stable")[0])
drop_op = int(np.argsort(op.normalized_scores, kind="stable")[0])
print(f"\npruning one filter: l1 would drop f{drop_l1 + 1}, "
      f"operator-norm would drop f{drop_op + 1}")
print("The l1 criterion throws away the strongest operator first.")
