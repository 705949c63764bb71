#!/usr/bin/env python3
"""Direct-formula evaluation of the scalar reference values used by the test suite.

Pure-math re-derivation, independent of the Rust implementation. Run with
`python3 scalar_oracle.py`; the printed values are frozen in tests/acceptance.rs.
"""
import itertools
import math


def softmax_ce(logits, target):
    # -log(exp(l_t) / sum exp(l_j)), evaluated literally without stabilization
    return -math.log(math.exp(logits[target]) / sum(math.exp(l) for l in logits))


# Symmetric CLIP loss, N = 2, tau = 1, similarity matrix identity.
sim = [[1.0, 0.0], [0.0, 1.0]]
rows = sum(softmax_ce(sim[i], i) for i in range(2)) / 2
cols = sum(softmax_ce([sim[j][i] for j in range(2)], i) for i in range(2)) / 2
clip_n2 = 0.5 * (rows + cols)

# InfoNCE: q.k+ = 1, two negatives at q.neg = 0.
info_tau1 = softmax_ce([1.0, 0.0, 0.0], 0)
t = 0.07
info_tau007 = softmax_ce([1.0 / t, 0.0, 0.0], 0)

# Composite, config A, lambda = 1.
composite_a = clip_n2 + 1.0 * info_tau1

# Zero-shot pair softmax, s+ = 0.3, s- = 0.1, tau_inf = 1.
p_zero_shot = math.exp(0.3) / (math.exp(0.3) + math.exp(0.1))

# AUC by brute-force pair counting.
scores = [0.9, 0.2, 0.8, 0.1]
labels = [1, 0, 0, 1]
pos = [s for s, y in zip(scores, labels) if y == 1]
neg = [s for s, y in zip(scores, labels) if y == 0]
wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
auc = wins / (len(pos) * len(neg))

for name, value in [
    ("clip_n2_tau1", clip_n2),
    ("info_nce_tau1", info_tau1),
    ("info_nce_tau0.07", info_tau007),
    ("composite_a", composite_a),
    ("zero_shot_p", p_zero_shot),
    ("auc_pair_count", auc),
]:
    print(f"{name} = {value:.17g}")
