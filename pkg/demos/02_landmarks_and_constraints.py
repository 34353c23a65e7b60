"""
Landmarks and pairwise constraints
==================================

k-means on the stacked views gives m landmarks, which are split back into
per-view blocks. The labeled prefix yields normalized must-link and
cannot-link graphs.
"""

import numpy as np

from fssmsc import constraints, data, landmarks

ds = data.take_labeled_prefix(data.synthetic(seed=7), 0.1, seed=0)

km = landmarks.kmeans(ds.concatenated(), 30, seed=0)
print("Lloyd iterations:", km.iterations_used)
print("inertia trace (non-increasing):", np.round(km.inertia_trace[:5], 1), "...")

lm = landmarks.split_centers(km.centers, ds.dims)
print("landmark blocks:", [U.shape for U in lm.per_view])

cs = constraints.build_constraints(ds.prefix_labels)
print("ordered must-link pairs:", cs.n_m, "cannot-link pairs:", cs.n_c)
print("total mass of M and C:", cs.M.sum(), cs.C.sum())

# a constant embedding per class has no must-link spread
Y = np.eye(ds.k)[ds.prefix_labels - 1].T
print("Tr(Y L_M Y^T) =", np.trace(Y @ cs.L_M @ Y.T), " Tr(Y L_C Y^T) =", np.trace(Y @ cs.L_C @ Y.T))
