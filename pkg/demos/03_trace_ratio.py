"""
The trace-ratio subproblem
==========================

The landmark embedding maximizes Tr(A L_d A^T) / Tr(A L_f A^T) over
row-orthonormal A. Each iteration takes the top eigenvectors of the
shifted matrix L_d - rho L_f; rho can only go up.
"""

import numpy as np

from fssmsc import solver

rng = np.random.default_rng(0)
S = rng.standard_normal((10, 10))
L_f = S @ S.T / 10 + 0.1 * np.eye(10)
D = rng.standard_normal((10, 10))
L_d = D + D.T

A, rho, history = solver.solve_trace_ratio(solver.TraceRatioProblem(L_f, L_d, 2))
print("rho per iteration:", np.round(history, 6))
print("rows orthonormal:", np.allclose(A @ A.T, np.eye(2)))

# compare with random orthonormal candidates
V = np.linalg.qr(rng.standard_normal((20000, 10, 2)))[0]
ratios = np.einsum("bik,ij,bjk->b", V, L_d, V) / np.einsum("bik,ij,bjk->b", V, L_f, V)
print(f"best random candidate {ratios.max():.4f} vs solver {rho:.4f}")
