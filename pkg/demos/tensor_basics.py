"""A short tour of the tensor helpers.

Run with ``python3 demos/tensor_basics.py``.
"""

import numpy as np

from tensorpls import fold, frobenius_norm, mode_multiply, outer3, unfold

# A small 2 x 3 x 4 tensor holding 0..23.
T = np.arange(24.0).reshape(2, 3, 4)

# Unfolding puts one mode in the columns and the other two in the rows.
for m in (1, 2, 3):
    M = unfold(T, m)
    print(f"mode-{m} unfolding has shape {M.shape}")
    assert np.array_equal(fold(M, m, T.shape), T)  # fold undoes it

# Mode products act on one mode and leave the others alone.
A = np.ones((5, 3))
print("T x_2 A has shape", mode_multiply(T, A, 2).shape)

# The Frobenius norm does not care how the tensor is laid out.
print("norms:", frobenius_norm(T), np.linalg.norm(unfold(T, 2)))

# A rank-one tensor unfolds to a rank-one matrix.
u, v, w = np.array([1.0, 2.0]), np.array([1.0, 0.0, -1.0]), np.array([0.5, 0.5, 0.5, 0.5])
O = outer3(u, v, w)
print("rank of each unfolding of u o v o w:",
      [np.linalg.matrix_rank(unfold(O, m)) for m in (1, 2, 3)])
