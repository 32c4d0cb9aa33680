"""Shared test utilities: finite-difference gradient checking and a spline oracle."""

import numpy as np

from kamoe.tensor import Tape


def gradcheck(make_loss, tensors, eps=1e-5):
    """Worst relative error between tape gradients and central differences.

    `make_loss` must be a pure function of the current tensor values and
    return a scalar Tensor. Tensors not reached by the loss count as zero-grad.
    """
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        tape.backward(make_loss())
    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        aflat = analytic.reshape(-1)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            hi = make_loss().item()
            flat[i] = old - eps
            lo = make_loss().item()
            flat[i] = old
            numeric = (hi - lo) / (2.0 * eps)
            err = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-3)
            worst = max(worst, err)
    return worst


def cox_de_boor_reference(x, knots, j, k):
    """Textbook recursive B-spline evaluation, independent of the kernels."""
    if k == 0:
        return 1.0 if knots[j] <= x < knots[j + 1] else 0.0
    left = 0.0
    if knots[j + k] != knots[j]:
        left = (x - knots[j]) / (knots[j + k] - knots[j]) * cox_de_boor_reference(x, knots, j, k - 1)
    right = 0.0
    if knots[j + k + 1] != knots[j + 1]:
        right = ((knots[j + k + 1] - x) / (knots[j + k + 1] - knots[j + 1])
                 * cox_de_boor_reference(x, knots, j + 1, k - 1))
    return left + right


def reference_basis_row(x, grid):
    """All G+k reference basis values at one point, right-closed at the domain top."""
    k = grid.spline_order
    nb = grid.num_basis
    # the recursive indicator is right-open; fold x == hi into the last interval
    if x == grid.hi:
        x = grid.hi - 1e-12 * max(1.0, abs(grid.hi))
    return np.array([cox_de_boor_reference(x, grid.knots, j, k) for j in range(nb)])
