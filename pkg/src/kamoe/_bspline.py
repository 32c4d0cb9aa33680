"""Cox–de Boor B-spline basis kernels.

This is the one hand-written inner loop hot enough to matter: every KAN layer
evaluates G+k basis functions (and their derivatives, for backprop) at every
scalar entering the layer. Two interchangeable implementations are provided:

* a numba ``@njit`` kernel (default when numba imports), and
* a vectorized pure-numpy fallback.

Both run the same recursion with the same per-element arithmetic, so results
are bit-identical. Set ``KAMOE_NO_NUMBA=1`` to force the numpy path; see
``benchmarks/bspline_bench.py`` for a side-by-side timing.

Inputs must already be clamped into the grid domain ``[knots[k], knots[-k-1]]``.
"""

import os

import numpy as np

_DISABLED = os.environ.get("KAMOE_NO_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # decorator stub so both paths share source shape
        def wrap(fn):
            return fn
        return wrap


def _basis_numpy(x, knots, order):
    n0 = knots.size - 1
    g = n0 - 2 * order
    lo = knots[order]
    delta = knots[order + 1] - knots[order]
    idx = np.floor((x - lo) / delta).astype(np.int64) + order
    np.clip(idx, order, order + g - 1, out=idx)
    basis = np.zeros((x.size, n0))
    basis[np.arange(x.size), idx] = 1.0
    deriv = None
    xcol = x[:, None]
    for d in range(1, order + 1):
        m = n0 - d
        if d == order:
            deriv = d * (basis[:, :m] / (knots[d:d + m] - knots[:m])
                         - basis[:, 1:1 + m] / (knots[d + 1:d + 1 + m] - knots[1:1 + m]))
        left = (xcol - knots[:m]) / (knots[d:d + m] - knots[:m]) * basis[:, :m]
        right = (knots[d + 1:d + 1 + m] - xcol) / (knots[d + 1:d + 1 + m] - knots[1:1 + m]) * basis[:, 1:1 + m]
        basis = left + right
    if deriv is None:
        deriv = np.zeros_like(basis)
    return basis, deriv


@njit(cache=True)
def _basis_numba(x, knots, order):
    n0 = knots.size - 1
    g = n0 - 2 * order
    nb = n0 - order
    npts = x.size
    vals = np.zeros((npts, nb))
    derivs = np.zeros((npts, nb))
    lo = knots[order]
    delta = knots[order + 1] - knots[order]
    b = np.zeros(n0)
    nxt = np.zeros(n0)
    for n in range(npts):
        xv = x[n]
        for j in range(n0):
            b[j] = 0.0
        idx = int(np.floor((xv - lo) / delta)) + order
        if idx < order:
            idx = order
        if idx > order + g - 1:
            idx = order + g - 1
        b[idx] = 1.0
        for d in range(1, order + 1):
            m = n0 - d
            if d == order:
                for j in range(m):
                    derivs[n, j] = d * (b[j] / (knots[j + d] - knots[j])
                                        - b[j + 1] / (knots[j + d + 1] - knots[j + 1]))
            for j in range(m):
                left = (xv - knots[j]) / (knots[j + d] - knots[j]) * b[j]
                right = (knots[j + d + 1] - xv) / (knots[j + d + 1] - knots[j + 1]) * b[j + 1]
                nxt[j] = left + right
            for j in range(m):
                b[j] = nxt[j]
        for j in range(nb):
            vals[n, j] = b[j]
    return vals, derivs


def basis_and_derivative(x: np.ndarray, knots: np.ndarray, order: int):
    """Evaluate all G+k basis functions and their x-derivatives at flat points x.

    Returns (values, derivatives), each of shape (len(x), G+k).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    if HAS_NUMBA:
        return _basis_numba(x, knots, order)
    return _basis_numpy(x, knots, order)
