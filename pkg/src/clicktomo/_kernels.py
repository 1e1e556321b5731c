"""Hot EM iteration kernels.

Two interchangeable implementations of the full reconstruction loop:
a loop-style kernel compiled with numba, and a vectorized pure-numpy
version. ``em_run`` points at whichever the backend flag selects; both
are importable directly for benchmarking.

The per-iteration log-likelihood is the scaled negative information
divergence between the measured and modeled frequencies,
``sum_mu h log(g/h) + h - g``: zero at a perfect fit, nondecreasing
under the multiplicative update, ``-inf`` when an observed row has
zero model probability.

Status codes: 0 = max iterations, 1 = error threshold reached,
2 = patience window expired (error minimum detected), -1 = degenerate
support (zero model probability with nonzero data).
"""

from __future__ import annotations

import numpy as np

from ._backend import BACKEND, NUMBA_AVAILABLE, njit

STATUS_MAX_ITERS = 0
STATUS_THRESHOLD = 1
STATUS_MIN_EPSILON = 2
STATUS_DEGENERATE = -1


def _em_run_loops(
    matrix, matrix_t, inv_colsum, h,
    q0, max_iters, patience, eps_threshold, min_decrease,
):
    n_rows = matrix.shape[0]
    q = q0.copy()
    eps_hist = np.empty(max_iters)
    ll_hist = np.empty(max_iters)
    best_q = q.copy()
    best_eps = np.inf
    best_iter = 0
    status = STATUS_MAX_ITERS
    n_done = 0
    ratio = np.empty(n_rows)
    for it in range(max_iters):
        g = np.dot(matrix, q)
        eps = 0.0
        for mu in range(n_rows):
            eps += abs(h[mu] - g[mu])
        eps /= n_rows
        ll = 0.0
        for mu in range(n_rows):
            if h[mu] > 0.0:
                if g[mu] <= 0.0:
                    ll = -np.inf
                    break
                ll += h[mu] * np.log(g[mu] / h[mu]) + h[mu] - g[mu]
            else:
                ll -= g[mu]
        eps_hist[it] = eps
        ll_hist[it] = ll
        n_done = it + 1
        if eps < best_eps - min_decrease:
            best_eps = eps
            best_iter = it
            best_q[:] = q
        if eps_threshold > 0.0 and eps <= eps_threshold:
            status = STATUS_THRESHOLD
            break
        if it - best_iter >= patience:
            status = STATUS_MIN_EPSILON
            break
        degenerate = False
        for mu in range(n_rows):
            if g[mu] > 0.0:
                ratio[mu] = h[mu] / g[mu]
            elif h[mu] > 0.0:
                degenerate = True
                break
            else:
                ratio[mu] = 0.0
        if degenerate:
            status = STATUS_DEGENERATE
            break
        q = q * np.dot(matrix_t, ratio) * inv_colsum
    return best_q, q, best_iter, n_done, eps_hist, ll_hist, status


if NUMBA_AVAILABLE:
    em_run_numba = njit(cache=True)(_em_run_loops)
else:  # pragma: no cover
    em_run_numba = None


def em_run_numpy(
    matrix, matrix_t, inv_colsum, h,
    q0, max_iters, patience, eps_threshold, min_decrease,
):
    n_rows = matrix.shape[0]
    q = q0.copy()
    eps_hist = np.empty(max_iters)
    ll_hist = np.empty(max_iters)
    best_q = q.copy()
    best_eps = np.inf
    best_iter = 0
    status = STATUS_MAX_ITERS
    n_done = 0
    observed = h > 0
    for it in range(max_iters):
        g = matrix @ q
        eps = np.abs(h - g).sum() / n_rows
        if np.any(g[observed] <= 0.0):
            ll = -np.inf
        else:
            ll = float(
                np.sum(h[observed] * np.log(g[observed] / h[observed]))
                + h[observed].sum() - g.sum()
            )
        eps_hist[it] = eps
        ll_hist[it] = ll
        n_done = it + 1
        if eps < best_eps - min_decrease:
            best_eps = eps
            best_iter = it
            best_q[:] = q
        if eps_threshold > 0.0 and eps <= eps_threshold:
            status = STATUS_THRESHOLD
            break
        if it - best_iter >= patience:
            status = STATUS_MIN_EPSILON
            break
        positive = g > 0.0
        if np.any(~positive & observed):
            status = STATUS_DEGENERATE
            break
        ratio = np.where(positive, h / np.where(positive, g, 1.0), 0.0)
        q = q * (matrix_t @ ratio) * inv_colsum
    return best_q, q, best_iter, n_done, eps_hist, ll_hist, status


em_run = em_run_numba if BACKEND == "numba" else em_run_numpy
