"""Pure numpy implementations of the hot kernels.

Drop-in fallback for the compiled extension; same signatures, same cache
layout, so the two backends are interchangeable at import time.
"""

import numpy as np

BACKEND_NAME = "python"


def sym_normalize(w):
    """Symmetric normalization of a weighted adjacency with unit self-loops.

    Returns (p, cache) where p = D^-1/2 (w + I) D^-1/2 and D is the diagonal
    of row sums of (w + I). The cache feeds sym_normalize_vjp.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    what = w + np.eye(w.shape[0])
    d = what.sum(axis=1)
    r = d ** -0.5
    p = (what * r[:, None]) * r[None, :]
    return p, (what, d, r)


def sym_normalize_vjp(g, cache):
    """Gradient of a scalar through sym_normalize, w.r.t. the raw weights.

    Perturbing w[k, l] moves only the row degree d_k, whose r_k appears in
    both row k and column k of p; so besides the direct term, each entry of
    row k picks up -1/2 d_k^-3/2 (t_k + u_k), with t/u the r-weighted row and
    column sums of g * what.
    """
    what, d, r = cache
    g = np.ascontiguousarray(g, dtype=np.float64)
    gw = (g * r[:, None]) * r[None, :]
    gwhat = g * what
    t = gwhat @ r
    u = gwhat.T @ r
    gw = gw - (0.5 * d ** -1.5 * (t + u))[:, None]
    return gw


def count_triangles(adj):
    """Exact triangle count by enumerating closed triples.

    Each triangle i<j<k is counted once, at its lexicographically smallest
    edge (i, j), by counting common neighbors beyond j.
    """
    a = np.asarray(adj) != 0
    n = a.shape[0]
    total = 0
    for i in range(n - 2):
        row_i = a[i]
        for j in np.nonzero(row_i[i + 1 :])[0] + i + 1:
            total += int(np.count_nonzero(row_i[j + 1 :] & a[j, j + 1 :]))
    return total
