"""Pure-Python/NumPy implementations of the hot loops.

Signatures match the compiled ``_ckernels`` module exactly; arrays passed
in are float64 (int64 for indices) C-contiguous and outputs are updated in
place.
"""

import math

import numpy as np

NAME = "python"


def glove_epoch(W, Wc, b, bc, gW, gWc, gb, gbc, rows, cols, logx, fx, order, lr):
    """One AdaGrad pass over the co-occurrence entries in ``order``.

    Returns the summed weighted cost ``0.5 * f(x) * diff**2``.
    """
    cost = 0.0
    for e in order:
        i = rows[e]
        j = cols[e]
        wi = W[i]
        wj = Wc[j]
        diff = float(np.dot(wi, wj)) + b[i] + bc[j] - logx[e]
        fdiff = fx[e] * diff
        if not math.isfinite(fdiff):
            raise FloatingPointError(f"non-finite GloVe loss at entry {e} ({i}, {j})")
        cost += 0.5 * fdiff * diff
        fdiff *= lr
        t1 = fdiff * wj
        t2 = fdiff * wi
        wi -= t1 / np.sqrt(gW[i])
        wj -= t2 / np.sqrt(gWc[j])
        gW[i] += t1 * t1
        gWc[j] += t2 * t2
        b[i] -= fdiff / math.sqrt(gb[i])
        bc[j] -= fdiff / math.sqrt(gbc[j])
        fdiff *= fdiff
        gb[i] += fdiff
        gbc[j] += fdiff
    return cost


def attention_offsets(lengths, pairs):
    """Start of each pair's two attention blocks in the flat buffer, plus its size."""
    lu = lengths[pairs[:, 0]]
    lv = lengths[pairs[:, 1]]
    sizes = 2 * lu * lv
    offsets = np.zeros(len(pairs) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    return offsets


def _attend(X, Y, Wd, ou, lu, ov, lv, scale, c):
    S = (X[ou:ou + lu] @ Y[ov:ov + lv].T) * scale
    S -= S.max(axis=1, keepdims=True)
    A = np.exp(S)
    A /= A.sum(axis=1, keepdims=True)
    return A, (A.sum(axis=0) * c) @ Wd[ov:ov + lv]


def attend_pairs(X, Y, Wd, offsets, lengths, pairs, sum_pool, P1, P2, A_flat, A_off):
    """Forward attention for every pair in both directions.

    Row n of ``P1`` receives the pooled context words of u attending over v
    (``mean_i softmax(Q_u K_v^T / sqrt(D))_i @ W_v``); ``P2`` the same with
    u and v swapped.  Applying ``P_V`` to these rows gives the mutual
    embeddings, since pooling is linear.  Attention matrices are kept in
    ``A_flat`` for the backward pass.
    """
    scale = 1.0 / math.sqrt(X.shape[1])
    for n in range(len(pairs)):
        u, v = pairs[n]
        ou, lu, ov, lv = offsets[u], lengths[u], offsets[v], lengths[v]
        base = A_off[n]
        A, P1[n] = _attend(X, Y, Wd, ou, lu, ov, lv, scale, 1.0 if sum_pool else 1.0 / lu)
        A_flat[base:base + lu * lv] = A.ravel()
        A, P2[n] = _attend(X, Y, Wd, ov, lv, ou, lu, scale, 1.0 if sum_pool else 1.0 / lv)
        A_flat[base + lu * lv:base + 2 * lu * lv] = A.ravel()


def _attend_back(A, dp, X, Y, Wd, dX, dY, ou, lu, ov, lv, scale, c):
    da = Wd[ov:ov + lv] @ dp
    dS = A * (da[None, :] - (A @ da)[:, None]) * (c * scale)
    dX[ou:ou + lu] += dS @ Y[ov:ov + lv]
    dY[ov:ov + lv] += dS.T @ X[ou:ou + lu]


def attend_pairs_backward(A_flat, A_off, X, Y, Wd, offsets, lengths, pairs, sum_pool, dP1, dP2, dX, dY):
    """Backpropagate gradients w.r.t. ``P1``/``P2`` rows into ``dX`` and ``dY``."""
    scale = 1.0 / math.sqrt(X.shape[1])
    for n in range(len(pairs)):
        u, v = pairs[n]
        ou, lu, ov, lv = offsets[u], lengths[u], offsets[v], lengths[v]
        base = A_off[n]
        A = A_flat[base:base + lu * lv].reshape(lu, lv)
        _attend_back(A, dP1[n], X, Y, Wd, dX, dY, ou, lu, ov, lv, scale, 1.0 if sum_pool else 1.0 / lu)
        A = A_flat[base + lu * lv:base + 2 * lu * lv].reshape(lv, lu)
        _attend_back(A, dP2[n], X, Y, Wd, dX, dY, ov, lv, ou, lu, scale, 1.0 if sum_pool else 1.0 / lv)
