"""Mutual scaled dot-product attention between two documents.

A document is an ``L x D`` matrix of word vectors.  For a pair (u, v),
u's words query v's words; the attended value vectors are pooled into the
mutual embedding ``e_u^v``, and symmetrically for ``e_v^u``.  The pair
score is their dot product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

MODEL_HEADER = "MATAN-MODEL v1"
POOLING_MODES = ("mean", "sum")


@dataclass
class ModelParams:
    P_Q: np.ndarray
    P_K: np.ndarray
    P_V: np.ndarray

    @property
    def dim(self) -> int:
        return self.P_Q.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.P_Q.copy(), self.P_K.copy(), self.P_V.copy())

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.P_Q, self.P_K, self.P_V


@dataclass
class ParamGrads:
    g_Q: np.ndarray
    g_K: np.ndarray
    g_V: np.ndarray

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.g_Q, self.g_K, self.g_V


def init_params(dim: int, seed: int = 0) -> ModelParams:
    """Glorot-uniform initialization of the three ``dim x dim`` projections."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    bound = math.sqrt(6.0 / (2 * dim))
    P = [rng.uniform(-bound, bound, size=(dim, dim)) for _ in range(3)]
    return ModelParams(*P)


def _check_doc(W, dim):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] != dim:
        raise ValueError(f"document matrix must be L x {dim} with L >= 1, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("document matrix has non-finite entries")
    return W


def softmax_rows(S: np.ndarray) -> np.ndarray:
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(axis=1, keepdims=True)


def attention_weights(W_u, W_v, params: ModelParams) -> np.ndarray:
    """``softmax(Q_u K_v^T / sqrt(D))`` with one row per word of u."""
    W_u = _check_doc(W_u, params.dim)
    W_v = _check_doc(W_v, params.dim)
    S = (W_u @ params.P_Q) @ (W_v @ params.P_K).T / math.sqrt(params.dim)
    return softmax_rows(S)


def sdpa(W_u, W_v, params: ModelParams) -> np.ndarray:
    """Attention representation of every word of u given v (``L_u x D``)."""
    A = attention_weights(W_u, W_v, params)
    return A @ (np.asarray(W_v, dtype=np.float64) @ params.P_V)


def mutual_embed(W_u, W_v, params: ModelParams, pooling: str = "mean") -> np.ndarray:
    out = sdpa(W_u, W_v, params)
    if pooling == "mean":
        return out.mean(axis=0)
    if pooling == "sum":
        return out.sum(axis=0)
    raise ValueError(f"unknown pooling {pooling!r}; expected one of {POOLING_MODES}")


def pair_score(W_u, W_v, params: ModelParams, pooling: str = "mean") -> float:
    return float(mutual_embed(W_u, W_v, params, pooling) @ mutual_embed(W_v, W_u, params, pooling))


class DocStack:
    """Documents stacked row-wise with their query/key projections.

    Projections are computed once per stack so that every pair touching a
    document reuses them; gradients w.r.t. the projections are accumulated
    per row and mapped back to ``P_Q``/``P_K`` with one product each.
    """

    def __init__(self, docs, params: ModelParams):
        docs = [_check_doc(d, params.dim) for d in docs]
        self.lengths = np.array([len(d) for d in docs], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.lengths)[:-1]]).astype(np.int64)
        self.W = np.ascontiguousarray(np.concatenate(docs, axis=0))
        self.params = params
        self.X = np.ascontiguousarray(self.W @ params.P_Q)
        self.Y = np.ascontiguousarray(self.W @ params.P_K)
        self.PV = np.ascontiguousarray(params.P_V)

    @classmethod
    def from_tokens(cls, token_docs, table: np.ndarray, params: ModelParams) -> "DocStack":
        return cls([table[t] for t in token_docs], params)

    def _forward(self, pairs, pooling: str):
        pairs = np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
        A_off = kernels.attention_offsets(self.lengths, pairs)
        A_flat = np.empty(int(A_off[-1]))
        P1 = np.empty((len(pairs), self.params.dim))
        P2 = np.empty_like(P1)
        kernels.attend_pairs(self.X, self.Y, self.W, self.offsets, self.lengths, pairs,
                             pooling == "sum", P1, P2, A_flat, A_off)
        return pairs, P1, P2, A_flat, A_off

    def scores(self, pairs, pooling: str = "mean") -> np.ndarray:
        """Scores for an ``(n, 2)`` array of row-index pairs."""
        _, P1, P2, _, _ = self._forward(pairs, pooling)
        return np.einsum("nd,nd->n", P1 @ self.PV, P2 @ self.PV)

    def score(self, i: int, j: int, pooling: str = "mean") -> float:
        return float(self.scores([[i, j]], pooling)[0])

    def loss_and_grads(self, pairs, labels, weights=None, pooling: str = "mean"):
        """Summed weighted logistic loss over ``pairs`` and its exact gradients.

        The attention runs in the compiled kernel; the value projection, the
        scores and the ``P_V`` gradient are batch-level matrix products.
        """
        pairs, P1, P2, A_flat, A_off = self._forward(pairs, pooling)
        labels = np.asarray(labels)
        weights = np.ones(len(pairs)) if weights is None else np.asarray(weights, dtype=float)
        E1 = P1 @ self.PV
        E2 = P2 @ self.PV
        s = np.einsum("nd,nd->n", E1, E2)
        sign = np.where(labels == 1, -1.0, 1.0)
        total = float(weights @ np.logaddexp(0.0, sign * s))
        g = weights * sign * _sigmoid(sign * s)
        dE1 = g[:, None] * E2
        dE2 = g[:, None] * E1
        gV = P1.T @ dE1 + P2.T @ dE2
        dP1 = np.ascontiguousarray(dE1 @ self.PV.T)
        dP2 = np.ascontiguousarray(dE2 @ self.PV.T)
        dX = np.zeros_like(self.X)
        dY = np.zeros_like(self.Y)
        kernels.attend_pairs_backward(A_flat, A_off, self.X, self.Y, self.W, self.offsets,
                                      self.lengths, pairs, pooling == "sum", dP1, dP2, dX, dY)
        return total, ParamGrads(self.W.T @ dX, self.W.T @ dY, gV)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def loss_and_grads(pos, negs, params: ModelParams, pooling: str = "mean"):
    """NCE loss of one positive pair and its negatives, with exact gradients.

    ``pos`` is ``(W_u, W_v)``; each entry of ``negs`` is ``(W_u, W_z)`` with
    the same u document and a noise document z.  The loss is
    ``-log sigma(s_pos) - sum_i log sigma(-s_neg_i)``.
    """
    if len(negs) < 1:
        raise ValueError("need at least one negative pair")
    docs = [pos[0], pos[1]]
    pairs = [(0, 1)]
    for W_u, W_z in negs:
        docs.extend([W_u, W_z])
        pairs.append((len(docs) - 2, len(docs) - 1))
    labels = [1] + [0] * len(negs)
    return DocStack(docs, params).loss_and_grads(pairs, labels, pooling=pooling)


def save_model(params: ModelParams, path) -> None:
    D = params.dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MODEL_HEADER}\ndim {D}\n")
        for label, P in zip(("PQ", "PK", "PV"), params.arrays()):
            fh.write(f"{label}\n")
            for row in P.tolist():
                fh.write(" ".join(repr(x) for x in row) + "\n")


def load_model(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise ValueError(f"{path}: not a {MODEL_HEADER} file")
    key, _, value = lines[1].partition(" ")
    if key != "dim":
        raise ValueError(f"{path}: missing dim line")
    D = int(value)
    blocks = []
    pos = 2
    for label in ("PQ", "PK", "PV"):
        if pos >= len(lines) or lines[pos].strip() != label:
            raise ValueError(f"{path}: expected block {label} at line {pos + 1}")
        rows = [[float(x) for x in lines[pos + 1 + r].split()] for r in range(D)]
        P = np.array(rows)
        if P.shape != (D, D):
            raise ValueError(f"{path}: block {label} is not {D} x {D}")
        blocks.append(P)
        pos += D + 1
    return ModelParams(*blocks)
