"""Negative-sampling training of the mutual attention parameters with ADAM."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .attention import DocStack, ModelParams, ParamGrads, init_params
from .corpus import Corpus, Graph
from .glove import EmbeddingTable

logger = logging.getLogger(__name__)

SAMPLING_MODES = ("uniform-edges", "m-weighted")


@dataclass
class TrainConfig:
    k: int = 1
    n_pairs: int = 100_000
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    pooling: str = "mean"
    sampling: str = "uniform-edges"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_pairs < 0:
            raise ValueError("n_pairs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls([np.zeros_like(P) for P in params.arrays()],
                   [np.zeros_like(P) for P in params.arrays()])


@dataclass
class TrainTrace:
    losses: list = field(default_factory=list)
    samples_seen: int = 0
    adam: AdamState | None = None


def sample_positives(graph: Graph, n: int, rng: np.random.Generator, mode: str = "uniform-edges") -> np.ndarray:
    """Draw ``n`` positive links as an ``(n, 2)`` array.

    ``uniform-edges`` picks edges uniformly and randomizes orientation;
    ``m-weighted`` picks a non-isolated node uniformly, then a neighbour
    according to its row of the normalized adjacency.
    """
    if graph.n_edges == 0:
        raise ValueError("cannot sample positives from an edgeless graph")
    if mode == "uniform-edges":
        picked = graph.edges[rng.integers(0, graph.n_edges, size=n)]
        flip = rng.random(n) < 0.5
        out = picked.copy()
        out[flip] = picked[flip][:, ::-1]
        return out
    if mode == "m-weighted":
        M = graph.norm_adjacency
        sources = np.flatnonzero(np.diff(M.indptr) > 0)
        us = sources[rng.integers(0, len(sources), size=n)]
        out = np.empty((n, 2), dtype=np.int64)
        for r, u in enumerate(us):
            lo, hi = M.indptr[u], M.indptr[u + 1]
            j = np.searchsorted(np.cumsum(M.data[lo:hi]), rng.random() * M.data[lo:hi].sum(), side="right")
            out[r] = u, M.indices[lo + min(j, hi - lo - 1)]
        return out
    raise ValueError(f"unknown sampling mode {mode!r}")


def sample_positive(graph: Graph, rng: np.random.Generator) -> tuple[int, int]:
    u, v = sample_positives(graph, 1, rng)[0]
    return int(u), int(v)


def sample_negatives(k: int, n_nodes: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` node ids i.i.d. uniform over ``0..n_nodes-1``; collisions are kept."""
    if n_nodes < 1 or k < 1:
        raise ValueError("need n_nodes >= 1 and k >= 1")
    return rng.integers(0, n_nodes, size=k)


def adam_step(params: ModelParams, grads: ParamGrads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected ADAM update, applied in place to ``params`` and ``state``."""
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at ADAM step {state.t + 1}")
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for P, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        P -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _batch_step(corpus, table, params, us, vs, zs, cfg):
    """Loss and mean gradients for a batch of positives and their negatives."""
    nodes, inverse = np.unique(np.concatenate([us, vs, zs.ravel()]), return_inverse=True)
    b = len(us)
    iu, iv, iz = inverse[:b], inverse[b:2 * b], inverse[2 * b:].reshape(zs.shape)
    stack = DocStack.from_tokens([corpus.docs[n] for n in nodes], table, params)
    pairs = list(zip(iu, iv))
    labels = [1] * b
    for col in range(zs.shape[1]):
        pairs.extend(zip(iu, iz[:, col]))
        labels.extend([0] * b)
    weights = np.full(len(pairs), 1.0 / b)
    return stack.loss_and_grads(pairs, labels, weights, pooling=cfg.pooling)


def train(corpus: Corpus, graph: Graph, embeddings: EmbeddingTable, cfg: TrainConfig,
          params: ModelParams | None = None) -> tuple[ModelParams, TrainTrace]:
    """Fit the projections on ``graph``'s links.

    Each batch draws positives, then ``k`` negatives per positive uniformly
    among ``graph.nodes``; a negative keeps the positive's u document and
    swaps v for the noise node.  ``params`` defaults to ``init_params``
    with ``cfg.seed``.
    """
    if embeddings.vectors.shape[0] != corpus.vocab.size:
        raise ValueError("embedding table does not match the corpus vocabulary")
    table = np.ascontiguousarray(embeddings.vectors, dtype=np.float64)
    params = init_params(embeddings.dim, cfg.seed) if params is None else params.copy()
    state = AdamState.zeros_like(params)
    trace = TrainTrace(adam=state)
    rng = np.random.default_rng([cfg.seed, 2])
    n_batches = math.ceil(cfg.n_pairs / cfg.batch_size)
    for batch in range(n_batches):
        b = min(cfg.batch_size, cfg.n_pairs - batch * cfg.batch_size)
        pos = sample_positives(graph, b, rng, cfg.sampling)
        zs = graph.nodes[sample_negatives(b * cfg.k, len(graph.nodes), rng)].reshape(b, cfg.k)
        loss, grads = _batch_step(corpus, table, params, pos[:, 0], pos[:, 1], zs, cfg)
        adam_step(params, grads, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        trace.losses.append(loss)
        trace.samples_seen += b
        if (batch + 1) % 500 == 0:
            logger.info("batch %d/%d mean loss %.4f", batch + 1, n_batches,
                        float(np.mean(trace.losses[-500:])))
    return params, trace


def save_trace(trace: TrainTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("batch_index\tmean_loss\n")
        for i, loss in enumerate(trace.losses):
            fh.write(f"{i}\t{loss!r}\n")
