"""Edges-hidden and nodes-hidden link prediction with exact ROC AUC."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .attention import DocStack, ModelParams, init_params
from .corpus import Corpus, Graph
from .glove import EmbeddingTable, count_cooccurrences, train_glove
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)


@dataclass
class GloveConfig:
    dim: int = 256
    window: int = 5
    x_max: float = 10.0
    alpha: float = 0.75
    epochs: int = 50
    lr: float = 0.05
    # train word vectors on every document, test ones included (as the
    # original protocol did); off by default for nodes-hidden
    full_corpus: bool = False


@dataclass
class EdgeSplit:
    train_graph: Graph
    test_edges: np.ndarray


@dataclass
class NodeSplit:
    train_graph: Graph
    test_graph: Graph


@dataclass
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.shape != self.labels.shape:
            raise ValueError("scores and labels differ in length")


def split_edges(graph: Graph, train_fraction: float, rng: np.random.Generator) -> EdgeSplit:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(train_fraction * graph.n_edges))
    if n_train == 0 or n_train == graph.n_edges:
        raise ValueError(
            f"split of {graph.n_edges} edges at {train_fraction} leaves an empty side")
    perm = rng.permutation(graph.n_edges)
    train_edges = graph.edges[np.sort(perm[:n_train])]
    test_edges = graph.edges[np.sort(perm[n_train:])]
    return EdgeSplit(Graph(graph.n_nodes, train_edges, nodes=graph.nodes), test_edges)


def split_nodes(graph: Graph, train_fraction: float, rng: np.random.Generator) -> NodeSplit:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    if len(graph.nodes) < 2:
        raise ValueError("need at least two nodes to split")
    perm = rng.permutation(graph.nodes)
    n_train = int(round(train_fraction * len(perm)))
    return _node_split(graph, perm[:n_train], perm[n_train:])


def _node_split(graph: Graph, train_nodes, test_nodes) -> NodeSplit:
    train_g = graph.induced(train_nodes)
    test_g = graph.induced(test_nodes)
    for name, g in (("train", train_g), ("test", test_g)):
        if g.n_edges == 0:
            raise ValueError(
                f"node split leaves the {name} graph without edges "
                f"({len(train_nodes)} train / {len(test_nodes)} test nodes)")
    return NodeSplit(train_g, test_g)


def sample_non_edges(graph: Graph, n: int, rng: np.random.Generator, restrict_to=None) -> np.ndarray:
    """``n`` distinct unordered node pairs absent from ``graph``.

    Pairs are uniform over eligible pairs among ``restrict_to`` (default
    all nodes of ``graph``), sampled by rejection, or by enumeration when
    the eligible set is small relative to ``n``.
    """
    nodes = np.sort(np.asarray(graph.nodes if restrict_to is None else restrict_to, dtype=np.int64))
    m = len(nodes)
    member = np.zeros(graph.n_nodes, dtype=bool)
    member[nodes] = True
    inside = int(np.sum(member[graph.edges[:, 0]] & member[graph.edges[:, 1]]))
    available = m * (m - 1) // 2 - inside
    if n > available:
        raise ValueError(f"requested {n} non-edges but only {available} exist")
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = graph.edge_set()
    if 2 * n > available:
        iu, ju = np.triu_indices(m, k=1)
        cand = [(a, b) for a, b in zip(nodes[iu].tolist(), nodes[ju].tolist()) if (a, b) not in edges]
        pick = rng.choice(len(cand), size=n, replace=False)
        return np.array([cand[i] for i in np.sort(pick)], dtype=np.int64)
    chosen: dict[tuple[int, int], None] = {}
    while len(chosen) < n:
        draw = nodes[rng.integers(0, m, size=(2 * (n - len(chosen)) + 8, 2))]
        for a, b in draw.tolist():
            if a == b:
                continue
            pair = (a, b) if a < b else (b, a)
            if pair in edges or pair in chosen:
                continue
            chosen[pair] = None
            if len(chosen) == n:
                break
    return np.array(list(chosen), dtype=np.int64)


def roc_auc(scored: ScoredSet) -> float:
    """Mann-Whitney AUC: P(positive outscores negative), ties counted half."""
    labels = scored.labels
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0 or n_pos + n_neg != len(labels):
        raise ValueError("need binary labels with at least one positive and one negative")
    scores = scored.scores
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    # average 1-based ranks over tie groups; all values are multiples of 0.5
    starts = np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
    ends = np.r_[starts[1:], len(scores)]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(len(scores))
    ranks[order] = np.repeat(avg, ends - starts)
    u_stat = float(np.sum(ranks[labels == 1])) - n_pos * (n_pos + 1) / 2.0
    return u_stat / (n_pos * n_neg)


# pairs per scoring batch; bounds the attention buffer to a few MB for short docs
_SCORE_CHUNK = 256


def score_pairs(corpus: Corpus, embeddings: EmbeddingTable, params: ModelParams, pairs,
                pooling: str = "mean") -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    nodes, inverse = np.unique(pairs.ravel(), return_inverse=True)
    inverse = inverse.reshape(pairs.shape)
    stack = DocStack.from_tokens([corpus.docs[n] for n in nodes], embeddings.vectors, params)
    chunks = [stack.scores(inverse[a:a + _SCORE_CHUNK], pooling)
              for a in range(0, len(inverse), _SCORE_CHUNK)]
    return np.concatenate(chunks) if chunks else np.zeros(0)


def evaluate_pairs(corpus, embeddings, params, pos_pairs, neg_pairs, pooling="mean") -> float:
    scores = score_pairs(corpus, embeddings, params, np.concatenate([pos_pairs, neg_pairs]), pooling)
    labels = np.r_[np.ones(len(pos_pairs), np.int64), np.zeros(len(neg_pairs), np.int64)]
    return roc_auc(ScoredSet(scores, labels))


def fit_embeddings(corpus: Corpus, glove_cfg: GloveConfig, seed: int, nodes=None) -> EmbeddingTable:
    cooc = count_cooccurrences(corpus, glove_cfg.window, nodes=nodes)
    return train_glove(cooc, glove_cfg.dim, glove_cfg.epochs, glove_cfg.lr, seed,
                       glove_cfg.x_max, glove_cfg.alpha)


@dataclass
class RunResult:
    auc: float
    untrained_auc: float
    params: ModelParams = field(repr=False)
    losses: list = field(repr=False, default_factory=list)


def evaluate_edges_hidden(corpus: Corpus, graph: Graph, train_fraction: float,
                          train_cfg: TrainConfig, glove_cfg: GloveConfig | None = None,
                          seed: int = 0, embeddings: EmbeddingTable | None = None) -> RunResult:
    """Hide ``1 - train_fraction`` of the links, train on the rest, rank the hidden ones.

    Negatives are an equal number of pairs absent from the full edge set.
    Word vectors are fitted on all documents (every node is visible in this
    setting) unless ``embeddings`` is supplied.
    """
    rng = np.random.default_rng([seed, 10])
    split = split_edges(graph, train_fraction, rng)
    neg = sample_non_edges(graph, len(split.test_edges), rng)
    if embeddings is None:
        embeddings = fit_embeddings(corpus, glove_cfg or GloveConfig(), seed)
    return _train_and_score(corpus, split.train_graph, embeddings, train_cfg, seed,
                            split.test_edges, neg)


def evaluate_nodes_hidden(corpus: Corpus, graph: Graph, train_fraction: float,
                          train_cfg: TrainConfig, glove_cfg: GloveConfig | None = None,
                          seed: int = 0, embeddings: EmbeddingTable | None = None) -> RunResult:
    """Train on the subgraph induced by a node sample, predict links inside the rest.

    Negatives are non-edges among test nodes.  Word vectors see only the
    training documents unless ``glove_cfg.full_corpus`` is set.
    """
    glove_cfg = glove_cfg or GloveConfig()
    rng = np.random.default_rng([seed, 11])
    split = split_nodes(graph, train_fraction, rng)
    test_nodes = split.test_graph.nodes
    neg = sample_non_edges(graph, split.test_graph.n_edges, rng, restrict_to=test_nodes)
    if embeddings is None:
        visible = None if glove_cfg.full_corpus else split.train_graph.nodes
        embeddings = fit_embeddings(corpus, glove_cfg, seed, nodes=visible)
    return _train_and_score(corpus, split.train_graph, embeddings, train_cfg, seed,
                            split.test_graph.edges, neg)


def _train_and_score(corpus, train_graph, embeddings, train_cfg, seed, pos, neg) -> RunResult:
    cfg = replace(train_cfg, seed=seed)
    init = init_params(embeddings.dim, cfg.seed)
    untrained = evaluate_pairs(corpus, embeddings, init, pos, neg, cfg.pooling)
    params, trace = train(corpus, train_graph, embeddings, cfg, params=init)
    auc = evaluate_pairs(corpus, embeddings, params, pos, neg, cfg.pooling)
    logger.info("auc %.4f (untrained %.4f)", auc, untrained)
    return RunResult(auc, untrained, params, trace.losses)

