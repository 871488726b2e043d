"""Planted-partition document networks with known link structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Graph, build_corpus
from .glove import EmbeddingTable


@dataclass
class PlantedNetwork:
    corpus: Corpus
    graph: Graph
    embeddings: EmbeddingTable
    clusters: np.ndarray


def planted_network(
    n_nodes: int = 200,
    n_clusters: int = 2,
    avg_degree: float = 8.0,
    topic_words: int = 20,
    filler_words: int = 50,
    doc_topic: int = 6,
    doc_filler: int = 6,
    dim: int = 16,
    topic_scale: float = 1.0,
    filler_scale: float = 3.0,
    seed: int = 0,
) -> PlantedNetwork:
    """Clustered corpus whose links stay inside clusters.

    Each cluster owns a topic vocabulary whose word vectors sit near a
    cluster centroid in the first ``n_clusters`` coordinates; a filler
    vocabulary shared by every cluster has large random vectors in the
    remaining coordinates.  Documents mix both, so raw vector similarity is
    dominated by filler and a model must learn to look past it.
    """
    if dim <= n_clusters:
        raise ValueError("dim must exceed n_clusters")
    rng = np.random.default_rng(seed)
    clusters = np.arange(n_nodes) % n_clusters
    records = []
    for node in range(n_nodes):
        c = clusters[node]
        words = [f"t{c}x{j}" for j in rng.integers(0, topic_words, doc_topic)]
        words += [f"f{j}" for j in rng.integers(0, filler_words, doc_filler)]
        rng.shuffle(words)
        records.append((f"n{node}", " ".join(words)))
    corpus = build_corpus(records, min_count=1, max_doc_len=doc_topic + doc_filler)

    vectors = np.zeros((corpus.vocab.size, dim))
    for tok, tid in corpus.vocab.token_of.items():
        if tok.startswith("t"):
            c = int(tok[1:tok.index("x")])
            vectors[tid, c] = topic_scale
            vectors[tid, :n_clusters] += 0.1 * topic_scale * rng.standard_normal(n_clusters)
        elif tok.startswith("f"):
            vectors[tid, n_clusters:] = filler_scale * rng.standard_normal(dim - n_clusters)

    n_edges = int(round(avg_degree * n_nodes / 2))
    edges: set[tuple[int, int]] = set()
    while len(edges) < n_edges:
        a, b = (int(x) for x in rng.integers(0, n_nodes, 2))
        if a != b and clusters[a] == clusters[b]:
            edges.add((min(a, b), max(a, b)))
    graph = Graph(n_nodes, np.array(sorted(edges), dtype=np.int64))
    return PlantedNetwork(corpus, graph, EmbeddingTable(vectors), clusters)
