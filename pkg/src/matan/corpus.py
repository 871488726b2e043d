"""Document and link loading for text-attributed networks.

Documents are read from ``<external-id>\\t<text>`` lines and edges from
``<external-id>\\t<external-id>`` lines.  Token id 0 is reserved for the
EMPTY pseudo-token given to documents that lose every token to the
vocabulary filter.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

EMPTY_TOKEN = "<empty>"
EMPTY_ID = 0

_SPLIT_RE = re.compile(r"[^\w]|_")


class CorpusFormatError(ValueError):
    """Raised on malformed document or edge files."""


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every non-alphanumeric character.

    >>> tokenize("Graph-based Learning.")
    ['graph', 'based', 'learning']
    """
    return [piece for piece in _SPLIT_RE.split(text.lower()) if piece]


@dataclass(frozen=True)
class Vocab:
    token_of: dict[str, int]
    string_of: list[str]
    counts: np.ndarray

    @property
    def size(self) -> int:
        return len(self.string_of)

    def __len__(self) -> int:
        return len(self.string_of)

    def __contains__(self, token: str) -> bool:
        return token in self.token_of

    @classmethod
    def build(cls, counter: Counter, min_count: int) -> "Vocab":
        # descending count, ties broken alphabetically, so ids are reproducible
        kept = sorted(
            (tok for tok, c in counter.items() if c >= min_count and tok != EMPTY_TOKEN),
            key=lambda tok: (-counter[tok], tok),
        )
        strings = [EMPTY_TOKEN] + kept
        counts = np.array([0] + [counter[t] for t in kept], dtype=np.int64)
        return cls({t: i for i, t in enumerate(strings)}, strings, counts)


@dataclass(frozen=True)
class Corpus:
    """Node-indexed token-id documents.

    ``docs[n]`` is an int64 array of token ids for node ``n``; ``raw_ids``
    maps the external string id to the dense node id and ``node_names`` is
    its inverse.
    """

    docs: list[np.ndarray]
    raw_ids: dict[str, int]
    node_names: list[str]
    vocab: Vocab
    max_doc_len: int = 300

    @property
    def n_nodes(self) -> int:
        return len(self.docs)

    def doc_tokens(self, node: int) -> list[str]:
        return [self.vocab.string_of[t] for t in self.docs[node]]


def _read_records(path: Path, n_fields: int, what: str):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t", n_fields - 1)
            if len(parts) != n_fields:
                raise CorpusFormatError(f"{path}:{lineno}: malformed {what} line (expected a TAB separator)")
            yield lineno, parts


def build_corpus(
    records: list[tuple[str, str]], min_count: int = 5, max_doc_len: int = 300
) -> Corpus:
    """Tokenize ``(external_id, text)`` records into a :class:`Corpus`.

    Documents are head-truncated to ``max_doc_len`` tokens before counting,
    so re-serializing a corpus and loading it again reproduces it exactly.
    """
    raw_ids: dict[str, int] = {}
    names: list[str] = []
    token_docs = []
    for ext_id, text in records:
        if ext_id in raw_ids:
            raise CorpusFormatError(f"duplicate document id {ext_id!r}")
        raw_ids[ext_id] = len(names)
        names.append(ext_id)
        token_docs.append(tokenize(text)[:max_doc_len])

    counter = Counter(tok for doc in token_docs for tok in doc)
    vocab = Vocab.build(counter, min_count)
    docs = []
    for toks in token_docs:
        ids = [vocab.token_of[t] for t in toks if t in vocab.token_of]
        docs.append(np.array(ids or [EMPTY_ID], dtype=np.int64))
    return Corpus(docs, raw_ids, names, vocab, max_doc_len)


def load_documents(path, min_count: int = 5, max_doc_len: int = 300) -> Corpus:
    path = Path(path)
    records = []
    seen = set()
    for lineno, (ext_id, text) in _read_records(path, 2, "document"):
        if ext_id in seen:
            raise CorpusFormatError(f"{path}:{lineno}: duplicate document id {ext_id!r}")
        seen.add(ext_id)
        records.append((ext_id, text))
    return build_corpus(records, min_count=min_count, max_doc_len=max_doc_len)


def save_documents(corpus: Corpus, path) -> None:
    """Write the (filtered, truncated) token sequences back as a documents file."""
    with open(path, "w", encoding="utf-8") as fh:
        for node, name in enumerate(corpus.node_names):
            toks = [] if _is_empty(corpus.docs[node]) else corpus.doc_tokens(node)
            fh.write(f"{name}\t{' '.join(toks)}\n")


def _is_empty(doc: np.ndarray) -> bool:
    return len(doc) == 1 and doc[0] == EMPTY_ID


def normalized_adjacency(adjacency: sp.spmatrix) -> sp.csr_matrix:
    """Row-normalize ``adjacency``; rows of isolated nodes stay zero."""
    adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
    deg = np.asarray(adjacency.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ adjacency)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph over a dense node-id space.

    ``nodes`` lists the member node ids (all of ``0..n_nodes-1`` unless the
    graph is an induced subgraph); ``edges`` is an ``(E, 2)`` array of
    canonical pairs ``u < v``, sorted and unique.
    """

    n_nodes: int
    edges: np.ndarray
    nodes: np.ndarray = field(default=None)
    adjacency: sp.csr_matrix = field(default=None, repr=False)
    norm_adjacency: sp.csr_matrix = field(default=None, repr=False)

    def __post_init__(self):
        edges = _canonical_edges(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "edges", edges)
        if self.nodes is None:
            object.__setattr__(self, "nodes", np.arange(self.n_nodes, dtype=np.int64))
        else:
            object.__setattr__(self, "nodes", np.sort(np.asarray(self.nodes, dtype=np.int64)))
        n = self.n_nodes
        ones = np.ones(2 * len(edges))
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sp.csr_matrix((ones, (rows, cols)), shape=(n, n))
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "norm_adjacency", normalized_adjacency(adj))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges.tolist()))

    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def induced(self, nodes) -> "Graph":
        nodes = np.asarray(nodes, dtype=np.int64)
        member = np.zeros(self.n_nodes, dtype=bool)
        member[nodes] = True
        keep = member[self.edges[:, 0]] & member[self.edges[:, 1]]
        return Graph(self.n_nodes, self.edges[keep], nodes=nodes)


def _canonical_edges(edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    return np.unique(edges, axis=0)


def load_edges(path, corpus: Corpus) -> Graph:
    path = Path(path)
    pairs = []
    unknown = 0
    for _, (a, b) in _read_records(path, 2, "edge"):
        a, b = a.strip(), b.strip()
        if a not in corpus.raw_ids or b not in corpus.raw_ids:
            unknown += 1
            continue
        pairs.append((corpus.raw_ids[a], corpus.raw_ids[b]))
    if unknown:
        logger.warning("%s: skipped %d edges with unknown document ids", path, unknown)
    graph = Graph(corpus.n_nodes, np.array(pairs, dtype=np.int64).reshape(-1, 2))
    if graph.n_edges == 0:
        raise CorpusFormatError(f"{path}: no usable edges (nothing to train on)")
    return graph


def save_edges(graph: Graph, corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges.tolist():
            fh.write(f"{corpus.node_names[u]}\t{corpus.node_names[v]}\n")


def convert_linqs_cora(cora_dir, documents_out, edges_out) -> tuple[int, int]:
    """Convert the LINQS Cora release into documents/edges files.

    ``cora.content`` rows are ``<paper_id> <1433 binary word flags> <label>``;
    the distribution carries no raw text, so each present word attribute
    becomes the token ``w<index>`` in ascending index order.  ``cora.cites``
    rows are ``<cited> <citing>`` and are written as-is (direction is
    dropped on load).  Returns ``(n_documents, n_edge_lines)``.
    """
    cora_dir = Path(cora_dir)
    n_docs = 0
    with open(cora_dir / "cora.content", encoding="utf-8") as src, open(
        documents_out, "w", encoding="utf-8"
    ) as dst:
        for line in src:
            fields = line.split()
            if not fields:
                continue
            flags = fields[1:-1]
            words = [f"w{i}" for i, flag in enumerate(flags) if flag != "0"]
            dst.write(f"{fields[0]}\t{' '.join(words)}\n")
            n_docs += 1
    n_edges = 0
    with open(cora_dir / "cora.cites", encoding="utf-8") as src, open(
        edges_out, "w", encoding="utf-8"
    ) as dst:
        for line in src:
            fields = line.split()
            if len(fields) == 2:
                dst.write(f"{fields[0]}\t{fields[1]}\n")
                n_edges += 1
    return n_docs, n_edges
