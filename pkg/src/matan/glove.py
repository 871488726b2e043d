"""GloVe word vectors trained from within-document co-occurrences."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .corpus import EMPTY_ID, Corpus, Vocab

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoocTable:
    """Symmetric sparse co-occurrence counts in COO form.

    Both orientations of every pair are stored; diagonal entries and the
    EMPTY token never appear.
    """

    size: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict[tuple[int, int], float]:
        return {(int(a), int(b)): float(x) for a, b, x in zip(self.rows, self.cols, self.values)}

    def entry(self, a: int, b: int) -> float:
        hit = np.flatnonzero((self.rows == a) & (self.cols == b))
        return float(self.values[hit[0]]) if len(hit) else 0.0


def count_cooccurrences(corpus: Corpus, window: int = 5, nodes=None) -> CoocTable:
    """Count ``1/d``-weighted co-occurrences of tokens at distance ``d <= window``.

    Windows never cross document boundaries.  ``nodes`` restricts counting
    to a subset of documents (e.g. training-visible nodes).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    size = corpus.vocab.size
    node_ids = range(corpus.n_nodes) if nodes is None else sorted(int(n) for n in nodes)
    docs = [corpus.docs[n] for n in node_ids]
    if not docs:
        return CoocTable(size, *_empty_coo())
    tokens = np.concatenate(docs)
    doc_of = np.repeat(np.arange(len(docs)), [len(d) for d in docs])

    keys, weights = [], []
    for d in range(1, window + 1):
        if d >= len(tokens):
            break
        a, b = tokens[:-d], tokens[d:]
        ok = (doc_of[:-d] == doc_of[d:]) & (a != b) & (a != EMPTY_ID) & (b != EMPTY_ID)
        a, b = a[ok], b[ok]
        # interleave both orientations so (a,b) and (b,a) sum identical sequences
        keys.append(np.column_stack([a * size + b, b * size + a]).ravel())
        weights.append(np.full(2 * len(a), 1.0 / d))
    if not keys:
        return CoocTable(size, *_empty_coo())
    keys = np.concatenate(keys)
    weights = np.concatenate(weights)
    uniq, inverse = np.unique(keys, return_inverse=True)
    values = np.bincount(inverse, weights=weights, minlength=len(uniq))
    return CoocTable(size, uniq // size, uniq % size, values)


def _empty_coo():
    return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)


def glove_weight(x, x_max: float = 10.0, alpha: float = 0.75):
    """Weighting ``(x/x_max)**alpha`` clipped at 1; works on scalars and arrays."""
    ratio = np.minimum(np.asarray(x, dtype=np.float64) / x_max, 1.0)
    out = ratio**alpha
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class EmbeddingTable:
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def lookup(self, token_ids) -> np.ndarray:
        return self.vectors[token_ids]


@dataclass
class GloveState:
    W: np.ndarray
    Wc: np.ndarray
    b: np.ndarray
    bc: np.ndarray
    gW: np.ndarray
    gWc: np.ndarray
    gb: np.ndarray
    gbc: np.ndarray

    @classmethod
    def init(cls, size: int, dim: int, seed: int) -> "GloveState":
        rng = np.random.default_rng(seed)

        def uni(*shape):
            return (rng.random(shape) - 0.5) / dim

        return cls(
            uni(size, dim), uni(size, dim), uni(size), uni(size),
            np.ones((size, dim)), np.ones((size, dim)), np.ones(size), np.ones(size),
        )

    def vectors(self) -> np.ndarray:
        return self.W + self.Wc


def fit_glove_state(cooc: CoocTable, dim: int, epochs: int, lr: float, seed: int,
                    x_max: float = 10.0, alpha: float = 0.75) -> tuple[GloveState, list[float]]:
    """Run AdaGrad over ``cooc`` and return the raw state and per-epoch mean cost.

    Entries are visited in a fresh seeded permutation every epoch.
    """
    if len(cooc) == 0:
        raise ValueError("co-occurrence table is empty")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    state = GloveState.init(cooc.size, dim, seed)
    rng = np.random.default_rng([seed, 1])
    rows = np.ascontiguousarray(cooc.rows, dtype=np.int64)
    cols = np.ascontiguousarray(cooc.cols, dtype=np.int64)
    logx = np.log(cooc.values)
    fx = np.asarray(glove_weight(cooc.values, x_max, alpha), dtype=np.float64)
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(len(cooc)).astype(np.int64)
        cost = kernels.glove_epoch(
            state.W, state.Wc, state.b, state.bc, state.gW, state.gWc, state.gb, state.gbc,
            rows, cols, logx, fx, order, lr,
        )
        if not math.isfinite(cost):
            raise FloatingPointError(f"GloVe loss became non-finite at epoch {epoch}")
        losses.append(cost / len(cooc))
        logger.debug("glove epoch %d cost %.6f", epoch, losses[-1])
    return state, losses


def train_glove(
    cooc: CoocTable,
    dim: int = 256,
    epochs: int = 50,
    lr: float = 0.05,
    seed: int = 0,
    x_max: float = 10.0,
    alpha: float = 0.75,
    return_losses: bool = False,
):
    """Fit GloVe vectors to ``cooc``; the table holds ``w + w_context`` per token.

    Rows of tokens with no co-occurrence entry (EMPTY included) are zero.
    With ``return_losses`` the per-epoch mean weighted cost is returned too.
    """
    state, losses = fit_glove_state(cooc, dim, epochs, lr, seed, x_max, alpha)
    vectors = state.vectors()
    seen = np.zeros(cooc.size, dtype=bool)
    seen[cooc.rows] = True
    vectors[~seen] = 0.0
    table = EmbeddingTable(vectors)
    return (table, losses) if return_losses else table


def save_embeddings(table: EmbeddingTable, vocab: Vocab, path) -> None:
    """Write ``<token> <f1> ... <fD>`` lines; the EMPTY row is not written."""
    with open(path, "w", encoding="utf-8") as fh:
        for tid in range(1, len(table)):
            vals = " ".join(repr(x) for x in table.vectors[tid].tolist())
            fh.write(f"{vocab.string_of[tid]} {vals}\n")


def load_embeddings(path, vocab: Vocab) -> EmbeddingTable:
    """Read a text embedding file into a table aligned with ``vocab``.

    Vocabulary tokens absent from the file get zero vectors.
    """
    rows: dict[int, np.ndarray] = {}
    dim = None
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(x) for x in parts[1:]])
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            tid = vocab.token_of.get(parts[0])
            if tid is None or tid == EMPTY_ID:
                skipped += 1
                continue
            rows[tid] = vec
    if dim is None or dim == 0:
        raise ValueError(f"{path}: no embedding vectors")
    if skipped:
        logger.warning("%s: skipped %d tokens not in the vocabulary", path, skipped)
    vectors = np.zeros((vocab.size, dim))
    for tid, vec in rows.items():
        vectors[tid] = vec
    return EmbeddingTable(vectors)
