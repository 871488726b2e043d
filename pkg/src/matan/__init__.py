"""Mutual attention for text-attributed networks (MATAN).

Learns a textual similarity between documents from the links of a
document network and evaluates it on link prediction.
"""

from .attention import (
    ModelParams,
    ParamGrads,
    init_params,
    load_model,
    loss_and_grads,
    mutual_embed,
    pair_score,
    save_model,
    sdpa,
)
from .corpus import Corpus, Graph, Vocab, load_documents, load_edges, normalized_adjacency, tokenize
from .evaluation import (
    GloveConfig,
    ScoredSet,
    evaluate_edges_hidden,
    evaluate_nodes_hidden,
    roc_auc,
    sample_non_edges,
    split_edges,
    split_nodes,
)
from .glove import (
    CoocTable,
    EmbeddingTable,
    count_cooccurrences,
    glove_weight,
    load_embeddings,
    save_embeddings,
    train_glove,
)
from .kernels import NAME as KERNEL_BACKEND
from .trainer import AdamState, TrainConfig, TrainTrace, adam_step, sample_negatives, sample_positive, train

__version__ = "0.1.0"
