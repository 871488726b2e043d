import math

import numpy as np
import pytest

from matan.corpus import build_corpus


def sdpa_oracle(W_u, W_v, P_Q, P_K, P_V):
    """Straight-line evaluation of softmax(Q K^T / sqrt(D)) V with Python loops."""
    W_u, W_v = np.asarray(W_u).tolist(), np.asarray(W_v).tolist()
    P_Q, P_K, P_V = (np.asarray(P).tolist() for P in (P_Q, P_K, P_V))
    D = len(P_Q)

    def proj(rows, P):
        return [[sum(r[i] * P[i][j] for i in range(D)) for j in range(D)] for r in rows]

    Q, K, V = proj(W_u, P_Q), proj(W_v, P_K), proj(W_v, P_V)
    out = []
    for q in Q:
        logits = [sum(a * b for a, b in zip(q, k)) / math.sqrt(D) for k in K]
        top = max(logits)
        w = [math.exp(x - top) for x in logits]
        z = sum(w)
        w = [x / z for x in w]
        out.append([sum(w[j] * V[j][c] for j in range(len(V))) for c in range(D)])
    return np.array(out)


def auc_oracle(scores, labels):
    """O(n^2) pairwise count: (concordant + 0.5 * tied) / (n_pos * n_neg)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    num = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                num += 1.0
            elif p == n:
                num += 0.5
    return num / (len(pos) * len(neg))


def central_differences(f, params, h=1e-5):
    """Numerical gradient of scalar ``f(params)`` for each of P_Q, P_K, P_V."""
    grads = []
    for name in ("P_Q", "P_K", "P_V"):
        base = getattr(params, name)
        G = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = params.copy(), params.copy()
            getattr(plus, name)[idx] += h
            getattr(minus, name)[idx] -= h
            G[idx] = (f(plus) - f(minus)) / (2 * h)
        grads.append(G)
    return grads


def max_relative_error(analytic, numeric, floor=1e-7):
    err = 0.0
    for A, N in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(A), np.abs(N)), floor)
        err = max(err, float(np.max(np.abs(A - N) / denom)))
    return err


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_corpus():
    records = [
        ("a", "graph learning with attention"),
        ("b", "graph neural networks"),
        ("c", "attention is all you need"),
        ("d", "learning word vectors"),
    ]
    return build_corpus(records, min_count=1)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line and fail the test when it is negative."""

    def record(number, name, passed, detail):
        line = f"criterion {number} [{name}]: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
