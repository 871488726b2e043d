"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--dim 256] [--doc-len 20] [--entries 20000]

Both backends run the same inputs; the script also reports the largest
difference between their results.
"""

import argparse
import time

import numpy as np

from matan import _pykernels
from matan.attention import DocStack, init_params

try:
    from matan import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def glove_case(backend, size, dim, n, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.integers(1, size, n).astype(np.int64)
    cols = ((rows + rng.integers(1, size - 1, n)) % size).astype(np.int64)
    x = rng.uniform(0.2, 20, n)
    state = [rng.normal(size=(size, dim)) * 0.01, rng.normal(size=(size, dim)) * 0.01,
             np.zeros(size), np.zeros(size), np.ones((size, dim)), np.ones((size, dim)),
             np.ones(size), np.ones(size)]
    order = rng.permutation(n).astype(np.int64)

    def run():
        s = [a.copy() for a in state]
        backend.glove_epoch(*s, rows, cols, np.log(x), np.minimum(x / 10, 1) ** 0.75, order, 0.05)
        return s[0]

    return run


def pair_case(backend, dim, doc_len, n_pairs, seed=0):
    """Attention forward and backward over a batch of pairs."""
    rng = np.random.default_rng(seed)
    params = init_params(dim, seed)
    docs = [rng.normal(size=(doc_len, dim)) for _ in range(64)]
    st = DocStack(docs, params)
    pairs = rng.integers(0, 64, size=(n_pairs, 2)).astype(np.int64)
    dP1 = rng.normal(size=(n_pairs, dim))
    dP2 = rng.normal(size=(n_pairs, dim))
    A_off = _pykernels.attention_offsets(st.lengths, pairs)

    def run():
        A_flat = np.empty(int(A_off[-1]))
        P1 = np.empty((n_pairs, dim))
        P2 = np.empty_like(P1)
        backend.attend_pairs(st.X, st.Y, st.W, st.offsets, st.lengths, pairs, False, P1, P2, A_flat, A_off)
        dX, dY = np.zeros_like(st.X), np.zeros_like(st.Y)
        backend.attend_pairs_backward(A_flat, A_off, st.X, st.Y, st.W, st.offsets, st.lengths, pairs,
                                      False, dP1, dP2, dX, dY)
        return np.concatenate([P1, P2, dX, dY])

    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--doc-len", type=int, default=20)
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--entries", type=int, default=20000)
    ap.add_argument("--vocab", type=int, default=1500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")

    cases = {
        f"glove_epoch ({args.entries} entries, dim {args.dim})":
            lambda b: glove_case(b, args.vocab, args.dim, args.entries),
        f"attend_pairs fwd+bwd ({args.pairs} pairs, L={args.doc_len}, dim {args.dim})":
            lambda b: pair_case(b, args.dim, args.doc_len, args.pairs),
    }
    for label, make in cases.items():
        times, outs = {}, {}
        for name, backend in backends:
            times[name], outs[name] = bench(make(backend), args.repeat)
        line = "  ".join(f"{n}={t * 1e3:9.2f} ms" for n, t in times.items())
        if len(times) == 2:
            diff = float(np.max(np.abs(outs["python"] - outs["cython"])))
            line += f"  speedup={times['python'] / times['cython']:6.1f}x  max|diff|={diff:.2e}"
        print(f"{label:55s} {line}")


if __name__ == "__main__":
    main()
