"""Command-line entry point: ``matan <subcommand> [flags]``.

Settings come from built-in defaults, then an optional flat ``key=value``
config file (``--config``), then explicit flags.  The effective settings
are written to ``<out>/config.txt`` on every run.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import load_model, save_model
from .corpus import convert_linqs_cora, load_documents, load_edges, save_documents, save_edges
from .evaluation import (
    GloveConfig,
    evaluate_edges_hidden,
    evaluate_nodes_hidden,
    fit_embeddings,
    score_pairs,
)
from .glove import count_cooccurrences, load_embeddings, save_embeddings, train_glove
from .trainer import SAMPLING_MODES, TrainConfig, save_trace, train

logger = logging.getLogger("matan")

SUBCOMMANDS = ("prepare", "train-glove", "train", "eval-edges", "eval-nodes", "score")


@dataclass(frozen=True)
class Option:
    name: str
    type: type
    default: object
    help: str
    commands: tuple = SUBCOMMANDS


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


_EVAL = ("eval-edges", "eval-nodes")
_GLOVE = ("train-glove", "train") + _EVAL
_TRAIN = ("train",) + _EVAL
_CORPUS = ("prepare", "train-glove", "train", "eval-edges", "eval-nodes", "score")

# defaults mirror the published protocol: 256-d GloVe (x_max 10, window 5,
# 50 epochs), one negative per positive and 1e5 sampled pairs
OPTIONS = [
    Option("documents", str, None, "documents file: <id>\\t<text> per line", _CORPUS),
    Option("edges", str, None, "edges file: <id>\\t<id> per line", ("prepare", "train") + _EVAL),
    Option("cora_dir", str, None, "LINQS Cora directory (cora.content, cora.cites) to convert", ("prepare",)),
    Option("embeddings", str, None, "word vector file; trained with GloVe when omitted", ("train", "score") + _EVAL),
    Option("model", str, None, "model file to score with", ("score",)),
    Option("out", str, "matan_out", "output directory"),
    Option("min_count", int, 5, "drop tokens rarer than this", _CORPUS),
    Option("max_doc_len", int, 300, "keep the first N tokens of each document", _CORPUS),
    Option("dim", int, 256, "word vector / projection dimension", _GLOVE),
    Option("window", int, 5, "co-occurrence window", _GLOVE),
    Option("x_max", float, 10.0, "GloVe weighting cutoff", _GLOVE),
    Option("glove_epochs", int, 50, "GloVe epochs", _GLOVE),
    Option("glove_lr", float, 0.05, "GloVe AdaGrad learning rate", _GLOVE),
    Option("k", int, 1, "negatives per positive", _TRAIN),
    Option("n_pairs", int, 100_000, "positive pairs sampled", _TRAIN),
    Option("lr", float, 1e-3, "ADAM learning rate", _TRAIN),
    Option("batch_size", int, 32, "pairs per ADAM step", _TRAIN),
    Option("pooling", str, "mean", "mean|sum pooling of attention rows", _TRAIN + ("score",)),
    Option("sampling", str, "uniform-edges", "|".join(SAMPLING_MODES), _TRAIN),
    Option("seed", int, 0, "random seed", _GLOVE),
    Option("seeds", str, None, "comma-separated split seeds (overrides --seed)", _EVAL),
    Option("train_fraction", str, "0.5", "comma-separated training fractions", _EVAL),
    Option("full_corpus_embeddings", _bool, False, "fit word vectors on all documents, test ones included", _EVAL),
    Option("save_models", _bool, False, "write one model file per evaluation run", _EVAL),
    Option("u", str, None, "first document id", ("score",)),
    Option("v", str, None, "second document id", ("score",)),
]
_BY_NAME = {o.name: o for o in OPTIONS}


def read_config_file(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            if key not in _BY_NAME:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for cmd in SUBCOMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="flat key=value file; flags override it")
        for opt in OPTIONS:
            if cmd in opt.commands:
                p.add_argument("--" + opt.name.replace("_", "-"), dest=opt.name, default=None,
                               help=f"{opt.help} (default: {opt.default})")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Effective settings for ``args.command``: defaults < config file < flags."""
    cfg = {o.name: o.default for o in OPTIONS if args.command in o.commands}
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key in cfg:
                cfg[key] = value
    for name in cfg:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    for name, value in cfg.items():
        if value is not None:
            cfg[name] = _BY_NAME[name].type(value)
    return cfg


def _require(cfg, *names):
    for name in names:
        if cfg.get(name) is None:
            raise ValueError(f"--{name.replace('_', '-')} is required")
        if name in ("documents", "edges", "embeddings", "model", "cora_dir") and not Path(cfg[name]).exists():
            raise FileNotFoundError(f"input not found: {cfg[name]}")


def _write_config(cfg, out: Path, command: str) -> None:
    with open(out / "config.txt", "w", encoding="utf-8") as fh:
        fh.write(f"command={command}\n")
        for key in sorted(cfg):
            if cfg[key] is not None:
                fh.write(f"{key}={cfg[key]}\n")


def _glove_cfg(cfg) -> GloveConfig:
    return GloveConfig(dim=cfg["dim"], window=cfg["window"], x_max=cfg["x_max"],
                       epochs=cfg["glove_epochs"], lr=cfg["glove_lr"],
                       full_corpus=cfg.get("full_corpus_embeddings", False))


def _train_cfg(cfg, seed) -> TrainConfig:
    return TrainConfig(k=cfg["k"], n_pairs=cfg["n_pairs"], lr=cfg["lr"], batch_size=cfg["batch_size"],
                       seed=seed, pooling=cfg["pooling"], sampling=cfg["sampling"])


def _corpus(cfg):
    return load_documents(cfg["documents"], min_count=cfg["min_count"], max_doc_len=cfg["max_doc_len"])


def cmd_prepare(cfg, out: Path) -> str:
    if cfg.get("cora_dir"):
        _require(cfg, "cora_dir")
        docs_path, edges_path = out / "raw_documents.tsv", out / "raw_edges.tsv"
        convert_linqs_cora(cfg["cora_dir"], docs_path, edges_path)
        cfg = dict(cfg, documents=str(docs_path), edges=str(edges_path))
    _require(cfg, "documents", "edges")
    corpus = _corpus(cfg)
    graph = load_edges(cfg["edges"], corpus)
    save_documents(corpus, out / "documents.tsv")
    save_edges(graph, corpus, out / "edges.tsv")
    with open(out / "vocab.tsv", "w", encoding="utf-8") as fh:
        for tid, (tok, count) in enumerate(zip(corpus.vocab.string_of, corpus.vocab.counts.tolist())):
            fh.write(f"{tid}\t{tok}\t{count}\n")
    n_empty = sum(1 for d in corpus.docs if len(d) == 1 and d[0] == 0)
    return (f"nodes={corpus.n_nodes} edges={graph.n_edges} vocab={corpus.vocab.size} "
            f"empty_docs={n_empty}")


def cmd_train_glove(cfg, out: Path) -> str:
    _require(cfg, "documents")
    corpus = _corpus(cfg)
    gcfg = _glove_cfg(cfg)
    cooc = count_cooccurrences(corpus, gcfg.window)
    table, losses = train_glove(cooc, gcfg.dim, gcfg.epochs, gcfg.lr, cfg["seed"], gcfg.x_max,
                                gcfg.alpha, return_losses=True)
    save_embeddings(table, corpus.vocab, out / "embeddings.txt")
    with open(out / "glove_loss.tsv", "w", encoding="utf-8") as fh:
        fh.write("epoch\tmean_cost\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i}\t{loss!r}\n")
    final = losses[-1] if losses else float("nan")
    return f"glove_entries={len(cooc)} final_cost={final:.6f}"


def _embeddings(cfg, corpus, out: Path):
    if cfg.get("embeddings"):
        _require(cfg, "embeddings")
        return load_embeddings(cfg["embeddings"], corpus.vocab)
    table = fit_embeddings(corpus, _glove_cfg(cfg), cfg["seed"])
    save_embeddings(table, corpus.vocab, out / "embeddings.txt")
    return table


def cmd_train(cfg, out: Path) -> str:
    _require(cfg, "documents", "edges")
    corpus = _corpus(cfg)
    graph = load_edges(cfg["edges"], corpus)
    table = _embeddings(cfg, corpus, out)
    params, trace = train(corpus, graph, table, _train_cfg(cfg, cfg["seed"]))
    save_model(params, out / "model.txt")
    save_trace(trace, out / "loss.tsv")
    tail = trace.losses[-max(1, len(trace.losses) // 10):] if trace.losses else [float("nan")]
    return f"batches={len(trace.losses)} final_loss={float(np.mean(tail)):.6f}"


def _cmd_eval(cfg, out: Path, task: str) -> str:
    _require(cfg, "documents", "edges")
    corpus = _corpus(cfg)
    graph = load_edges(cfg["edges"], corpus)
    fixed = None
    if cfg.get("embeddings"):
        _require(cfg, "embeddings")
        fixed = load_embeddings(cfg["embeddings"], corpus.vocab)
    fractions = _floats(cfg["train_fraction"])
    seeds = _ints(cfg["seeds"]) if cfg.get("seeds") else [cfg["seed"]]
    run = evaluate_edges_hidden if task == "edges-hidden" else evaluate_nodes_hidden
    gcfg = _glove_cfg(cfg)
    rows, summary = [], []
    for frac in fractions:
        aucs = []
        for seed in seeds:
            res = run(corpus, graph, frac, _train_cfg(cfg, seed), gcfg, seed=seed, embeddings=fixed)
            aucs.append(res.auc)
            rows.append((task, frac, str(seed), res.auc))
            logger.info("%s fraction=%s seed=%d auc=%.4f untrained=%.4f", task, frac, seed, res.auc,
                        res.untrained_auc)
            if cfg.get("save_models"):
                save_model(res.params, out / f"model_{task}_{frac}_{seed}.txt")
        mean = float(np.mean(aucs))
        std = float(np.std(aucs, ddof=1)) if len(aucs) > 1 else 0.0
        rows.append((task, frac, "mean", mean))
        rows.append((task, frac, "std", std))
        summary.append((task, frac, len(aucs), mean, std))
    with open(out / "results.tsv", "w", encoding="utf-8") as fh:
        fh.write("task\ttrain_fraction\tseed\tauc\n")
        for task_, frac, seed, auc in rows:
            fh.write(f"{task_}\t{frac!r}\t{seed}\t{auc!r}\n")
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("task\ttrain_fraction\tn_seeds\tmean_auc\tstd_auc\n")
        for task_, frac, n, mean, std in summary:
            fh.write(f"{task_}\t{frac!r}\t{n}\t{mean!r}\t{std!r}\n")
    means = ",".join(f"{m:.4f}" for *_, m, _ in summary)
    fracs = ",".join(f"{f:g}" for f in fractions)
    return f"auc={means} task={task} train_fraction={fracs} seeds={len(seeds)}"


def cmd_score(cfg, out: Path) -> str:
    _require(cfg, "documents", "embeddings", "model", "u", "v")
    corpus = _corpus(cfg)
    for name in ("u", "v"):
        if cfg[name] not in corpus.raw_ids:
            raise KeyError(f"unknown document id {cfg[name]!r}")
    table = load_embeddings(cfg["embeddings"], corpus.vocab)
    params = load_model(cfg["model"])
    if params.dim != table.dim:
        raise ValueError(f"model dim {params.dim} != embedding dim {table.dim}")
    pair = [[corpus.raw_ids[cfg["u"]], corpus.raw_ids[cfg["v"]]]]
    return repr(float(score_pairs(corpus, table, params, pair, cfg["pooling"])[0]))


COMMANDS = {
    "prepare": cmd_prepare,
    "train-glove": cmd_train_glove,
    "train": cmd_train,
    "eval-edges": lambda cfg, out: _cmd_eval(cfg, out, "edges-hidden"),
    "eval-nodes": lambda cfg, out: _cmd_eval(cfg, out, "nodes-hidden"),
    "score": cmd_score,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        _write_config(cfg, out, args.command)
        summary = COMMANDS[args.command](cfg, out)
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"matan {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
