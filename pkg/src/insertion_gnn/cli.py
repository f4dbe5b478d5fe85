"""Command-line surface.

Subcommands: synthesize, train, eval, cross, baseline, gradcheck.
Metrics go to stdout as key=value lines. Exit codes: 0 success,
1 validation/usage error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import data as datamod
from . import model as modelmod
from .baselines import (
    ALGORITHMS,
    init_pairwise_model,
    insert_by_coherence,
    order_pairs_from_problems,
    toposort_infer,
    toposort_train,
)
from .config import RunConfig, apply_overrides, load_config
from .errors import IO_ERRORS, VALIDATION_ERRORS, InsertionGnnError
from .graph import build_insertion_graph
from .harness import cross_domain, evaluate, evaluate_predictions, train
from .model import forward_problem, init_model_params, named_parameters
from .optim import grad_check
from .rng import Rng

GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_from(args, overrides: dict) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(cfg, overrides)


def _common_train_flags(p: _Parser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--val-ratio", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--embedding-dim", type=int, default=None)


def _load_embedded(problems_path: str, embeddings_path: str, cfg: RunConfig):
    problems = datamod.read_problems(problems_path)
    expected = cfg.embedding_dim or None
    records = datamod.read_embeddings(embeddings_path, expected_dim=expected)
    return datamod.join_embeddings(problems, records)


def _emit(lines) -> None:
    for line in lines:
        print(line)


def cmd_synthesize(args) -> int:
    cfg = _config_from(args, {"seed": args.seed,
                              "word_threshold": args.word_threshold,
                              "min_sentences": args.min_sentences,
                              "problems_per_abstract": args.per_abstract})
    with open(args.infile, "r", encoding="utf-8") as fh:
        blocks, current = [], []
        for line in fh:
            if line.strip():
                current.append(line.strip())
            elif current:
                blocks.append(" ".join(current))
                current = []
        if current:
            blocks.append(" ".join(current))
    rng = Rng(cfg.seed)
    problems = datamod.synthesize_corpus(
        blocks, rng, per_paragraph=cfg.problems_per_abstract,
        min_sentences=cfg.min_sentences, word_threshold=cfg.word_threshold,
        source=args.source)
    datamod.write_problems(args.out, problems)
    _emit([f"paragraphs={len(blocks)}", f"problems={len(problems)}",
           f"out={args.out}"])
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args, {"seed": args.seed, "epochs": args.epochs,
                              "lr": args.lr, "val_ratio": args.val_ratio,
                              "weight_decay": args.weight_decay,
                              "embedding_dim": args.embedding_dim})
    embedded = _load_embedded(args.problems, args.embeddings, cfg)
    train_set, val_set = datamod.split_dataset(embedded, cfg.val_ratio, Rng(cfg.seed))
    params, metrics = train(train_set, val_set, cfg)
    if args.save_model:
        modelmod.save_model(args.save_model, params, cfg)
    _emit([f"train_size={len(train_set)}", f"val_size={len(val_set)}",
           f"epochs={cfg.epochs}", f"seed={cfg.seed}"])
    _emit(metrics.lines(prefix="val_"))
    return 0


def cmd_eval(args) -> int:
    params, model_cfg = modelmod.load_model(args.model)
    cfg = _config_from(args, {"embedding_dim": args.embedding_dim})
    model_cfg.ensemble_heads = cfg.ensemble_heads
    embedded = _load_embedded(args.problems, args.embeddings, cfg)
    metrics = evaluate(embedded, params, model_cfg)
    _emit([f"size={len(embedded)}"])
    _emit(metrics.lines())
    return 0


def cmd_cross(args) -> int:
    cfg = _config_from(args, {"seed": args.seed, "epochs": args.epochs,
                              "lr": args.lr, "val_ratio": args.val_ratio,
                              "weight_decay": args.weight_decay,
                              "embedding_dim": args.embedding_dim})
    source = _load_embedded(args.source_problems, args.source_embeddings, cfg)
    target = _load_embedded(args.target_problems, args.target_embeddings, cfg)
    src_train, src_val = datamod.split_dataset(source, cfg.val_ratio, Rng(cfg.seed))
    source_metrics, target_metrics = cross_domain(src_train, src_val, target, cfg)
    _emit([f"source_train_size={len(src_train)}", f"source_val_size={len(src_val)}",
           f"target_size={len(target)}"])
    _emit(source_metrics.lines(prefix="source_"))
    _emit(target_metrics.lines(prefix="target_"))
    return 0


def cmd_baseline(args) -> int:
    cfg = _config_from(args, {"seed": args.seed, "val_ratio": args.val_ratio,
                              "msv_theta": args.theta,
                              "embedding_dim": args.embedding_dim})
    embedded = _load_embedded(args.problems, args.embeddings, cfg)
    if args.alg in ALGORITHMS:
        theta = cfg.msv_theta if args.alg == "msv" else None
        metrics = evaluate_predictions(
            embedded,
            lambda p: insert_by_coherence(p, args.alg, theta, cfg.coherence_score))
        _emit([f"alg={args.alg}", f"size={len(embedded)}"])
    else:  # toposort
        train_set, val_set = datamod.split_dataset(embedded, cfg.val_ratio, Rng(cfg.seed))
        rng = Rng(cfg.seed)
        model = init_pairwise_model(train_set[0].dim, cfg.toposort_hidden, rng)
        pairs = order_pairs_from_problems(train_set)
        toposort_train(pairs, model, cfg.toposort_epochs, cfg.toposort_lr, rng)
        metrics = evaluate_predictions(val_set, lambda p: toposort_infer(p, model))
        _emit([f"alg=toposort", f"train_size={len(train_set)}",
               f"val_size={len(val_set)}"])
    _emit(metrics.lines())
    return 0


def cmd_gradcheck(args) -> int:
    cfg = RunConfig(seed=args.seed)
    rng = Rng(cfg.seed)
    params = init_model_params(args.dim, cfg, rng)
    problems = datamod.make_planted_problems(1, args.dim, rng)
    g = build_insertion_graph(problems[0])
    label = problems[0].label
    named = named_parameters(params)
    tensors = [t for _, t in named]

    def loss_fn() -> float:
        return forward_problem(params, g, label, cfg, rng=None, training=False).loss.item()

    modelmod.zero_grads(params)
    result = forward_problem(params, g, label, cfg, rng=None, training=False)
    result.loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    worst = grad_check(loss_fn, tensors, analytic, args.probes, args.eps, rng)
    _emit([f"dim={args.dim}", f"probes={args.probes}", f"eps={args.eps}",
           f"max_rel_error={worst:.3e}", f"threshold={GRADCHECK_TOLERANCE:.0e}"])
    return 0 if worst <= GRADCHECK_TOLERANCE else 1


def build_parser() -> _Parser:
    parser = _Parser(prog="insertion-gnn",
                     description="Sentence-insertion graph network and baselines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="turn a paragraph corpus into a problem file")
    p.add_argument("--in", dest="infile", required=True,
                   help="text corpus, paragraphs separated by blank lines")
    p.add_argument("--out", required=True, help="output problem file (JSON lines)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--per-abstract", type=int, default=None)
    p.add_argument("--word-threshold", type=int, default=None)
    p.add_argument("--min-sentences", type=int, default=None)
    p.add_argument("--source", default="synthetic")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("train", help="train on a problem + embedding file pair")
    p.add_argument("--problems", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--save-model", default=None, help="write trained weights (npz)")
    _common_train_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved weights on a dataset")
    p.add_argument("--problems", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--embedding-dim", type=int, default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("cross", help="train on source domain, test on target domain")
    p.add_argument("--source-problems", required=True)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--target-problems", required=True)
    p.add_argument("--target-embeddings", required=True)
    _common_train_flags(p)
    p.set_defaults(fn=cmd_cross)

    p = sub.add_parser("baseline", help="run a coherence or pairwise-order baseline")
    p.add_argument("--alg", required=True, choices=list(ALGORITHMS) + ["toposort"])
    p.add_argument("--problems", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--val-ratio", type=float, default=None)
    p.add_argument("--embedding-dim", type=int, default=None)
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss gradient")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--probes", type=int, default=200)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=1234)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except IO_ERRORS as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except InsertionGnnError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
