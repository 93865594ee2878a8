"""Command-line pipeline: generate, estimate, transform, train, inspect, evaluate.

Every subcommand is a pure function of its input files, flags, and seed;
re-running with the same arguments reproduces output files byte for
byte.  Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import dataio, evaluation, prob_model, synth, transform, tree
from .core import RulerecError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise _UsageError(message)


def _parse_shift(text: str):
    if text == transform.AUTO_SHIFT:
        return text
    try:
        return float(text)
    except ValueError:
        raise _UsageError(f"--l must be a number or 'auto', got {text!r}") from None


def _parse_number_list(text: str, kind):
    try:
        return tuple(kind(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise _UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _synth_config(args) -> synth.SynthConfig:
    return synth.SynthConfig(
        n_samples=args.n,
        n_features=args.features,
        n_actions=args.actions,
        n_segments=args.segments,
        logging_policy=args.policy,
        skew_action=args.skew_action,
        skew_share=args.skew_share,
        noise=args.noise,
        seed=args.seed,
    )


def _add_synth_flags(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, required=True, help="number of records to draw")
    p.add_argument("--features", type=int, default=6)
    p.add_argument("--actions", type=int, default=8)
    p.add_argument("--segments", type=int, default=6)
    p.add_argument("--policy", choices=synth.LOGGING_POLICIES, default="uniform")
    p.add_argument("--skew-action", type=int, default=0)
    p.add_argument("--skew-share", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)


def _add_transform_flags(p: argparse.ArgumentParser):
    p.add_argument("--k", type=float, default=None, help="weight scale (default by mode)")
    p.add_argument("--l", type=_parse_shift, default="auto", help="weight shift or 'auto'")


def _build_parser() -> _Parser:
    parser = _Parser(prog="rulerec", description=__doc__)
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap on internal worker threads (outputs never depend on it)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic logged dataset")
    _add_synth_flags(p)
    p.add_argument("--records-out", required=True)
    p.add_argument("--truth-out", required=True)

    p = sub.add_parser("estimate", help="fit per-action conversion models")
    p.add_argument("--records", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--probs-out", required=True)
    p.add_argument("--l2", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("transform", help="build a weighted training set")
    p.add_argument("--records", required=True, help="source of feature rows (and naive outcomes)")
    p.add_argument("--probs", default=None, help="probability table (proposed/benchmark)")
    p.add_argument("--mode", choices=transform.MODES, default="proposed")
    p.add_argument("--replication", choices=transform.REPLICATION_SCHEMES, default="weights")
    _add_transform_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-comment", action="store_true")

    p = sub.add_parser("train", help="grow a leaf-budgeted weighted tree")
    p.add_argument("--weighted", required=True)
    p.add_argument("--leaves", type=int, required=True)
    p.add_argument("--min-leaf-weight", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rules", help="render a tree as IF-THEN rules")
    p.add_argument("--tree", required=True)
    p.add_argument("--feature-names", default=None, help="comma-separated names")
    p.add_argument("--out", default=None, help="default: stdout")

    p = sub.add_parser("evaluate", help="conversion rate of a tree under a probability table")
    p.add_argument("--tree", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--out", default=None, help="optional JSON report path")

    p = sub.add_parser("verify", help="check the affine loss identity on random classifiers")
    p.add_argument("--records", required=True)
    p.add_argument("--probs", required=True)
    _add_transform_flags(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("exp-rules", help="leaf-budget sweep experiment")
    _add_synth_flags(p)
    p.add_argument("--rule-counts", type=str, default="1,2,3,4,6,8,12,16")
    _add_transform_flags(p)
    p.add_argument("--train-frac", type=float, default=2.0 / 3.0)
    p.add_argument("--estimated", action="store_true", help="use fitted probabilities")
    p.add_argument("--out", required=True)
    p.add_argument("--no-comment", action="store_true")

    p = sub.add_parser("exp-alpha", help="fictitious-action sweep experiment")
    _add_synth_flags(p)
    p.add_argument("--alphas", type=str, default="0,0.2,0.4,0.6,0.8,0.9,1.0")
    p.add_argument("--leaves", type=int, default=6)
    _add_transform_flags(p)
    p.add_argument("--train-frac", type=float, default=2.0 / 3.0)
    p.add_argument("--estimated", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--no-comment", action="store_true")

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    history, truth = synth.generate(_synth_config(args))
    dataio.write_records_csv(args.records_out, history)
    dataio.write_probs_csv(args.truth_out, truth)
    print(f"wrote {len(history)} records to {args.records_out} and {args.truth_out}")
    return 0


def _cmd_estimate(args) -> int:
    history = dataio.read_records_csv(args.records)
    cfg = prob_model.FitConfig(
        l2=args.l2, max_iters=args.max_iters, tolerance=args.tol, seed=args.seed
    )
    model = prob_model.fit(history, cfg)
    with open(args.model_out, "w", newline="\n") as fh:
        fh.write(prob_model.model_to_json(model))
    dataio.write_probs_csv(args.probs_out, model.predict_table(history.X))
    print(f"fit {model.n_actions} per-action models; wrote {args.model_out}, {args.probs_out}")
    return 0


def _cmd_transform(args) -> int:
    history = dataio.read_records_csv(args.records)
    cfg = transform.TransformConfig(
        scale=args.k, shift=args.l, mode=args.mode, replication=args.replication, seed=args.seed
    )
    comments = []
    if args.mode == "naive":
        weighted = transform.transform_naive(history)
        comments.append("mode=naive")
    else:
        if args.probs is None:
            raise _UsageError(f"--probs is required for mode {args.mode!r}")
        probs = dataio.read_probs_csv(args.probs)
        if args.mode == "benchmark":
            weighted = transform.transform_benchmark(history.X, probs)
            comments.append("mode=benchmark")
        else:
            from .core import regret_table

            shift = transform.resolve_shift(regret_table(probs), cfg)
            weighted = transform.transform_proposed(history.X, probs, cfg)
            comments.append(
                f"mode=proposed k={cfg.resolved_scale!r} l={shift!r} "
                f"replication={cfg.replication} seed={cfg.seed}"
            )
    dataio.write_weighted_csv(args.out, weighted, comments=() if args.no_comment else comments)
    print(f"wrote {len(weighted)} weighted samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    weighted = dataio.read_weighted_csv(args.weighted)
    model = tree.train(weighted, max_leaves=args.leaves, min_leaf_weight=args.min_leaf_weight)
    with open(args.out, "w", newline="\n") as fh:
        fh.write(tree.serialize(model))
    print(f"trained tree with {model.n_leaves()} leaves; wrote {args.out}")
    return 0


def _cmd_rules(args) -> int:
    with open(args.tree) as fh:
        model = tree.deserialize(fh.read())
    names = args.feature_names.split(",") if args.feature_names else None
    lines = tree.extract_rules(model, feature_names=names)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_evaluate(args) -> int:
    with open(args.tree) as fh:
        model = tree.deserialize(fh.read())
    history = dataio.read_records_csv(args.records)
    probs = dataio.read_probs_csv(args.probs)
    rate = evaluation.conversion_rate(model, probs, history.X)
    lower, upper = evaluation.bounds(probs)
    print(f"conversion_rate={rate!r} lower={lower!r} upper={upper!r}")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            json.dump({"conversion_rate": rate, "lower": lower, "upper": upper}, fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_verify(args) -> int:
    history = dataio.read_records_csv(args.records)
    probs = dataio.read_probs_csv(args.probs)
    cfg = transform.TransformConfig(scale=args.k, shift=args.l, mode="proposed")
    report = evaluation.verify_loss_identity(
        history.X, probs, cfg, trials=args.trials, seed=args.seed
    )
    print(report.summary())
    return 0 if report.passed else 2


def _cmd_exp_rules(args) -> int:
    cfg = evaluation.RuleSweepConfig(
        synth=_synth_config(args),
        rule_counts=_parse_number_list(args.rule_counts, int),
        scale=args.k if args.k is not None else 1.0,
        shift=args.l,
        train_frac=args.train_frac,
        estimated=args.estimated,
    )
    curve = evaluation.experiment_rule_count(cfg)
    dataio.write_curve_csv(args.out, curve, comment=not args.no_comment)
    print(f"wrote {len(curve.x_values)} rule-count rows to {args.out}")
    return 0


def _cmd_exp_alpha(args) -> int:
    cfg = evaluation.AlphaSweepConfig(
        synth=_synth_config(args),
        alphas=_parse_number_list(args.alphas, float),
        leaves=args.leaves,
        scale=args.k if args.k is not None else 1.0,
        shift=args.l,
        train_frac=args.train_frac,
        estimated=args.estimated,
    )
    curve = evaluation.experiment_alpha(cfg)
    dataio.write_curve_csv(args.out, curve, comment=not args.no_comment)
    print(f"wrote {len(curve.x_values)} alpha rows to {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "estimate": _cmd_estimate,
    "transform": _cmd_transform,
    "train": _cmd_train,
    "rules": _cmd_rules,
    "evaluate": _cmd_evaluate,
    "verify": _cmd_verify,
    "exp-rules": _cmd_exp_rules,
    "exp-alpha": _cmd_exp_alpha,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise _UsageError(f"--threads must be >= 1, got {args.threads}")
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except (RulerecError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
