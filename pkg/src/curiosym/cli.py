"""Command line entry point.

Every subcommand reads the experiment config, applies ``--seed``/``--out``
overrides and writes artifacts under ``<out>/<strategy>/seed<k>/``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, io
from . import config as config_mod
from .config import ConfigError, ExperimentConfig
from .experiment import (
    GenerationError,
    build_report,
    cell_paths,
    evaluate_prediction_error,
    format_report,
    generate_test_set,
    prepare_seed,
    read_library,
    run_comparison,
    plan_tasks,
    stream,
    test_set_path,
    training_rows,
    write_library,
    write_report,
    _DISTILL_STREAM,
    _TEST_STREAM,
)
from .explorer import STRATEGIES, head_for, run_exploration
from .model import Network, Trainer, checkpoint
from .model.checkpoint import CheckpointError
from .symbols import annotate, build_library

log = logging.getLogger("curiosym")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_MISMATCH = 5


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on its own; keep that but route through our handler."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _load_config(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _root(args, cfg) -> Path:
    return config_mod.output_root(cfg, args.out)


def _seeds(args, cfg) -> tuple[int, ...]:
    # --seed has already narrowed cfg.seeds
    return cfg.seeds


def _strategies(args, cfg) -> tuple[str, ...]:
    return (args.strategy,) if getattr(args, "strategy", None) else cfg.strategies


def _require(path: Path) -> Path:
    if not path.exists():
        raise io.ArtifactError(str(path))
    return path


def _load_checkpoint(path: Path, config_hash: str):
    net, meta = checkpoint.load(_require(path))
    io.check_same_config(config_hash, meta.get("config_hash", ""))
    return net, meta


def cmd_explore(args) -> int:
    cfg = _load_config(args)
    if args.steps is not None:
        if args.steps < 0:
            raise _UsageError("--steps must be non-negative")
        cfg = cfg.with_overrides(exploration={"total_steps": args.steps})
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        for strategy in _strategies(args, cfg):
            paths = cell_paths(root, strategy, seed)
            result = run_exploration(
                cfg.exploration.for_strategy(strategy),
                cfg.world,
                cfg.model.encoder(head_for(strategy)),
                cfg.train.trainer(cfg.exploration.epochs_per_retrain),
                seed=seed,
                dataset_path=paths.dataset,
                config_hash=h,
            )
            checkpoint.save(result.net, paths.checkpoint, {"config_hash": h, "strategy": strategy, "seed": seed})
            io.write_jsonl(paths.metrics, result.metrics)
            print(f"{strategy} seed {seed}: {len(result.dataset)} transitions -> {paths.dataset}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    root, h = _root(args, cfg), cfg.hash()
    epochs = args.epochs if args.epochs is not None else cfg.exploration.epochs_per_retrain
    for seed in _seeds(args, cfg):
        for strategy in _strategies(args, cfg):
            paths = cell_paths(root, strategy, seed)
            ds, dh = io.read_dataset(_require(paths.dataset))
            io.check_same_config(h, dh)
            rows = training_rows(ds, strategy, cfg.exploration.active_threshold)
            net = Network(cfg.model.encoder(head_for(strategy)), seed=seed)
            trace = Trainer(net, cfg.train.trainer(epochs), seed=seed).train_epochs(rows.objects, rows.actions, rows.effects) if len(rows) else []
            checkpoint.save(net, paths.checkpoint, {"config_hash": h, "strategy": strategy, "seed": seed})
            final = f"{trace[-1]:.5f}" if len(trace) else "n/a"
            print(f"{strategy} seed {seed}: {len(rows)} rows, {epochs} epochs, final loss {final}")
    return EXIT_OK


def cmd_test_set(args) -> int:
    cfg = _load_config(args)
    if args.count is not None:
        cfg = cfg.with_overrides(evaluation={"test_set_size": args.count})
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        ds = generate_test_set(
            cfg.world, cfg.evaluation.test_set_size, cfg.world.effect_threshold,
            stream(seed, _TEST_STREAM), cfg.evaluation.max_test_attempts,
        )
        path = test_set_path(root, seed)
        io.write_dataset(path, ds, h)
        print(f"seed {seed}: {len(ds)} rows -> {path}")
    return EXIT_OK


def cmd_distill(args) -> int:
    cfg = _load_config(args)
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        for strategy in _strategies(args, cfg):
            paths = cell_paths(root, strategy, seed)
            net, meta = _load_checkpoint(paths.checkpoint, h)
            ds, dh = io.read_dataset(_require(paths.dataset))
            io.check_same_config(h, dh)
            rows = training_rows(ds, strategy, cfg.exploration.active_threshold)
            library, rejected = build_library(net, rows.actions, stream(seed, _DISTILL_STREAM), cfg.distill, cfg.world)
            write_library(paths.library, library, rejected, h, meta)
            print(f"{strategy} seed {seed}: {len(library)} accepted, {len(rejected)} rejected -> {paths.library}")
    return EXIT_OK


def cmd_annotate(args) -> int:
    cfg = _load_config(args)
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        for strategy in _strategies(args, cfg):
            paths = cell_paths(root, strategy, seed)
            library, doc = read_library(_require(paths.library))
            io.check_same_config(h, doc.get("config_hash", ""))
            for prim in library:
                prim.label = annotate(prim, cfg.world)
            write_library(paths.library, library, doc.get("rejected", []), h, doc.get("meta"))
            for prim in library:
                code = "".join(map(str, prim.code))
                print(f"{strategy} seed {seed} {code} {prim.label:<15} residual={prim.residual:.4f} count={prim.count}")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        for strategy in _strategies(args, cfg):
            paths = cell_paths(root, strategy, seed)
            library, doc = read_library(_require(paths.library))
            net, _ = _load_checkpoint(paths.checkpoint, h)
            io.check_same_config(h, doc.get("config_hash", ""))
            _, single, double = prepare_seed(cfg, root, seed)
            records = plan_tasks(net, library, single, double, cfg.world, seed)
            io.write_jsonl(paths.plans, [{"config_hash": h, **r} for r in records])
            for kind in ("single", "double"):
                sel = [r for r in records if r["kind"] == kind]
                ok = sum(r["success"] for r in sel)
                print(f"{strategy} seed {seed} {kind}: {ok}/{len(sel)} executed successfully")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    root, h = _root(args, cfg), cfg.hash()
    for seed in _seeds(args, cfg):
        test_set, th = io.read_dataset(_require(test_set_path(root, seed)))
        io.check_same_config(h, th)
        for strategy in _strategies(args, cfg):
            net, _ = _load_checkpoint(cell_paths(root, strategy, seed).checkpoint, h)
            mae = evaluate_prediction_error(net, test_set)
            print(json.dumps({"strategy": strategy, "seed": seed, "mae": [round(float(v), 6) for v in mae]}))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    if args.steps is not None:
        cfg = cfg.with_overrides(exploration={"total_steps": args.steps})
    report = run_comparison(cfg, _root(args, cfg), resume=args.resume)
    sys.stdout.write(format_report(report))
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args)
    root = _root(args, cfg)
    report = build_report(cfg, root)
    write_report(report, root)
    sys.stdout.write(format_report(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults built in)")
    common.add_argument("--seed", type=int, help="run a single seed instead of the config list")
    common.add_argument("--out", help="output root (overrides config and CURIOSYM_OUTPUT_ROOT)")
    common.add_argument("-v", "--verbose", action="store_true")

    strat = argparse.ArgumentParser(add_help=False)
    strat.add_argument("--strategy", choices=STRATEGIES)

    p = _Parser(prog="curiosym", description="Curiosity-driven symbol discovery experiments.")
    p.add_argument("--version", action="version", version=f"curiosym {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("explore", parents=[common, strat], help="collect transitions and train")
    s.add_argument("--steps", type=int, help="override exploration.total_steps")
    s.set_defaults(func=cmd_explore)

    s = sub.add_parser("train", parents=[common, strat], help="retrain a fresh model on a stored dataset")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("test-set", parents=[common], help="generate the filtered evaluation set")
    s.add_argument("--count", type=int)
    s.set_defaults(func=cmd_test_set)

    sub.add_parser("distill", parents=[common, strat], help="realise action symbols as primitives").set_defaults(func=cmd_distill)
    sub.add_parser("annotate", parents=[common, strat], help="label primitives by executing them").set_defaults(func=cmd_annotate)
    sub.add_parser("plan", parents=[common, strat], help="plan and execute the task set").set_defaults(func=cmd_plan)
    sub.add_parser("eval", parents=[common, strat], help="per-axis prediction error").set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", parents=[common], help="full three-strategy comparison")
    s.add_argument("--steps", type=int, help="override exploration.total_steps")
    s.add_argument("--resume", action="store_true", help="keep cells already complete for this config")
    s.set_defaults(func=cmd_compare)

    sub.add_parser("report", parents=[common], help="rebuild the report from artifacts").set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"curiosym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"curiosym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"curiosym: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.ArtifactMismatch, CheckpointError) as exc:
        print(f"curiosym: artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (io.ArtifactError, FileNotFoundError) as exc:
        print(f"curiosym: missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (GenerationError, ValueError, RuntimeError) as exc:
        print(f"curiosym: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
