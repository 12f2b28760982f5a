"""Command-line entry point.

    autocurriculum train     --config c.toml --seed 7 --out runs/a
    autocurriculum eval      --config c.toml --checkpoint runs/a/checkpoint.json --dims 30,50
    autocurriculum baselines --config c.toml --out runs/a
    autocurriculum sweep     --config c.toml --dims 30,50
    autocurriculum gradcheck

Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure,
4 gradient check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from . import plotting
from .config import PROFILES, build_config, load_config
from .errors import (CheckpointError, ConfigError, GradientExplosionError, IllConditionedError,
                     NonFiniteError, PayoffFileError, StationarityError)
from .games import GameKind, sample_game
from .metagrad import MetaGradConfig, gradient_check
from .oracles import OracleConfig
from .psro import PsroConfig
from .solvers import SolverSpec, init_params, load_checkpoint, save_checkpoint
from . import trainer

HEADER = ("run_id", "seed", "game_kind", "game_seed", "solver", "iteration", "exploitability")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 2, 3, 4

log = logging.getLogger("autocurriculum")


def fmt(v) -> str:
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[h] for h in header])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _sidecar(out_dir, name):
    handler = logging.FileHandler(os.path.join(out_dir, name), mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def _parse_dims(text):
    if text is None:
        return None
    try:
        dims = [int(d) for d in text.replace(" ", "").split(",") if d]
    except ValueError:
        raise ConfigError(f"--dims must be a comma-separated list of integers, got {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise ConfigError("--dims needs positive integers")
    return dims


def _config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config:
        return load_config(args.config, args.profile, **overrides)
    return build_config({}, args.profile, **overrides)


def _label(cfg, dim):
    return cfg.game_kind if dim is None else f"{cfg.game_kind}-d{dim}"


def _dims_for(cfg, dims):
    if dims is None:
        return [None]
    if cfg.kind is not GameKind.GOS:
        raise ConfigError("--dims only applies to games of skill")
    return dims


def _result_rows(cfg, solver_label, curves, kind_label):
    rows = []
    for game_seed, curve in curves:
        for t, v in enumerate(curve):
            rows.append(dict(run_id=cfg.run_id, seed=cfg.seed, game_kind=kind_label, game_seed=game_seed,
                             solver=solver_label, iteration=t, exploitability=fmt(v)))
    return rows


def _learned(theta):
    return SolverSpec("learned", theta=theta)


def _learned_label(theta):
    return f"nac-{theta.arch.value}"


# -- subcommands --------------------------------------------------------------

def cmd_train(args, cfg, out):
    handler = _sidecar(out, "train.log")
    try:
        log.info("train run_id=%s seed=%d mode=%s", cfg.run_id, cfg.seed, cfg.trainer_mode)

        def on_step(rec):
            log.info("step %d mean_exploitability %.6f grad_norm %.6g wall %.3fs",
                     rec.step, rec.mean_exploitability, rec.grad_norm, rec.wall_time)

        theta, history = trainer.train(cfg, cfg.seed, log=on_step)
    finally:
        log.removeHandler(handler)
        handler.close()
    rows, metrics = [], []
    for rec in history.records:
        games, _ = trainer.training_game_seeds(cfg, cfg.seed, rec.step)
        for gs, v in zip(games, rec.exploitabilities):
            rows.append(dict(run_id=cfg.run_id, seed=cfg.seed, game_kind=cfg.game_kind, game_seed=gs,
                             solver=_learned_label(theta), iteration=rec.step, exploitability=fmt(v)))
        metrics.append(dict(step=rec.step, mean_exploitability=fmt(rec.mean_exploitability),
                            grad_norm=fmt(rec.grad_norm), learning_rate=fmt(rec.learning_rate)))
    save_checkpoint(os.path.join(out, "checkpoint.json"), theta)
    write_csv(os.path.join(out, "history.csv"), HEADER, rows)
    write_csv(os.path.join(out, "train_metrics.csv"),
              ("step", "mean_exploitability", "grad_norm", "learning_rate"), metrics)
    if history.records:
        plotting.training_figure(history.records, os.path.join(out, "train_curve.png"))
    print(f"trained {cfg.meta_training_steps} steps; checkpoint {os.path.join(out, 'checkpoint.json')}")
    return EXIT_OK


def _checkpoint_path(args, out):
    path = args.checkpoint or os.path.join(out, "checkpoint.json")
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint {path} not found")
    return path


def _evaluate_rows(cfg, spec, label, dims):
    rows = []
    for dim in _dims_for(cfg, dims):
        curves = trainer.evaluate(cfg, spec, dim)
        rows += _result_rows(cfg, label, curves, _label(cfg, dim))
    return rows


def cmd_eval(args, cfg, out):
    theta = load_checkpoint(_checkpoint_path(args, out))
    rows = _evaluate_rows(cfg, _learned(theta), _learned_label(theta), _parse_dims(args.dims))
    write_csv(os.path.join(out, "eval.csv"), HEADER, rows)
    plotting.curve_figure(rows, os.path.join(out, "eval.png"), "held-out games")
    _print_summary(rows)
    return EXIT_OK


def cmd_baselines(args, cfg, out):
    dims = _parse_dims(args.dims)
    rows = []
    for name in cfg.baselines:
        rows += _evaluate_rows(cfg, trainer.baseline_spec(cfg, name), name, dims)
    write_csv(os.path.join(out, "baselines.csv"), HEADER, rows)
    plotting.curve_figure(rows, os.path.join(out, "baselines.png"), "held-out games")
    _print_summary(rows)
    return EXIT_OK


def cmd_sweep(args, cfg, out):
    if cfg.kind is not GameKind.GOS:
        raise ConfigError("sweep evaluates games of skill across dimensions")
    dims = _parse_dims(args.dims) or list(cfg.sweep_dims)
    dims = [cfg.gos_dim] + [d for d in dims if d != cfg.gos_dim]
    if args.checkpoint:
        theta = load_checkpoint(args.checkpoint)
    else:
        theta, _ = trainer.train(cfg, cfg.seed)
        save_checkpoint(os.path.join(out, "checkpoint.json"), theta)
    specs = [(_learned_label(theta), _learned(theta))]
    specs += [(name, trainer.baseline_spec(cfg, name)) for name in cfg.baselines]
    rows, summary = [], []
    for dim in dims:
        for label, spec in specs:
            curves = trainer.evaluate(cfg, spec, dim)
            rows += _result_rows(cfg, label, curves, _label(cfg, dim))
            finals = np.array([c[-1] for _, c in curves])
            summary.append(dict(dim=dim, solver=label, mean=fmt(finals.mean()),
                                std=fmt(finals.std(ddof=1) if len(finals) > 1 else 0.0), tasks=len(finals)))
    write_csv(os.path.join(out, "sweep_curves.csv"), HEADER, rows)
    write_csv(os.path.join(out, "sweep.csv"), ("dim", "solver", "mean", "std", "tasks"), summary)
    plotting.sweep_figure(summary, os.path.join(out, "sweep.png"))
    for r in summary:
        print(f"dim {r['dim']:>4}  {r['solver']:<12} {float(r['mean']):.4f} +- {float(r['std']):.4f}")
    return EXIT_OK


GRADCHECK_GAMES = (("gos", {"dim": 4}), ("lotto", {"customers": 3, "servers": 2}), ("rps2d", {}))


def gradcheck_suite(instances: int = 20, tol: float = 1e-3, h: float = 1e-4):
    """Direct meta-gradient against central differences on tiny seeded instances.

    Yields (kind, seed, relative error, passed).
    """
    one = OracleConfig("gd", steps=1, lr=1.0)
    cfg = MetaGradConfig(PsroConfig(3, one, one), window=3)
    for i in range(instances):
        kind, settings = GRADCHECK_GAMES[i % len(GRADCHECK_GAMES)]
        game = sample_game(kind, settings, i)
        theta = init_params("mlp", (8,), i)
        # move off the ReLU kinks that zero biases and a zero diagonal create
        noise = np.random.default_rng([i, 1]).normal(scale=0.1, size=theta.flat.size)
        theta = theta.with_flat(theta.flat + noise)
        err, _, _ = gradient_check(theta, game, cfg, i, h)
        yield kind, i, err, err < tol


def cmd_gradcheck(args, cfg, out):
    rows, ok = [], True
    for kind, seed, err, passed in gradcheck_suite(cfg.gradcheck_instances):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {kind:<6} seed={seed:<3} rel_err={err:.3e}")
        rows.append(dict(kind=kind, seed=seed, rel_err=fmt(err), passed=int(passed)))
    write_csv(os.path.join(out, "gradcheck.csv"), ("kind", "seed", "rel_err", "passed"), rows)
    print("gradcheck", "passed" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_GRADCHECK


def _print_summary(rows):
    finals = {}
    last = {}
    for r in rows:
        key = (r["solver"], r["game_kind"], r["game_seed"])
        if int(r["iteration"]) >= last.get(key, -1):
            last[key] = int(r["iteration"])
            finals[key] = float(r["exploitability"])
    groups = {}
    for (solver, kind, _), v in finals.items():
        groups.setdefault((solver, kind), []).append(v)
    for (solver, kind), vs in sorted(groups.items()):
        print(f"{kind:<10} {solver:<12} final exploitability {np.mean(vs):.4f} +- {np.std(vs):.4f} ({len(vs)} games)")


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "baselines": cmd_baselines,
            "sweep": cmd_sweep, "gradcheck": cmd_gradcheck}


def make_parser():
    p = argparse.ArgumentParser(prog="autocurriculum", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat TOML experiment file")
    p.add_argument("--seed", type=int, help="run seed (overrides the file)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--profile", choices=PROFILES, help="default settings profile")
    p.add_argument("--dims", help="comma-separated games-of-skill dimensions")
    p.add_argument("--checkpoint", help="solver checkpoint to evaluate")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = _config(args)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, cfg, args.out)
    except (ConfigError, PayoffFileError, CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteError, GradientExplosionError, StationarityError, IllConditionedError,
            FloatingPointError) as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
