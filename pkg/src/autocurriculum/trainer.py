"""Meta-training of learned solvers and evaluation on held-out games."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tape as ad
from .config import ExperimentConfig
from .errors import GradientExplosionError
from .es import es_estimate, update_params
from .metagrad import MetaGradConfig, direct_meta_gradient
from .psro import run_psro
from .solvers import MetaSolverParams, SolverSpec, init_params

# seed namespaces so training and held-out games never share a stream
_TRAIN_GAMES, _TRAIN_RUNS, _ES, _HELD_OUT, _INIT = 101, 102, 103, 104, 105


def derive_seed(*words) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class StepRecord:
    step: int
    mean_exploitability: float
    exploitabilities: tuple
    grad_norm: float
    learning_rate: float
    wall_time: float = field(compare=False, default=0.0)


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        return isinstance(other, TrainHistory) and self.records == other.records


def learning_rate(cfg: ExperimentConfig, step: int) -> float:
    if cfg.lr_schedule_step > 0:
        return cfg.outer_learning_rate * cfg.lr_schedule_gamma ** (step // cfg.lr_schedule_step)
    return cfg.outer_learning_rate


def training_game_seeds(cfg: ExperimentConfig, seed: int, step: int):
    """(game seeds, PSRO seeds) of the meta-batch at ``step``."""
    k = range(cfg.meta_batch_size)
    return ([derive_seed(seed, _TRAIN_GAMES, step, i) for i in k],
            [derive_seed(seed, _TRAIN_RUNS, step, i) for i in k])


def training_games(cfg: ExperimentConfig, seed: int, step: int):
    game_seeds, run_seeds = training_game_seeds(cfg, seed, step)
    return [cfg.make_game(s) for s in game_seeds], run_seeds


def held_out_games(cfg: ExperimentConfig, dim: int | None = None):
    """(game seed, game, PSRO seed) triples shared by every evaluation of ``cfg``."""
    out = []
    for i in range(cfg.eval_tasks):
        game_seed = derive_seed(cfg.eval_seed, _HELD_OUT, i)
        out.append((game_seed, cfg.make_game(game_seed, dim), derive_seed(cfg.eval_seed, _HELD_OUT, i, 1)))
    return out


def batch_exploitability(theta: MetaSolverParams, games, run_seeds, psro_cfg) -> np.ndarray:
    spec = SolverSpec("learned", theta=theta)
    return np.array([float(ad.value_of(run_psro(g, spec, psro_cfg, s).exploitability))
                     for g, s in zip(games, run_seeds)])


def meta_gradient(cfg: ExperimentConfig, theta: MetaSolverParams, games, run_seeds, seed, step):
    """(per-game exploitabilities at theta, averaged meta-gradient)."""
    psro_cfg = cfg.psro()
    if cfg.trainer_mode == "es":
        base = batch_exploitability(theta, games, run_seeds, psro_cfg)

        def objective(flat):
            return batch_exploitability(theta.with_flat(flat), games, run_seeds, psro_cfg).mean()

        g = es_estimate(objective, theta.flat, cfg.es(), seed_words=(seed, _ES, step),
                        baseline=float(base.mean()))
        return base, g
    mg = MetaGradConfig(psro_cfg, cfg.window_size, cfg.trainer_mode == "implicit", cfg.implicit_damping)
    values, grads = [], []
    for game, s in zip(games, run_seeds):
        v, g = direct_meta_gradient(theta, game, mg, s)
        values.append(v)
        grads.append(g)
    return np.array(values), np.mean(grads, axis=0)


def initial_theta(cfg: ExperimentConfig, seed: int) -> MetaSolverParams:
    return init_params(cfg.model_type, (cfg.hidden_size,), derive_seed(seed, _INIT))


def train(cfg: ExperimentConfig, seed: int | None = None, theta: MetaSolverParams | None = None,
          log=None):
    """Meta-train a solver; returns (final parameters, history).

    Fully determined by ``cfg`` and ``seed``.  Wall times are recorded but
    excluded from history comparisons.
    """
    seed = cfg.seed if seed is None else seed
    theta = theta or initial_theta(cfg, seed)
    history = TrainHistory()
    for step in range(cfg.meta_training_steps):
        t0 = time.perf_counter()
        games, run_seeds = training_games(cfg, seed, step)
        values, g = meta_gradient(cfg, theta, games, run_seeds, seed, step)
        norm = float(np.linalg.norm(g))
        if not np.isfinite(norm) or norm > cfg.gradient_ceiling:
            raise GradientExplosionError(
                f"meta-gradient norm {norm:.3g} at step {step} exceeds ceiling {cfg.gradient_ceiling:g}")
        lr = learning_rate(cfg, step)
        theta = theta.with_flat(update_params(theta.flat, g, lr, cfg.gradient_clip_value or None))
        rec = StepRecord(step, float(values.mean()), tuple(float(v) for v in values), norm, lr,
                         time.perf_counter() - t0)
        history.records.append(rec)
        if log is not None:
            log(rec)
    return theta, history


def evaluate(cfg: ExperimentConfig, spec, dim: int | None = None):
    """Exploitability curves on the held-out games.

    Returns a list of (game seed, [exploitability at t = 0..T]).
    """
    out = []
    for game_seed, game, run_seed in held_out_games(cfg, dim):
        res = run_psro(game, spec, cfg.psro(), run_seed, track=True)
        out.append((game_seed, [float(ad.value_of(v)) for v in res.curve]))
    return out


def baseline_spec(cfg: ExperimentConfig, name: str) -> SolverSpec:
    return SolverSpec(name, fp_iters=cfg.nash_fp_iterations, exact=cfg.nash_exact)
