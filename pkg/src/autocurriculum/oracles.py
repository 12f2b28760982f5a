"""Best-response oracles and exploitability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape as ad
from .errors import ConfigError, DimensionError, NonFiniteError, StationarityError, UnsupportedGameError
from .games import GameKind, aggregate_grad, exact_exploitability, kuhn, random_policy
from .games.imp import rollouts, score_function
from .population import Population, aggregate_payoff, check_simplex

METHODS = ("gd", "reinforce", "kuhn_exact", "kuhn_v1", "kuhn_v2")


@dataclass(frozen=True)
class OracleConfig:
    method: str = "gd"
    steps: int = 5
    lr: float = 25.0
    batch: int = 32
    init: str = "random"  # or "zeros"
    # when set, gradient ascent runs until the gradient norm drops below this
    # value (at most max_steps) instead of a fixed number of steps
    grad_norm_break: float | None = None
    max_steps: int = 100000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown oracle method {self.method!r}")
        if self.steps < 1:
            raise ConfigError("oracle needs at least one step")
        if self.lr < 0 or not np.isfinite(self.lr):
            raise ConfigError("oracle learning rate must be a finite nonnegative number")
        if self.batch < 1:
            raise ConfigError("oracle batch must be at least 1")
        if self.init not in ("random", "zeros"):
            raise ConfigError(f"unknown oracle init {self.init!r}")
        if self.grad_norm_break is not None and self.grad_norm_break <= 0:
            raise ConfigError("gradient-norm break must be positive")


def initial_policy(game, cfg: OracleConfig, rng) -> np.ndarray:
    if cfg.init == "zeros":
        return np.zeros(game.policy_dim)
    if rng is None:
        raise ConfigError("random oracle initialisation needs an rng")
    return random_policy(game, rng)


def _members(pop):
    return list(pop.members) if isinstance(pop, Population) else list(pop)


def gd_best_response(game, pi, pop, cfg: OracleConfig, rng=None, init=None, side="row"):
    """Gradient ascent on the payoff against the mixture ``<pi, pop>``.

    Any of ``pi``, the members and ``init`` may be tape values, in which case
    the whole ascent is recorded.
    """
    if not game.differentiable:
        raise UnsupportedGameError(f"gradient best response is undefined for {game.kind.value}")
    members = _members(pop)
    if not members:
        raise DimensionError("opponent population is empty")
    check_simplex(pi, len(members))
    phi = initial_policy(game, cfg, rng) if init is None else init
    if cfg.grad_norm_break is not None:
        return _gd_until_stationary(game, pi, members, cfg, phi, side)
    for _ in range(cfg.steps):
        g = aggregate_grad(game, phi, members, pi, side=side)
        if not np.all(np.isfinite(ad.value_of(g))):
            raise NonFiniteError("best-response gradient is not finite")
        phi = phi + cfg.lr * g
    return phi


def _gd_until_stationary(game, pi, members, cfg, phi, side):
    for _ in range(cfg.max_steps):
        g = aggregate_grad(game, phi, members, pi, side=side)
        norm = float(np.linalg.norm(ad.value_of(g)))
        if not np.isfinite(norm):
            raise NonFiniteError("best-response gradient is not finite")
        if norm < cfg.grad_norm_break:
            return phi
        phi = phi + cfg.lr * g
    raise StationarityError(
        f"gradient norm {norm:.3g} still above {cfg.grad_norm_break:g} after {cfg.max_steps} steps")


def reinforce_gradient(game, x, opponent, batch: int, rng, side="row"):
    """Score-function estimate of the payoff gradient against one opponent.

    Uses a leave-one-out mean baseline.  Returns (mean, standard error) per
    coordinate.
    """
    if game.kind is not GameKind.IMP:
        raise UnsupportedGameError("policy-gradient oracle is only implemented for iterated matching pennies")
    if batch < 2:
        raise ConfigError("leave-one-out baseline needs a batch of at least 2")
    if side == "row":
        states, actions, rewards = rollouts(game.payload, x, opponent, batch, rng)
        ret, seat = rewards.sum(axis=1), 0
    else:
        states, actions, rewards = rollouts(game.payload, opponent, x, batch, rng)
        ret, seat = -rewards.sum(axis=1), 1
    base = (ret.sum() - ret) / (batch - 1)
    per = (ret - base)[:, None] * score_function(x, states, actions, seat)
    return per.mean(axis=0), per.std(axis=0, ddof=1) / np.sqrt(batch)


def reinforce_best_response(game, pi, pop, cfg: OracleConfig, rng, init=None, side="row"):
    members = _members(pop)
    if not members:
        raise DimensionError("opponent population is empty")
    check_simplex(pi, len(members))
    pi = np.asarray(pi, float)
    phi = initial_policy(game, cfg, rng) if init is None else np.asarray(init, float)
    for _ in range(cfg.steps):
        g = np.zeros_like(phi)
        for w, opp in zip(pi, members):
            if w > 0:
                g += w * reinforce_gradient(game, phi, opp, cfg.batch, rng, side)[0]
        phi = phi + cfg.lr * g
    return phi


def v2_policy(actions, eta) -> np.ndarray:
    """Aggressive-action probabilities from noisy weights (1 + eta1 on the argmax, eta2 elsewhere)."""
    w_best = np.maximum(1.0 + eta[:, 0], 0.0)
    w_other = np.maximum(eta[:, 1], 0.0)
    p_best = w_best / (w_best + w_other)
    return np.where(actions == 1, p_best, 1.0 - p_best)


def kuhn_best_response(game, pi, pop, cfg: OracleConfig, rng=None):
    if game.kind is not GameKind.KUHN:
        raise UnsupportedGameError("tabular best response is only defined for Kuhn poker")
    V = kuhn.infostate_action_values(ad.value_of(pi), _members(pop))
    actions = kuhn.best_response_actions(V)
    if cfg.method == "kuhn_v1":
        return np.where(actions == 1, 0.75, 0.25)
    if cfg.method == "kuhn_v2":
        if rng is None:
            raise ConfigError("the noisy tabular oracle needs an rng")
        eta = rng.normal(size=(len(actions), 2))
        dead = (1.0 + eta[:, 0] <= 0) & (eta[:, 1] <= 0)
        while np.any(dead):
            eta[dead] = rng.normal(size=(int(dead.sum()), 2))
            dead = (1.0 + eta[:, 0] <= 0) & (eta[:, 1] <= 0)
        return v2_policy(actions, eta)
    return actions.astype(float)


def best_response(game, pi, pop, cfg: OracleConfig, rng=None, init=None, side="row"):
    """Dispatch on ``cfg.method``."""
    if cfg.method == "gd":
        return gd_best_response(game, pi, pop, cfg, rng, init, side)
    if cfg.method == "reinforce":
        return reinforce_best_response(game, pi, pop, cfg, rng, init, side)
    return kuhn_best_response(game, pi, pop, cfg, rng)


def exploitability(game, pi, pop, cfg: OracleConfig, rng=None, exact: bool = False, br=None):
    """Payoff the configured oracle's best response earns against ``<pi, pop>``.

    For two-population games ``pi`` and ``pop`` are (row, col) pairs and the
    result is the sum of both players' deviation payoffs.  ``exact`` uses the
    best pure strategy for matrix games and the exact tabular best response
    for Kuhn poker.  ``br`` replaces :func:`best_response`.
    """
    br = br or best_response
    if not game.symmetric:
        (pi_r, pi_c), (rows, cols) = pi, pop
        phi_r = br(game, pi_c, cols, cfg, rng, side="row")
        phi_c = br(game, pi_r, rows, cfg, rng, side="col")
        return (aggregate_payoff(game, phi_r, pi_c, _as_pop(cols), side="row")
                + aggregate_payoff(game, phi_c, pi_r, _as_pop(rows), side="col"))
    if exact:
        if game.kind in (GameKind.GOS, GameKind.EXTERNAL):
            check_simplex(pi, len(pop))
            return exact_exploitability(game.payload, ad.value_of(pi), [ad.value_of(m) for m in _members(pop)])
        if game.kind is GameKind.KUHN:
            cfg = OracleConfig(method="kuhn_exact")
    phi = br(game, pi, pop, cfg, rng)
    return aggregate_payoff(game, phi, pi, _as_pop(pop))


def _as_pop(pop):
    return pop if isinstance(pop, Population) else Population(tuple(pop))
