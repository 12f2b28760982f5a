"""Iterated matching pennies with memory-one policies.

Stage game (row player's reward; the column player gets the negative):

             Head   Tail
    Head      +a     -a
    Tail      -b     +b

Each player holds 5 logits; sigmoid(logit) is the probability of playing
Head in the states [start, HH, HT, TH, TT], where a state is the previous
joint action written (row, col) for both players.  Joint actions are indexed
``2 * row + col`` with Head = 0.  The return is the undiscounted sum of
rewards over ``horizon`` stage games.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .. import tape as ad
from ..errors import ConfigError
from .base import GameKind, register

START = 4  # state index used in trajectories for the initial state


@dataclass(frozen=True)
class ImpPayload:
    a: float
    b: float
    horizon: int = 50

    @property
    def rewards(self) -> np.ndarray:
        return np.array([self.a, -self.a, -self.b, self.b])


class Trajectory(NamedTuple):
    states: np.ndarray   # (H,) state each action was taken in; START for t=0
    actions: np.ndarray  # (H, 2) row and column actions, Head = 0
    rewards: np.ndarray  # (H,) row player's rewards


def _probs(x):
    return ad.sigmoid(np.asarray(x, float))


def _joint(p, q):
    """Joint-action distribution(s) from Head probabilities p, q (same shape)."""
    return np.stack([p * q, p * (1 - q), (1 - p) * q, (1 - p) * (1 - q)], axis=-1)


def _forward(payload, p, q):
    d0 = _joint(p[0], q[0])
    P = _joint(p[1:], q[1:])  # (4, 4) transition between joint actions
    r = payload.rewards
    d = d0
    value = d @ r
    ds = [d]
    for _ in range(payload.horizon - 1):
        d = d @ P
        ds.append(d)
        value += d @ r
    return value, d0, P, ds


def _adjoint(payload, p, q):
    """Gradients of the value with respect to both players' Head probabilities."""
    _, d0, P, ds = _forward(payload, p, q)
    r = payload.rewards
    H = payload.horizon
    w = r.copy()
    gP = np.zeros((4, 4))
    for t in range(H - 2, -1, -1):
        gP += np.outer(ds[t], w)
        w = r + P @ w
    gd0 = w
    gp, gq = np.zeros(5), np.zeros(5)
    for s, (g, pr, qc) in enumerate([(gd0, p[0], q[0])] + [(gP[i], p[i + 1], q[i + 1]) for i in range(4)]):
        gp[s] = (g[0] - g[2]) * qc + (g[1] - g[3]) * (1 - qc)
        gq[s] = (g[0] - g[1]) * pr + (g[2] - g[3]) * (1 - pr)
    return gp, gq


class ImpKernel:
    DIFFERENTIABLE = True
    TAPE = False
    DEFAULTS = {"a_low": 0.5, "a_high": 2.0, "b_low": 0.5, "b_high": 2.0, "horizon": 50,
                "a": None, "b": None}

    @staticmethod
    def sample(cfg, rng):
        H = int(cfg["horizon"])
        if H < 1:
            raise ConfigError("imp horizon must be at least 1")
        if cfg["a_low"] > cfg["a_high"] or cfg["b_low"] > cfg["b_high"]:
            raise ConfigError("imp payoff ranges are empty")
        a = rng.uniform(cfg["a_low"], cfg["a_high"])
        b = rng.uniform(cfg["b_low"], cfg["b_high"])
        if cfg["a"] is not None:
            a = float(cfg["a"])
        if cfg["b"] is not None:
            b = float(cfg["b"])
        return ImpPayload(float(a), float(b), H)

    @staticmethod
    def policy_dim(payload):
        return 5

    @staticmethod
    def check_policy(payload, x):
        pass

    @staticmethod
    def random_policy(payload, rng):
        return rng.normal(size=5)

    @staticmethod
    def payoff(payload, x, y):
        return _forward(payload, _probs(x), _probs(y))[0]

    @staticmethod
    def payoffs_as_row(payload, x, members):
        return np.array([ImpKernel.payoff(payload, x, y) for y in members])

    @staticmethod
    def payoffs_as_col(payload, y, members):
        return np.array([-ImpKernel.payoff(payload, x, y) for x in members])

    @staticmethod
    def grad_row(payload, x, y):
        p, q = _probs(x), _probs(y)
        return _adjoint(payload, p, q)[0] * p * (1 - p)

    @staticmethod
    def grad_col(payload, x, y):
        p, q = _probs(x), _probs(y)
        return _adjoint(payload, p, q)[1] * q * (1 - q)

    @staticmethod
    def aggregate_grad(payload, x, members, weights):
        g = np.zeros(5)
        for w, y in zip(weights, members):
            g += w * ImpKernel.grad_row(payload, x, y)
        return g

    @staticmethod
    def aggregate_grad_col(payload, y, members, weights):
        # the column player maximises the negative of the row payoff
        g = np.zeros(5)
        for w, x in zip(weights, members):
            g -= w * ImpKernel.grad_col(payload, x, y)
        return g


def rollouts(payload: ImpPayload, x, y, n: int, rng: np.random.Generator):
    """Sample ``n`` independent episodes at once.

    Returns (states, actions, rewards) with shapes (n, H), (n, H, 2), (n, H).
    """
    p = np.append(_probs(x)[1:], _probs(x)[0])  # reorder so START=4 indexes the start logit
    q = np.append(_probs(y)[1:], _probs(y)[0])
    H = payload.horizon
    r = payload.rewards
    states = np.empty((n, H), dtype=np.int64)
    actions = np.empty((n, H, 2), dtype=np.int64)
    s = np.full(n, START)
    for t in range(H):
        u = rng.random((n, 2))
        a_row = (u[:, 0] >= p[s]).astype(np.int64)  # 0 = Head
        a_col = (u[:, 1] >= q[s]).astype(np.int64)
        states[:, t] = s
        actions[:, t, 0] = a_row
        actions[:, t, 1] = a_col
        s = 2 * a_row + a_col
    rewards = r[2 * actions[:, :, 0] + actions[:, :, 1]]
    return states, actions, rewards


def imp_rollout(game, p1, p2, rng: np.random.Generator) -> Trajectory:
    """One episode of length ``horizon`` under both policies."""
    if game.kind is not GameKind.IMP:
        from ..errors import UnsupportedGameError
        raise UnsupportedGameError("rollouts are only defined for iterated matching pennies")
    states, actions, rewards = rollouts(game.payload, p1, p2, 1, rng)
    return Trajectory(states[0], actions[0], rewards[0])


def score_function(x, states, actions, seat: int):
    """Per-episode gradient of the log-likelihood of one player's actions w.r.t. its logits.

    ``states`` uses START=4 for the initial state; the result is in logit
    order [start, HH, HT, TH, TT].
    """
    pr = _probs(x)
    p = np.append(pr[1:], pr[0])
    head = (actions[..., seat] == 0).astype(float)
    per_step = head - p[states]  # d/dlogit log pi(a|s) for a Bernoulli-sigmoid head
    out = np.zeros(states.shape[:-1] + (5,))
    for s in range(5):
        out[..., s] = np.sum(per_step * (states == s), axis=-1)
    return np.concatenate([out[..., 4:5], out[..., :4]], axis=-1)


register(GameKind.IMP, ImpKernel)
