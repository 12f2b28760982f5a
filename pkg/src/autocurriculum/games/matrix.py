"""Normal-form zero-sum games over mixed strategies: random games of skill and
payoff matrices read from disk.

A policy is a logit vector; the mixed strategy is its softmax.  The payoff of
x against y is ``softmax(x) @ G @ softmax(y)`` for an antisymmetric ``G``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import tape as ad
from ..errors import ConfigError, PayoffFileError
from .base import GameInstance, GameKind, frozen_array, register


@dataclass(frozen=True)
class GosPayload:
    dim: int
    G: np.ndarray


@dataclass(frozen=True)
class ExternalPayload:
    dim: int
    G: np.ndarray
    deviation: float  # max |(A + A^T)/2| removed when loading
    source: str = ""


class MatrixKernel:
    DIFFERENTIABLE = True
    TAPE = True
    DEFAULTS = {"dim": 200, "sigma_w": 1.0, "sigma_s": 1.0}

    @staticmethod
    def sample(cfg, rng):
        dim = int(cfg["dim"])
        if dim < 1:
            raise ConfigError("games of skill need a positive dimension")
        if cfg["sigma_w"] < 0 or cfg["sigma_s"] < 0:
            raise ConfigError("games of skill scales must be nonnegative")
        W = rng.normal(0.0, cfg["sigma_w"], size=(dim, dim))
        S = rng.normal(0.0, cfg["sigma_s"], size=dim)
        # (W - W^T) rather than half of it: stronger cyclic component
        G = (W - W.T) + (S[:, None] - S[None, :])
        return GosPayload(dim, frozen_array(G))

    @staticmethod
    def policy_dim(payload):
        return payload.dim

    @staticmethod
    def check_policy(payload, x):
        pass

    @staticmethod
    def random_policy(payload, rng):
        return rng.normal(size=payload.dim)

    @staticmethod
    def payoff(payload, x, y):
        return ad.softmax(x) @ payload.G @ ad.softmax(y)

    @staticmethod
    def grad_row(payload, x, y):
        s = ad.softmax(x)
        g = payload.G @ ad.softmax(y)
        return s * (g - np.sum(s * g))

    @staticmethod
    def payoffs_as_row(payload, x, members):
        Q = ad.softmax(ad.stack(members), axis=1)
        return ad.matmul(ad.matmul(ad.softmax(x), payload.G), ad.transpose(Q))

    @staticmethod
    def aggregate_grad(payload, x, members, weights):
        Q = ad.softmax(ad.stack(members), axis=1)
        s = ad.softmax(x)
        g = ad.matmul(payload.G, ad.matmul(weights, Q))
        return s * (g - ad.sum(s * g))


def exact_exploitability(payload, weights, members) -> float:
    """Best pure-strategy payoff against the aggregated opponent."""
    Q = ad.softmax(np.stack([np.asarray(m, float) for m in members]), axis=1)
    q = np.asarray(weights, float) @ Q
    return float(np.max(payload.G @ q))


def pure_policy(dim: int, index: int, scale: float = 30.0) -> np.ndarray:
    """Logits whose softmax puts essentially all mass on ``index``."""
    x = np.zeros(dim)
    x[index] = scale
    return x


def load_payoff_csv(path) -> GameInstance:
    """Read a square comma-separated payoff matrix without header.

    The matrix is made antisymmetric via ``(A - A^T) / 2``; the largest
    entry of the discarded symmetric part is kept as ``payload.deviation``.
    """
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec or all(not c.strip() for c in rec):
                    continue
                try:
                    rows.append([float(c) for c in rec])
                except ValueError:
                    raise PayoffFileError(f"{path}:{lineno}: non-numeric cell") from None
    except OSError as e:
        raise PayoffFileError(f"cannot read {path}: {e}") from e
    if not rows:
        raise PayoffFileError(f"{path}: empty payoff file")
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise PayoffFileError(f"{path}: ragged rows")
    if len(rows) != n:
        raise PayoffFileError(f"{path}: matrix is {len(rows)}x{n}, not square")
    A = np.array(rows)
    if not np.all(np.isfinite(A)):
        raise PayoffFileError(f"{path}: non-finite entries")
    G = (A - A.T) / 2.0
    deviation = float(np.max(np.abs((A + A.T) / 2.0)))
    return GameInstance(GameKind.EXTERNAL, ExternalPayload(n, frozen_array(G), deviation, str(path)),
                        True, 0)


def write_payoff_csv(path, M) -> None:
    """Write a matrix in the format :func:`load_payoff_csv` reads, at full precision."""
    M = np.asarray(M, float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


register(GameKind.GOS, MatrixKernel)
register(GameKind.EXTERNAL, MatrixKernel)
