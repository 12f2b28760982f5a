"""Two-dimensional rock-paper-scissors over a ring of Gaussian modes.

A strategy is a point in the plane.  Its mode weights are unnormalised
Gaussian bumps (peak value 1) around seven centers.  Payoff mixes a cyclic
part through a 7-cycle matrix (each mode beats the next three) with a
transitive part rewarding total mode weight:

    payoff(x, y) = u(x)^T S u(y) + sum(u(x)) - sum(u(y))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tape as ad
from ..errors import ConfigError
from .base import GameKind, frozen_array, register

N_MODES = 7


def cycle_matrix(n: int = N_MODES) -> np.ndarray:
    S = np.zeros((n, n))
    half = (n - 1) // 2
    for i in range(n):
        for j in range(n):
            d = (j - i) % n
            if 1 <= d <= half:
                S[i, j] = 1.0
            elif d > half:
                S[i, j] = -1.0
    return S


@dataclass(frozen=True)
class Rps2dPayload:
    centers: np.ndarray  # (7, 2)
    S: np.ndarray
    bandwidth: float


def _modes(payload, X):
    """Mode weights for a single point (shape (7,)) or a stack of points (n, 7)."""
    mu = payload.centers
    h2 = payload.bandwidth ** 2
    if ad.value_of(X).ndim == 1:
        d = ad.reshape(X, (1, 2)) - mu
        return ad.exp(-ad.sum(d * d, axis=1) / (2.0 * h2))
    # |x - mu|^2 expanded so that the stack stays a 2-D matmul
    xx = ad.reshape(ad.sum(X * X, axis=1), (-1, 1))
    mm = np.sum(mu * mu, axis=1).reshape(1, -1)
    d2 = xx - 2.0 * ad.matmul(X, mu.T) + mm
    return ad.exp(-d2 / (2.0 * h2))


class Rps2dKernel:
    DIFFERENTIABLE = True
    TAPE = True
    DEFAULTS = {"radius": 2.0, "bandwidth": 1.0, "jitter": 0.0}

    @staticmethod
    def sample(cfg, rng):
        radius, h, jitter = float(cfg["radius"]), float(cfg["bandwidth"]), float(cfg["jitter"])
        if radius <= 0 or h <= 0 or jitter < 0:
            raise ConfigError("rps2d radius and bandwidth must be positive, jitter nonnegative")
        angle = rng.uniform(0.0, 2 * np.pi) + 2 * np.pi * np.arange(N_MODES) / N_MODES
        centers = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
        if jitter > 0:
            centers = centers + rng.normal(scale=jitter, size=centers.shape)
        return Rps2dPayload(frozen_array(centers), frozen_array(cycle_matrix()), h)

    @staticmethod
    def policy_dim(payload):
        return 2

    @staticmethod
    def check_policy(payload, x):
        pass

    @staticmethod
    def random_policy(payload, rng):
        return rng.normal(size=2)

    @staticmethod
    def modes(payload, x):
        return _modes(payload, x)

    @staticmethod
    def payoff(payload, x, y):
        ux, uy = _modes(payload, x), _modes(payload, y)
        return ux @ payload.S @ uy + ad.sum(ux) - ad.sum(uy)

    @staticmethod
    def payoffs_as_row(payload, x, members):
        ux = _modes(payload, x)
        U = _modes(payload, ad.stack(members))
        return ad.matmul(U, ad.matmul(ux, payload.S)) + ad.sum(ux) - ad.sum(U, axis=1)

    @staticmethod
    def grad_row(payload, x, y):
        return Rps2dKernel.aggregate_grad(payload, x, [y], np.ones(1))

    @staticmethod
    def aggregate_grad(payload, x, members, weights):
        U = _modes(payload, ad.stack(members))
        ux = _modes(payload, x)
        # d payoff / d u(x), aggregated over the mixture
        w = ad.matmul(payload.S, ad.matmul(weights, U)) + ad.sum(weights)
        wu = w * ux
        return (ad.matmul(wu, payload.centers) - ad.sum(wu) * x) / payload.bandwidth ** 2


register(GameKind.RPS2D, Rps2dKernel)
