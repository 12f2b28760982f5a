"""Differentiable Lotto.

Each player places ``k`` servers in the plane and spreads one unit of
resource over them.  Customers are softly assigned to all 2k servers by a
softmax over negative squared distance, and a player collects the resource
of its servers weighted by those assignments.

Policy layout: ``x.reshape(k, 3)`` with column 0 the resource logit and
columns 1-2 the server coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tape as ad
from ..errors import ConfigError
from .base import GameKind, frozen_array, register


@dataclass(frozen=True)
class LottoPayload:
    customers: np.ndarray  # (c, 2)
    servers: int


def _unpack(x, k):
    X = ad.reshape(x, (k, 3))
    return ad.softmax(X[:, 0]), X[:, 1:]


def _sqdist(C, V):
    # (c, k) matrix of squared distances, written with tape-friendly ops
    cc = np.sum(C * C, axis=1).reshape(-1, 1)
    vv = ad.reshape(ad.sum(V * V, axis=1), (1, -1))
    return cc - 2.0 * ad.matmul(C, ad.transpose(V)) + vv


def _assign(C, V, W):
    return ad.softmax(ad.concatenate([-_sqdist(C, V), -_sqdist(C, W)], axis=1), axis=1)


class LottoKernel:
    DIFFERENTIABLE = True
    TAPE = True
    DEFAULTS = {"customers": 9, "servers": 16}

    @staticmethod
    def sample(cfg, rng):
        c, k = int(cfg["customers"]), int(cfg["servers"])
        if c < 1 or k < 1:
            raise ConfigError("lotto needs at least one customer and one server")
        return LottoPayload(frozen_array(rng.normal(size=(c, 2))), k)

    @staticmethod
    def policy_dim(payload):
        return 3 * payload.servers

    @staticmethod
    def check_policy(payload, x):
        pass

    @staticmethod
    def random_policy(payload, rng):
        return rng.normal(size=3 * payload.servers)

    @staticmethod
    def payoff(payload, x, y):
        k = payload.servers
        p, V = _unpack(x, k)
        q, W = _unpack(y, k)
        A = _assign(payload.customers, V, W)
        return ad.sum(ad.matmul(A, ad.concatenate([p, -q])))

    @staticmethod
    def payoffs_as_row(payload, x, members):
        return ad.stack([LottoKernel.payoff(payload, x, y) for y in members])

    @staticmethod
    def grad_row(payload, x, y):
        return LottoKernel.aggregate_grad(payload, x, [y], np.ones(1))

    @staticmethod
    def aggregate_grad(payload, x, members, weights):
        k = payload.servers
        C = payload.customers
        p, V = _unpack(x, k)
        g_logit = 0.0
        g_pos = 0.0
        for j, y in enumerate(members):
            q, W = _unpack(y, k)
            A = _assign(C, V, W)
            f = ad.reshape(ad.matmul(A, ad.concatenate([p, -q])), (-1, 1))
            Ar = A[:, :k]
            gp = ad.sum(Ar, axis=0)
            coef = Ar * (ad.reshape(p, (1, -1)) - f)
            # d/dV of sum_i A_ij (p_j - f_i) * (-|c_i - v_j|^2)
            gv = 2.0 * (ad.matmul(ad.transpose(coef), C)
                        - ad.reshape(ad.sum(coef, axis=0), (-1, 1)) * V)
            w = weights[j]
            g_logit = g_logit + w * gp
            g_pos = g_pos + w * gv
        g_logit = p * (g_logit - ad.sum(p * g_logit))
        return ad.reshape(ad.concatenate([ad.reshape(g_logit, (-1, 1)), g_pos], axis=1), (-1,))


register(GameKind.LOTTO, LottoKernel)
