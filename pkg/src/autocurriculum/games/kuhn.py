"""Kuhn poker with behavioural strategies covering both seats.

Three cards J < Q < K, one card each, ante 1, one bet of size 1.  A policy is
12 probabilities of the aggressive action (bet or call) at each information
state, ordered lexicographically by (seat, card, history):

    index  seat  card  history   decision
    0-5    1     J,Q,K "" / "pb" open: bet or check / facing a bet: call or fold
    6-11   2     J,Q,K "b" / "p" facing a bet: call or fold / after a check: bet or check

so seat-1 entries sit at ``2 * card + h`` and seat-2 entries at
``6 + 2 * card + h``.  Action 0 is the passive action (check or fold),
action 1 the aggressive one.

The meta-game payoff symmetrises over seats:
``payoff(x, y) = (u1(x, y) - u1(y, x)) / 2`` where ``u1(x, y)`` is the
first seat's expected winnings with x in seat 1 and y in seat 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, SimplexError
from .base import GameKind, register

N_INFOSTATES = 12
INFOSTATE_NAMES = tuple(
    f"seat{seat}:{card}:{hist}"
    for seat, hists in ((1, ("", "pb")), (2, ("b", "p")))
    for card in "JQK"
    for hist in hists
)

_DEALS = [(c1, c2) for c1 in range(3) for c2 in range(3) if c1 != c2]
# winner sign from seat 1's perspective, indexed [c1, c2]
_WIN = np.sign(np.arange(3)[:, None] - np.arange(3)[None, :]).astype(float)


def open_index(card):
    return 2 * card


def pb_index(card):
    return 2 * card + 1


def b_index(card):
    return 6 + 2 * card


def p_index(card):
    return 7 + 2 * card


@dataclass(frozen=True)
class KuhnPayload:
    pass


def first_seat_value(x, y) -> float:
    """Expected winnings of seat 1 playing x's seat-1 part against y's seat-2 part."""
    total = 0.0
    for c1, c2 in _DEALS:
        w = _WIN[c1, c2]
        bet = x[open_index(c1)]
        call = y[b_index(c2)]
        raise_ = y[p_index(c2)]
        call_back = x[pb_index(c1)]
        after_bet = call * 2 * w + (1 - call)
        after_check = raise_ * (call_back * 2 * w - (1 - call_back)) + (1 - raise_) * w
        total += bet * after_bet + (1 - bet) * after_check
    return total / len(_DEALS)


class KuhnKernel:
    DIFFERENTIABLE = False
    TAPE = False
    DEFAULTS = {}

    @staticmethod
    def sample(cfg, rng):
        return KuhnPayload()

    @staticmethod
    def policy_dim(payload):
        return N_INFOSTATES

    @staticmethod
    def check_policy(payload, x):
        if np.any(x < 0) or np.any(x > 1):
            raise DimensionError("kuhn policies are probabilities in [0, 1]")

    @staticmethod
    def random_policy(payload, rng):
        return rng.random(N_INFOSTATES)

    @staticmethod
    def payoff(payload, x, y):
        return 0.5 * (first_seat_value(x, y) - first_seat_value(y, x))

    @staticmethod
    def payoffs_as_row(payload, x, members):
        return np.array([KuhnKernel.payoff(payload, x, np.asarray(y, float)) for y in members])


def _member_values(opp) -> np.ndarray:
    """Action values against one opponent, before the seat-1 follow-up is folded in."""
    V = np.zeros((N_INFOSTATES, 2))
    scale = 0.5 / len(_DEALS)
    # seat 1: we hold c1 and the opponent answers from seat 2
    for c1, c2 in _DEALS:
        w = _WIN[c1, c2]
        call, raise_ = opp[b_index(c2)], opp[p_index(c2)]
        V[open_index(c1), 1] += scale * (call * 2 * w + (1 - call))
        V[open_index(c1), 0] += scale * (1 - raise_) * w
        V[pb_index(c1), 0] += scale * raise_ * -1.0
        V[pb_index(c1), 1] += scale * raise_ * 2 * w
    # seat 2: the opponent acts first from seat 1; we hold c2
    for c1, c2 in _DEALS:
        w = _WIN[c1, c2]
        bet, call_back = opp[open_index(c1)], opp[pb_index(c1)]
        V[b_index(c2), 0] += scale * bet * -1.0
        V[b_index(c2), 1] += scale * bet * -2 * w
        V[p_index(c2), 0] += scale * (1 - bet) * -w
        V[p_index(c2), 1] += scale * (1 - bet) * -(call_back * 2 * w - (1 - call_back))
    return V


def infostate_action_values(weights, members, continuation=None) -> np.ndarray:
    """Counterfactual value of each action at each information state.

    Returns a (12, 2) array for [passive, aggressive] against the mixture
    ``sum_k weights[k] * members[k]`` in the symmetrised game; values are
    weighted by chance and opponent reach so that for any policy x the
    payoff against the mixture equals

        sum over root states s of  (1 - x_s) V[s, 0] + x_s V[s, 1]

    where the seat-1 check value folds in the follow-up decision at "pb".
    That follow-up is played by ``continuation`` (a 12-vector) if given,
    otherwise by the best response, which makes the result the input to the
    exact best response.
    """
    weights = np.asarray(weights, float)
    if len(members) == 0:
        raise DimensionError("opponent population is empty")
    if weights.shape != (len(members),):
        raise DimensionError("weights and population sizes differ")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-6:
        raise SimplexError("mixture weights are not a probability vector")
    V = np.zeros((N_INFOSTATES, 2))
    for wk, y in zip(weights, members):
        if wk != 0.0:
            V += wk * _member_values(np.asarray(y, float))
    for c1 in range(3):
        if continuation is None:
            follow = V[pb_index(c1)].max()
        else:
            c = continuation[pb_index(c1)]
            follow = (1 - c) * V[pb_index(c1), 0] + c * V[pb_index(c1), 1]
        V[open_index(c1), 0] += follow
    return V


ROOTS = tuple([open_index(c) for c in range(3)] + [b_index(c) for c in range(3)]
              + [p_index(c) for c in range(3)])


def value_from_action_values(x, V) -> float:
    return float(sum((1 - x[s]) * V[s, 0] + x[s] * V[s, 1] for s in ROOTS))


def best_response_actions(V) -> np.ndarray:
    """Argmax action per information state; ties go to the passive action."""
    return (V[:, 1] > V[:, 0]).astype(int)


register(GameKind.KUHN, KuhnKernel)
