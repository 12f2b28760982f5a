"""Game environments: sampling, exact payoffs and analytic payoff gradients."""

from .base import (
    GameInstance, GameKind, aggregate_grad, check_policy, payoff, payoff_grad_col,
    payoff_grad_row, payoffs_against, random_policy, sample_game,
)
from .matrix import ExternalPayload, GosPayload, exact_exploitability, load_payoff_csv, write_payoff_csv
from .lotto import LottoPayload
from .rps2d import Rps2dPayload, cycle_matrix
from .imp import ImpPayload, Trajectory, imp_rollout, rollouts, score_function
from .kuhn import KuhnPayload, first_seat_value, infostate_action_values
from . import kuhn


def kuhn_infostate_action_values(game, weights, members, continuation=None):
    """Per-state [passive, aggressive] values against a Kuhn opponent mixture."""
    if game.kind is not GameKind.KUHN:
        from ..errors import UnsupportedGameError
        raise UnsupportedGameError("information-state values are only defined for Kuhn poker")
    return infostate_action_values(weights, members, continuation)


__all__ = [
    "GameInstance", "GameKind", "sample_game", "payoff", "payoff_grad_row", "payoff_grad_col",
    "payoffs_against", "aggregate_grad", "random_policy", "check_policy",
    "GosPayload", "ExternalPayload", "LottoPayload", "Rps2dPayload", "ImpPayload", "KuhnPayload",
    "exact_exploitability", "load_payoff_csv", "write_payoff_csv", "cycle_matrix",
    "Trajectory", "imp_rollout", "rollouts", "score_function",
    "first_seat_value", "infostate_action_values", "kuhn_infostate_action_values", "kuhn",
]
