"""Populations of fixed policies and the meta-game between them."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import tape as ad
from .errors import DimensionError, NonFiniteError, SimplexError
from .games import GameInstance, check_policy, payoffs_against


class Side(str, enum.Enum):
    SINGLE = "single"
    ROW = "row"
    COL = "col"


@dataclass(frozen=True)
class Population:
    """Ordered, append-only snapshot of policies.  Members may be tape values."""

    members: tuple
    side: Side = Side.SINGLE

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def values(self) -> list[np.ndarray]:
        return [np.asarray(ad.value_of(m)) for m in self.members]


def initial_population(game: GameInstance, rng: np.random.Generator, size: int = 1,
                       side: Side = Side.SINGLE) -> Population:
    from .games import random_policy
    if size < 1:
        raise DimensionError("initial population needs at least one policy")
    return Population(tuple(random_policy(game, rng) for _ in range(size)), Side(side))


def extend_population(pop: Population, phi, game: GameInstance | None = None) -> Population:
    """A new population with ``phi`` appended; ``pop`` itself is untouched."""
    v = np.asarray(ad.value_of(phi))
    if game is not None:
        check_policy(game, v)
    elif pop.members and v.shape != np.shape(ad.value_of(pop.members[0])):
        raise DimensionError("new member has a different shape from the population")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("new member has non-finite parameters")
    if not ad.is_var(phi):
        phi = np.array(phi, dtype=float)
        phi.setflags(write=False)
    return Population(pop.members + (phi,), pop.side)


def evaluate_meta_game(game: GameInstance, pop, previous=None):
    """Payoff matrix between population members, from the row player's view.

    ``pop`` is a Population for symmetric games and a (row, col) pair of
    populations otherwise.  If ``previous`` holds the matrix for a prefix of
    the population(s), only the new rows and columns are evaluated.  Returns
    a plain array, or a tape value when any member is on a tape.
    """
    if isinstance(pop, tuple):
        rows, cols = pop
    else:
        rows = cols = pop
    if len(rows) == 0 or len(cols) == 0:
        raise DimensionError("population is empty")
    for m in list(rows.members) + ([] if cols is rows else list(cols.members)):
        check_policy(game, m)
    n_r, n_c = len(rows), len(cols)
    if previous is None:
        p_r = p_c = 0
        M = None
    else:
        p_r, p_c = np.shape(ad.value_of(previous))
        if p_r > n_r or p_c > n_c or (cols is rows and p_r != p_c):
            raise DimensionError("previous meta-game is larger than the population")
        M = previous
    if game.symmetric and cols is rows:
        return _grow_symmetric(game, rows.members, M, p_r)
    return _grow_general(game, rows.members, cols.members, M, p_r, p_c)


def _grow_symmetric(game, members, M, start):
    # each new member contributes a row against everything up to and
    # including itself; the column is its exact negation
    for i in range(start, len(members)):
        row = payoffs_against(game, members[i], members[: i + 1])
        # pin the diagonal to exactly zero
        row = ad.concatenate([row[:i], np.zeros(1)]) if i > 0 else np.zeros(1)
        if M is None:
            M = ad.reshape(row, (1, 1))
            continue
        col = ad.reshape(-row[:i], (i, 1))
        M = ad.concatenate([ad.concatenate([M, col], axis=1), ad.reshape(row, (1, i + 1))], axis=0)
    return M


def _grow_general(game, rows, cols, M, p_r, p_c):
    n_c = len(cols)
    # new columns for the old rows first, then whole new rows
    if M is not None and n_c > p_c:
        new_cols = [payoffs_against(game, cols[j], rows[:p_r], side="col") for j in range(p_c, n_c)]
        block = -ad.transpose(ad.stack(new_cols))
        M = ad.concatenate([M, block], axis=1)
    start = 0 if M is None else p_r
    for i in range(start, len(rows)):
        row = ad.reshape(payoffs_against(game, rows[i], cols), (1, n_c))
        M = row if M is None else ad.concatenate([M, row], axis=0)
    return M


def check_simplex(pi, n: int | None = None, tol: float = 1e-6) -> None:
    v = np.asarray(ad.value_of(pi), float)
    if v.ndim != 1 or (n is not None and v.shape[0] != n):
        raise DimensionError(f"meta-distribution of shape {v.shape} does not match population size {n}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("meta-distribution has non-finite entries")
    if np.any(v < -tol) or abs(v.sum() - 1.0) > tol:
        raise SimplexError("meta-distribution is not on the probability simplex")


def aggregate_payoff(game: GameInstance, phi, pi, pop: Population, side: str = "row"):
    """Payoff of ``phi`` against the mixture ``sum_k pi_k pop[k]``."""
    check_simplex(pi, len(pop))
    check_policy(game, phi)
    vals = payoffs_against(game, phi, list(pop.members), side=side)
    out = ad.sum(vals * pi)
    return out if ad.is_var(out) else float(out)


def write_matrix_csv(path, M) -> None:
    """Same format the payoff-file loader reads; full precision, no header."""
    from .games import write_payoff_csv
    write_payoff_csv(path, ad.value_of(M))
