"""The population-expansion loop.

Starting from one random policy, each iteration asks the meta-solver for a
distribution over the current population, trains a best response against
that mixture and appends it.  After the last iteration a fresh best response
against the final mixture measures exploitability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tape as ad
from .errors import ConfigError, NonFiniteError
from .oracles import OracleConfig, best_response, exploitability
from .population import Population, Side, evaluate_meta_game, extend_population, initial_population
from .solvers import solve_both

# rng stream identifiers
_POP, _BR, _EXPL = 0, 1, 2


def stream(seed: int, kind: int, t: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), kind, t])


@dataclass(frozen=True)
class PsroConfig:
    iterations: int = 20
    oracle: OracleConfig = field(default_factory=OracleConfig)
    exploit_oracle: OracleConfig = field(default_factory=OracleConfig)
    init_pop: int = 1
    exact_exploitability: bool = False
    window: int | None = None  # trailing iterations recorded on a tape; None means all

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("PSRO iterations must be nonnegative")
        if self.init_pop < 1:
            raise ConfigError("initial population needs at least one policy")
        if self.window is not None and not 0 <= self.window <= max(self.iterations, 0):
            raise ConfigError("window must lie between 0 and the number of iterations")


@dataclass
class PsroResult:
    exploitability: float
    population: object
    meta_game: np.ndarray
    distributions: list
    curve: list = field(default_factory=list)  # exploitability after each iteration, t = 0..T


def _solve(solver, M, symmetric):
    return solver(M) if symmetric else solve_both(solver, M)


def run_psro(game, solver: Callable, cfg: PsroConfig, seed: int, track: bool = False,
             solver_at: Callable | None = None, br: Callable | None = None) -> PsroResult:
    """Run ``cfg.iterations`` expansion steps and measure final exploitability.

    ``solver(M)`` returns the meta-distribution (a pair for two-population
    games).  ``solver_at(t)``, when given, picks the solver per iteration,
    with t = T standing for the final evaluation; it lets callers switch a
    learned solver onto a tape part-way through the run.  ``br`` replaces the
    best-response dispatcher for both expansion and measurement.
    """
    br = br or best_response
    T = cfg.iterations
    pick = solver_at or (lambda t: solver)
    rng0 = stream(seed, _POP)
    if game.symmetric:
        pop = initial_population(game, rng0, cfg.init_pop)
    else:
        pop = (initial_population(game, rng0, cfg.init_pop, Side.ROW),
               initial_population(game, rng0, cfg.init_pop, Side.COL))
    M = evaluate_meta_game(game, pop)
    dists, curve = [], []
    for t in range(1, T + 1):
        solve = pick(t - 1)
        pi = _solve(solve, M, game.symmetric)
        dists.append(pi)
        if track:
            curve.append(_measure(game, pi, pop, cfg, seed, t - 1, br))
        rng = stream(seed, _BR, t)
        pop = _expand(game, pi, pop, cfg.oracle, rng, br)
        M = evaluate_meta_game(game, pop, previous=M)
        _check_finite(M)
    pi = _solve(pick(T), M, game.symmetric)
    dists.append(pi)
    value = _measure(game, pi, pop, cfg, seed, T, br)
    if track:
        curve.append(value)
    return PsroResult(value, pop, M, dists, curve)


def _expand(game, pi, pop, oracle, rng, br):
    if game.symmetric:
        phi = br(game, pi, pop, oracle, rng)
        return extend_population(pop, phi)
    (pi_r, pi_c), (rows, cols) = pi, pop
    phi_r = br(game, pi_c, cols, oracle, rng, side="row")
    phi_c = br(game, pi_r, rows, oracle, rng, side="col")
    return extend_population(rows, phi_r), extend_population(cols, phi_c)


def _measure(game, pi, pop, cfg, seed, t, br):
    value = exploitability(game, pi, pop, cfg.exploit_oracle, stream(seed, _EXPL, t),
                           exact=cfg.exact_exploitability, br=br)
    v = ad.value_of(value)
    if not np.isfinite(v):
        raise NonFiniteError("exploitability is not finite")
    return value


def _check_finite(M):
    if not np.all(np.isfinite(ad.value_of(M))):
        raise NonFiniteError("meta-game has non-finite entries")


def final_exploitability(game, solver, cfg: PsroConfig, seed: int) -> float:
    return float(ad.value_of(run_psro(game, solver, cfg, seed).exploitability))
