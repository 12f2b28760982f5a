"""Exact meta-gradients of final exploitability with respect to solver parameters.

The PSRO run is unrolled on a tape.  Iterations before the last ``window``
ones run on plain arrays, so the members they create enter later payoff
entries as constants.  Inside the window the meta-distribution, each
gradient-ascent best response and every new payoff entry are recorded, and
the final best response used to measure exploitability is always recorded.

Implicit mode replaces the unrolled best-response ascent by its fixed point:
the response is trained to stationarity off the tape and then attached as a
custom node whose backward pass applies the implicit function theorem.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tape as ad
from .errors import ConfigError, IllConditionedError, NonFiniteError, UnsupportedGameError
from .games import aggregate_grad
from .oracles import OracleConfig, gd_best_response
from .population import aggregate_payoff
from .psro import PsroConfig, run_psro
from .solvers import Arch, MetaSolverParams, solver_forward

COND_LIMIT = 1e12


@dataclass(frozen=True)
class MetaGradConfig:
    psro: PsroConfig = field(default_factory=PsroConfig)
    window: int = 5
    implicit: bool = False
    damping: float = 1e-3  # added to the negated best-response Hessian in implicit mode

    def __post_init__(self):
        if not 0 <= self.window <= self.psro.iterations:
            raise ConfigError("window must lie between 0 and the number of PSRO iterations")
        if self.damping < 0:
            raise ConfigError("implicit damping must be nonnegative")
        for o in (self.psro.oracle, self.psro.exploit_oracle):
            if o.method != "gd":
                raise ConfigError("meta-gradients need gradient-ascent oracles")


def _check(theta, game):
    if theta.arch is not Arch.MLP:
        raise ConfigError("exact meta-gradients are implemented for the mlp solver only")
    if not game.tape_capable or not game.symmetric:
        raise UnsupportedGameError(f"{game.kind.value} cannot be differentiated on a tape")


def unrolled_psro_forward(theta: MetaSolverParams, game, cfg: MetaGradConfig, seed: int,
                          flat=None):
    """Returns (exploitability, tape, leaf).  ``exploitability`` is a tape value."""
    _check(theta, game)
    tape = ad.Tape()
    leaf = tape.leaf(theta.flat if flat is None else flat, "theta")
    T = cfg.psro.iterations
    first_taped = T - cfg.window  # solver calls at t >= this are recorded

    def numeric(M):
        return solver_forward(theta, ad.value_of(M), flat=leaf.value)

    def taped(M):
        return solver_forward(theta, M, flat=leaf)

    def solver_at(t):
        return taped if t >= first_taped else numeric

    br = _implicit_dispatch(cfg.damping) if cfg.implicit else None
    if cfg.implicit:
        _stationary(cfg.psro.oracle)
        _stationary(cfg.psro.exploit_oracle)
    result = run_psro(game, None, cfg.psro, seed, solver_at=solver_at, br=br)
    value = result.exploitability
    if not ad.is_var(value):
        raise NonFiniteError("exploitability did not depend on the solver parameters")
    return value, tape, leaf


def psro_objective(theta: MetaSolverParams, game, cfg: MetaGradConfig, seed: int, frozen=None):
    """Plain-array exploitability as a function of solver parameters.

    Passing ``frozen`` evaluates the solver with those parameters for every
    iteration before the window, which makes finite differences of this
    function the truncated objective the tape differentiates.
    """
    _check(theta, game)
    T = cfg.psro.iterations
    first_taped = T - cfg.window

    def solver_at(t):
        params = theta if (frozen is None or t >= first_taped) else frozen
        return lambda M: solver_forward(params, M)

    if cfg.implicit:
        _stationary(cfg.psro.oracle)
        _stationary(cfg.psro.exploit_oracle)
    return float(run_psro(game, None, cfg.psro, seed, solver_at=solver_at).exploitability)


def direct_meta_gradient(theta: MetaSolverParams, game, cfg: MetaGradConfig, seed: int):
    """Returns (exploitability, gradient)."""
    value, tape, leaf = unrolled_psro_forward(theta, game, cfg, seed)
    (grad,) = tape.backward(value, [leaf])
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("meta-gradient is not finite")
    return float(value.value), grad


def implicit_meta_gradient(theta: MetaSolverParams, game, cfg: MetaGradConfig, seed: int):
    if not cfg.implicit:
        cfg = replace(cfg, implicit=True)
    return direct_meta_gradient(theta, game, cfg, seed)


def finite_diff_gradient(objective, theta_flat, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``objective`` at ``theta_flat``, one coordinate at a time."""
    if h <= 0:
        raise ConfigError("finite-difference step must be positive")
    x = np.array(theta_flat, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        hi, lo = objective(x + e), objective(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NonFiniteError("objective is not finite")
        out[i] = (hi - lo) / (2 * h)
    return out


# -- implicit best responses ------------------------------------------------

def _stationary(oracle: OracleConfig) -> OracleConfig:
    if oracle.grad_norm_break is None:
        raise ConfigError("implicit mode needs an oracle gradient-norm break value")
    return oracle


def implicit_best_response(game, pi, members, cfg: OracleConfig, damping: float, rng, side="row"):
    """Stationary best response whose sensitivities come from the implicit function theorem.

    At a stationary point ``g(phi, pi, Phi) = 0`` of the aggregate payoff,
    ``d phi = (H + damping I)^-1 (d g)`` where ``H`` is the Hessian of the
    negated payoff.  The backward pass solves with that matrix once and
    pushes the result through the vector-Jacobian products of ``g``.
    """
    base = _stationary(cfg)
    pi_v = np.asarray(ad.value_of(pi), float)
    mem_v = [np.asarray(ad.value_of(m), float) for m in members]
    phi = gd_best_response(game, pi_v, mem_v, base, rng)
    n = phi.size

    # Jacobian of g with respect to phi, by reverse mode over a small tape
    sub = ad.Tape()
    x = sub.leaf(phi)
    g = aggregate_grad(game, x, mem_v, pi_v, side=side)
    J = np.stack([sub.backward(g, [x], cotangent=np.eye(n)[i])[0] for i in range(n)])
    A = -0.5 * (J + J.T) + damping * np.eye(n)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(
            f"best-response Hessian condition number {cond:.3g}; increase the damping")

    parents = [p for p in [pi] + list(members) if ad.is_var(p)]
    if not parents:
        return phi

    def vjp(cot):
        w = np.linalg.solve(A.T, cot)
        inner = ad.Tape()
        leaves = [inner.leaf(ad.value_of(p)) for p in parents]
        lookup = {id(p): v for p, v in zip(parents, leaves)}
        pi_in = lookup.get(id(pi), pi_v)
        mem_in = [lookup.get(id(m), mv) for m, mv in zip(members, mem_v)]
        gi = aggregate_grad(game, phi, mem_in, pi_in, side=side)
        return inner.backward(gi, leaves, cotangent=w)

    tape = parents[0].tape
    return tape.custom(phi, parents, vjp, op="implicit_br")


def _implicit_dispatch(damping):
    def br(game, pi, pop, cfg, rng=None, init=None, side="row"):
        members = list(pop.members) if hasattr(pop, "members") else list(pop)
        return implicit_best_response(game, pi, members, cfg, damping, rng, side)
    return br


def gradient_check(theta, game, cfg: MetaGradConfig, seed: int, h: float = 1e-4):
    """Relative L2 error of the tape gradient against central differences
    of the window-truncated objective."""
    _, grad = direct_meta_gradient(theta, game, cfg, seed)
    frozen = theta

    def objective(flat):
        return psro_objective(theta.with_flat(flat), game, cfg, seed, frozen=frozen)

    fd = finite_diff_gradient(objective, theta.flat, h)
    denom = max(np.linalg.norm(fd), 1e-12)
    return float(np.linalg.norm(grad - fd) / denom), grad, fd
