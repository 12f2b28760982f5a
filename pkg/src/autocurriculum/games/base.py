"""Game instances and the kind-independent evaluation entry points."""

from __future__ import annotations

import enum
import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .. import tape as ad
from ..errors import ConfigError, DimensionError, NonFiniteError, UnsupportedGameError


class GameKind(str, enum.Enum):
    GOS = "gos"
    LOTTO = "lotto"
    RPS2D = "rps2d"
    IMP = "imp"
    KUHN = "kuhn"
    EXTERNAL = "external"

    @classmethod
    def parse(cls, value) -> "GameKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown game kind {value!r}") from None


def frozen_array(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GameInstance:
    """One sampled game.  Immutable; safe to share between evaluations.

    Equality is structural, with array fields compared elementwise.
    """

    kind: GameKind
    payload: Any
    symmetric: bool
    seed: int

    def __eq__(self, other):
        if not isinstance(other, GameInstance):
            return NotImplemented
        return ((self.kind, self.symmetric, self.seed) == (other.kind, other.symmetric, other.seed)
                and _payload_equal(self.payload, other.payload))

    def __hash__(self):
        return hash((self.kind, self.symmetric, self.seed))

    @property
    def kernel(self):
        return _KERNELS[self.kind]

    @property
    def policy_dim(self) -> int:
        return self.kernel.policy_dim(self.payload)

    @property
    def differentiable(self) -> bool:
        return self.kernel.DIFFERENTIABLE

    @property
    def tape_capable(self) -> bool:
        """Whether the payoff and its gradient can be recorded on a tape."""
        return getattr(self.kernel, "TAPE", False)

    @property
    def label(self) -> str:
        return self.kind.value


_KERNELS: dict[GameKind, Any] = {}


def _payload_equal(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if not dataclasses.is_dataclass(a):
        return a == b
    for f in dataclasses.fields(a):
        u, v = getattr(a, f.name), getattr(b, f.name)
        if isinstance(u, np.ndarray) or isinstance(v, np.ndarray):
            if not np.array_equal(u, v):
                return False
        elif u != v:
            return False
    return True


def register(kind: GameKind, kernel) -> None:
    _KERNELS[kind] = kernel


def sample_game(kind, cfg: Mapping | None = None, seed: int = 0) -> GameInstance:
    """Draw a game of ``kind`` from its distribution; a pure function of the inputs."""
    kind = GameKind.parse(kind)
    if kind is GameKind.EXTERNAL:
        raise ConfigError("external games are loaded from a payoff file, not sampled")
    kernel = _KERNELS[kind]
    cfg = dict(cfg or {})
    unknown = set(cfg) - set(kernel.DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown {kind.value} settings: {sorted(unknown)}")
    settings = {**kernel.DEFAULTS, **cfg}
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _KIND_SALT[kind]]))
    payload = kernel.sample(settings, rng)
    return GameInstance(kind, payload, kind is not GameKind.IMP, int(seed))


_KIND_SALT = {GameKind.GOS: 11, GameKind.LOTTO: 13, GameKind.RPS2D: 17,
              GameKind.IMP: 19, GameKind.KUHN: 23, GameKind.EXTERNAL: 29}


def check_policy(game: GameInstance, x) -> None:
    v = ad.value_of(x)
    n = game.policy_dim
    if np.ndim(v) != 1 or np.shape(v)[0] != n:
        raise DimensionError(
            f"{game.kind.value} policy must be a vector of length {n}, got shape {np.shape(v)}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("policy parameters must be finite")
    game.kernel.check_policy(game.payload, v)


def random_policy(game: GameInstance, rng: np.random.Generator) -> np.ndarray:
    return game.kernel.random_policy(game.payload, rng)


def payoff(game: GameInstance, row, col) -> float:
    """Payoff to the row policy; for symmetric kinds ``payoff(g, x, y) == -payoff(g, y, x)``."""
    check_policy(game, row)
    check_policy(game, col)
    return float(game.kernel.payoff(game.payload, np.asarray(row, float), np.asarray(col, float)))


def payoff_grad_row(game: GameInstance, row, col) -> np.ndarray:
    """Analytic gradient of :func:`payoff` with respect to the row parameters."""
    _need_grad(game)
    check_policy(game, row)
    check_policy(game, col)
    return game.kernel.grad_row(game.payload, np.asarray(row, float), np.asarray(col, float))


def payoff_grad_col(game: GameInstance, row, col) -> np.ndarray:
    """Gradient of the row payoff with respect to the column parameters."""
    _need_grad(game)
    check_policy(game, row)
    check_policy(game, col)
    if game.symmetric:
        return -game.kernel.grad_row(game.payload, np.asarray(col, float), np.asarray(row, float))
    return game.kernel.grad_col(game.payload, np.asarray(row, float), np.asarray(col, float))


def payoffs_against(game: GameInstance, phi, members: Sequence, side: str = "row"):
    """Payoffs of ``phi``, from its own seat, against every member of a population.

    ``side`` is only meaningful for two-population games: "row" means phi is a
    row policy facing column members, "col" the reverse.  Works on tape values.
    """
    if side == "col" and not game.symmetric:
        return game.kernel.payoffs_as_col(game.payload, phi, members)
    return game.kernel.payoffs_as_row(game.payload, phi, members)


def aggregate_grad(game: GameInstance, phi, members: Sequence, weights, side: str = "row"):
    """Gradient of ``sum_k w_k * payoff(phi, member_k)`` with respect to ``phi``.

    Written against the tape dispatch functions so that it can be recorded.
    """
    _need_grad(game)
    if side == "col" and not game.symmetric:
        return game.kernel.aggregate_grad_col(game.payload, phi, members, weights)
    return game.kernel.aggregate_grad(game.payload, phi, members, weights)


def _need_grad(game: GameInstance) -> None:
    if not game.differentiable:
        raise UnsupportedGameError(f"{game.kind.value} payoffs have no analytic gradient")
