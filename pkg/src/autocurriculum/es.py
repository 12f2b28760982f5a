"""Gaussian-smoothing (evolution strategies) gradient estimates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteError

CONTROL_VARIATES = ("forward_fd", "none")


@dataclass(frozen=True)
class EsConfig:
    n_perturb: int = 30
    sigma: float = 0.1
    antithetic: bool = True
    control_variate: str = "forward_fd"

    def __post_init__(self):
        if self.n_perturb < 1:
            raise ConfigError("need at least one perturbation")
        if not self.sigma > 0:
            raise ConfigError("perturbation scale must be positive")
        if self.control_variate not in CONTROL_VARIATES:
            raise ConfigError(f"unknown control variate {self.control_variate!r}")


def perturbation(seed_words: Sequence[int], i: int, dim: int) -> np.ndarray:
    """Direction ``i``; depends only on the seed words and the index."""
    return np.random.default_rng([*map(int, seed_words), int(i)]).standard_normal(dim)


def es_samples(objective: Callable, theta, cfg: EsConfig, seed_words: Sequence[int],
               order=None, baseline=None):
    """Per-direction gradient samples, stacked by direction index.

    Without antithetic pairs each sample is ``(F(theta + s e) - b) e / s``
    with ``b = F(theta)`` under the forward-difference control variate and 0
    otherwise; with pairs it is ``(F(theta + s e) - F(theta - s e)) e / (2 s)``.
    ``order`` only changes the evaluation order, never the result.
    """
    theta = np.asarray(theta, float)
    n, s = cfg.n_perturb, cfg.sigma
    if baseline is None and cfg.control_variate == "forward_fd" and not cfg.antithetic:
        baseline = _finite(objective(theta))
    b = 0.0 if (cfg.control_variate == "none" or cfg.antithetic) else baseline
    out = np.empty((n, theta.size))
    for i in (range(n) if order is None else order):
        eps = perturbation(seed_words, i, theta.size)
        if cfg.antithetic:
            diff = _finite(objective(theta + s * eps)) - _finite(objective(theta - s * eps))
            out[i] = diff * eps / (2 * s)
        else:
            out[i] = (_finite(objective(theta + s * eps)) - b) * eps / s
    return out


def es_estimate(objective: Callable, theta, cfg: EsConfig, seed_words: Sequence[int] = (0,),
                order=None, baseline=None) -> np.ndarray:
    """Average of :func:`es_samples`, reduced in index order."""
    return es_samples(objective, theta, cfg, seed_words, order, baseline).mean(axis=0)


def _finite(v) -> float:
    v = float(v)
    if not np.isfinite(v):
        raise NonFiniteError("objective evaluation is not finite")
    return v


def clip_by_norm(g, clip: float | None) -> np.ndarray:
    """Rescale ``g`` to norm ``clip`` when it is longer; identity otherwise."""
    g = np.asarray(g, float)
    if clip is None or clip <= 0:
        return g
    norm = float(np.linalg.norm(g))
    if norm > clip:
        return g * (clip / norm)
    return g


def update_params(theta, g, lr: float, clip: float | None = None) -> np.ndarray:
    """One plain SGD step on a copy of ``theta``."""
    theta = np.asarray(theta, float)
    g = np.asarray(g, float)
    if g.shape != theta.shape:
        raise ConfigError(f"gradient shape {g.shape} does not match parameters {theta.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("meta-gradient is not finite")
    return theta - lr * clip_by_norm(g, clip)
