"""Experiment configuration: a flat TOML file of typed keys.

Defaults depend on the game kind and on the profile.  The ``paper`` profile
uses the published training settings; ``desk`` halves game dimensions,
PSRO iterations and meta-training steps so a run fits on one machine.
Precedence, lowest first: kind defaults, profile, file, command-line flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import tomli

from .errors import ConfigError
from .es import CONTROL_VARIATES, EsConfig
from .games import GameKind, load_payoff_csv, sample_game
from .oracles import METHODS, OracleConfig
from .psro import PsroConfig
from .solvers import Arch

PROFILES = ("paper", "desk")
TRAINER_MODES = ("es", "direct", "implicit")


@dataclass(frozen=True)
class ExperimentConfig:
    run_id: str = "run"
    seed: int = 0
    profile: str = "desk"

    game_kind: str = "gos"
    gos_dim: int = 200
    gos_sigma_w: float = 1.0
    gos_sigma_s: float = 1.0
    lotto_customers: int = 9
    lotto_servers: int = 16
    rps2d_radius: float = 2.0
    rps2d_bandwidth: float = 1.0
    rps2d_jitter: float = 0.0
    imp_horizon: int = 50
    imp_a_low: float = 0.5
    imp_a_high: float = 2.0
    imp_b_low: float = 0.5
    imp_b_high: float = 2.0
    payoff_file: str = ""

    model_type: str = "gru"
    hidden_size: int = 64

    oracle_method: str = "gd"
    oracle_init: str = "random"
    inner_learning_rate: float = 25.0
    inner_gd_steps: int = 5
    inner_batch_size: int = 32
    inner_grad_norm_break: float = 0.0  # 0 disables; implicit mode requires it
    inner_max_steps: int = 100000
    exploitability_method: str = ""  # empty means the oracle method
    exploitability_learning_rate: float = 10.0
    exploitability_steps: int = 20
    exact_exploitability: bool = False

    psro_iterations: int = 20
    window_size: int = 5
    initial_population: int = 1

    trainer_mode: str = "es"
    outer_learning_rate: float = 0.01
    meta_training_steps: int = 100
    meta_batch_size: int = 5
    gradient_clip_value: float = 1.0
    lr_schedule_step: int = 0  # 0 disables the step decay
    lr_schedule_gamma: float = 1.0
    es_perturbations: int = 30
    es_sigma: float = 0.1
    es_antithetic: bool = True
    es_control_variate: str = "forward_fd"
    implicit_damping: float = 1e-3
    gradient_ceiling: float = 1e6

    eval_tasks: int = 20
    eval_seed: int = 20240607
    baselines: tuple = ("uniform", "nash", "last_agent")
    nash_fp_iterations: int = 1000
    nash_exact: bool = False
    sweep_dims: tuple = (30, 50)
    gradcheck_instances: int = 20

    def __post_init__(self):
        validate(self)

    # -- derived objects ---------------------------------------------------

    @property
    def kind(self) -> GameKind:
        return GameKind.parse(self.game_kind)

    def game_settings(self, dim: int | None = None) -> dict:
        k = self.kind
        if k is GameKind.GOS:
            return {"dim": dim or self.gos_dim, "sigma_w": self.gos_sigma_w, "sigma_s": self.gos_sigma_s}
        if k is GameKind.LOTTO:
            return {"customers": self.lotto_customers, "servers": self.lotto_servers}
        if k is GameKind.RPS2D:
            return {"radius": self.rps2d_radius, "bandwidth": self.rps2d_bandwidth, "jitter": self.rps2d_jitter}
        if k is GameKind.IMP:
            return {"horizon": self.imp_horizon, "a_low": self.imp_a_low, "a_high": self.imp_a_high,
                    "b_low": self.imp_b_low, "b_high": self.imp_b_high}
        return {}

    def make_game(self, seed: int, dim: int | None = None):
        if self.kind is GameKind.EXTERNAL:
            return load_payoff_csv(self.payoff_file)
        return sample_game(self.kind, self.game_settings(dim), seed)

    def oracle(self) -> OracleConfig:
        return OracleConfig(
            method=self.oracle_method, steps=self.inner_gd_steps, lr=self.inner_learning_rate,
            batch=self.inner_batch_size, init=self.oracle_init,
            grad_norm_break=self.inner_grad_norm_break or None, max_steps=self.inner_max_steps)

    def exploit_oracle(self) -> OracleConfig:
        method = self.exploitability_method or self.oracle_method
        return OracleConfig(
            method=method, steps=self.exploitability_steps, lr=self.exploitability_learning_rate,
            batch=self.inner_batch_size, init=self.oracle_init,
            grad_norm_break=self.inner_grad_norm_break or None, max_steps=self.inner_max_steps)

    def psro(self) -> PsroConfig:
        return PsroConfig(self.psro_iterations, self.oracle(), self.exploit_oracle(),
                          self.initial_population, self.exact_exploitability)

    def es(self) -> EsConfig:
        return EsConfig(self.es_perturbations, self.es_sigma, self.es_antithetic, self.es_control_variate)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.profile in PROFILES, f"profile must be one of {PROFILES}")
    need(0 <= cfg.seed < 2**64 and 0 <= cfg.eval_seed < 2**64, "seeds must be unsigned 64-bit integers")
    GameKind.parse(cfg.game_kind)
    Arch.parse(cfg.model_type)
    need(cfg.oracle_method in METHODS, f"oracle_method must be one of {METHODS}")
    need(cfg.exploitability_method in METHODS + ("",), f"exploitability_method must be one of {METHODS}")
    need(cfg.trainer_mode in TRAINER_MODES, f"trainer_mode must be one of {TRAINER_MODES}")
    need(cfg.es_control_variate in CONTROL_VARIATES, f"es_control_variate must be one of {CONTROL_VARIATES}")
    for name in ("gos_dim", "lotto_customers", "lotto_servers", "imp_horizon", "hidden_size",
                 "inner_gd_steps", "inner_batch_size", "exploitability_steps", "initial_population",
                 "meta_batch_size", "es_perturbations", "eval_tasks", "nash_fp_iterations",
                 "inner_max_steps", "gradcheck_instances"):
        need(int(getattr(cfg, name)) >= 1, f"{name} must be at least 1")
    for name in ("psro_iterations", "window_size", "meta_training_steps", "lr_schedule_step"):
        need(int(getattr(cfg, name)) >= 0, f"{name} must be nonnegative")
    need(cfg.window_size <= cfg.psro_iterations, "window_size cannot exceed psro_iterations")
    for name in ("outer_learning_rate", "es_sigma", "rps2d_radius", "rps2d_bandwidth", "gradient_ceiling"):
        need(float(getattr(cfg, name)) > 0, f"{name} must be positive")
    for name in ("inner_learning_rate", "exploitability_learning_rate", "gradient_clip_value",
                 "implicit_damping", "inner_grad_norm_break", "gos_sigma_w", "gos_sigma_s",
                 "rps2d_jitter", "lr_schedule_gamma"):
        need(float(getattr(cfg, name)) >= 0, f"{name} must be nonnegative")
    need(cfg.imp_a_low <= cfg.imp_a_high and cfg.imp_b_low <= cfg.imp_b_high, "imp payoff ranges are empty")
    need(all(b in ("uniform", "nash", "last_agent") for b in cfg.baselines), "unknown baseline name")
    need(all(int(d) >= 1 for d in cfg.sweep_dims), "sweep_dims must be positive")
    if cfg.trainer_mode in ("direct", "implicit"):
        need(Arch.parse(cfg.model_type) is Arch.MLP, "direct and implicit meta-gradients need model_type = mlp")
        need(cfg.oracle_method == "gd" and (cfg.exploitability_method or "gd") == "gd",
             "direct and implicit meta-gradients need gradient-ascent oracles")
        need(cfg.game_kind in ("gos", "lotto", "rps2d", "external"),
             "direct and implicit meta-gradients support gos, lotto, rps2d and external games")
    if cfg.trainer_mode == "implicit":
        need(cfg.inner_grad_norm_break > 0, "implicit mode needs inner_grad_norm_break > 0")
    if cfg.kind is GameKind.EXTERNAL:
        need(bool(cfg.payoff_file), "external games need payoff_file")
    if cfg.kind is GameKind.KUHN:
        need(cfg.oracle_method.startswith("kuhn"), "kuhn games need a kuhn_* oracle")
    elif cfg.kind is GameKind.IMP:
        need(cfg.oracle_method in ("gd", "reinforce"), "imp games need gd or reinforce oracles")
    else:
        need(cfg.oracle_method == "gd", f"{cfg.game_kind} games need the gd oracle")


# Published per-game training settings.
_PAPER = {
    "gos": dict(gos_dim=200, model_type="gru", outer_learning_rate=0.01, meta_training_steps=100,
                meta_batch_size=5, gradient_clip_value=1.0, psro_iterations=20, window_size=5,
                inner_learning_rate=25.0, inner_gd_steps=5, exploitability_learning_rate=10.0,
                exploitability_steps=20),
    "lotto": dict(lotto_customers=9, lotto_servers=500, model_type="gru", outer_learning_rate=0.001,
                  meta_training_steps=100, meta_batch_size=5, gradient_clip_value=1.0,
                  psro_iterations=20, window_size=5, inner_learning_rate=20.0, inner_gd_steps=20,
                  exploitability_learning_rate=20.0, exploitability_steps=30),
    "rps2d": dict(model_type="conv1d", outer_learning_rate=0.007, meta_training_steps=400,
                  meta_batch_size=8, lr_schedule_step=100, lr_schedule_gamma=0.3,
                  gradient_clip_value=2.0, psro_iterations=15, window_size=9,
                  inner_learning_rate=2.0, inner_gd_steps=5, exploitability_learning_rate=2.0,
                  exploitability_steps=20),
    "imp": dict(model_type="gru", oracle_method="reinforce", outer_learning_rate=0.004,
                meta_training_steps=50, meta_batch_size=8, gradient_clip_value=0.002,
                psro_iterations=9, window_size=3, inner_learning_rate=10.0, inner_gd_steps=10,
                exploitability_learning_rate=10.0, exploitability_steps=20, inner_batch_size=32,
                imp_horizon=50),
    "kuhn": dict(model_type="conv1d", oracle_method="kuhn_v1", exploitability_method="kuhn_exact",
                 outer_learning_rate=0.1, meta_training_steps=100, meta_batch_size=5,
                 lr_schedule_step=50, lr_schedule_gamma=0.5, psro_iterations=15, window_size=5,
                 es_perturbations=30, gradient_clip_value=0.0),
}
_PAPER["external"] = dict(_PAPER["gos"])
_PAPER["external"].pop("gos_dim")


def kind_defaults(kind: str, profile: str) -> dict:
    base = dict(_PAPER[GameKind.parse(kind).value])
    if profile == "desk":
        for key in ("gos_dim", "psro_iterations", "meta_training_steps"):
            if key in base:
                base[key] = max(1, base[key] // 2)
        if "lotto_servers" in base:
            base["lotto_servers"] = 16
        if "psro_iterations" in base:
            base["window_size"] = min(base["window_size"], base["psro_iterations"])
        if base.get("lr_schedule_step"):
            base["lr_schedule_step"] = max(1, base["lr_schedule_step"] // 2)
    return base


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, value):
    default = _FIELDS[name].default
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, tuple):
            if not isinstance(value, list):
                raise TypeError
            return tuple(value)
    except TypeError:
        raise ConfigError(f"{name}: expected {type(default).__name__}, got {value!r}") from None
    return value


def build_config(values: dict | None = None, profile: str | None = None, **overrides) -> ExperimentConfig:
    """Layer kind defaults, the profile, ``values`` and ``overrides``."""
    values = dict(values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    profile = profile or values.get("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"profile must be one of {PROFILES}")
    kind = values.get("game_kind", "gos")
    merged = kind_defaults(kind, profile)
    merged.update({k: _coerce(k, v) for k, v in values.items()})
    merged["profile"] = profile
    return ExperimentConfig(**merged)


def load_config(path, profile: str | None = None, **overrides) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            values = tomli.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables {nested}")
    return build_config(values, profile, **overrides)
