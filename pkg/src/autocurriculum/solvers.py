"""Meta-solvers: maps from a payoff matrix to a distribution over its rows.

Three learned architectures share one flat parameter vector format:

* ``mlp``: elementwise MLP on each entry, mean over columns, a row MLP whose
  mean over rows is a global feature, then a row-wise MLP on
  [row feature, global feature] to one logit per row.  Invariant to column
  permutations and equivariant to row permutations.
* ``conv1d``: size-preserving 1-D convolutions along each row, a pooled
  global channel, a second convolution block and a mean over the row.
  Row-equivariant only.
* ``gru``: elementwise MLP, a GRU over each row's entries, a GRU over the
  resulting row features, then a row-wise MLP.

Every forward pass ends in a softmax.  Networks are written with the
:mod:`tape` dispatch functions, so passing a tape value as ``flat`` records
the computation.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import tape as ad
from .errors import CheckpointError, ConfigError, DimensionError, NonFiniteError

CHECKPOINT_VERSION = 1
CONV_KERNEL = 3


class Arch(str, enum.Enum):
    MLP = "mlp"
    CONV1D = "conv1d"
    GRU = "gru"

    @classmethod
    def parse(cls, value) -> "Arch":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown meta-solver architecture {value!r}") from None


def param_layout(arch, sizes) -> list[tuple[str, tuple, int]]:
    """(name, shape, fan_in) for every tensor, in flat-vector order.

    ``sizes`` is a 1-tuple: hidden width for mlp/gru, channel count for conv1d.
    Weight matrices are stored (fan_in, fan_out) and applied as ``x @ W``.
    """
    arch = Arch.parse(arch)
    if len(sizes) != 1 or int(sizes[0]) < 1:
        raise ConfigError(f"layer sizes must be one positive width, got {sizes!r}")
    h = int(sizes[0])
    if arch is Arch.MLP:
        return [
            ("elem1.w", (1, h), 1), ("elem1.b", (h,), 1),
            ("elem2.w", (h, h), h), ("elem2.b", (h,), h),
            ("row.w", (h, h), h), ("row.b", (h,), h),
            ("out1.w", (2 * h, 2 * h), 2 * h), ("out1.b", (2 * h,), 2 * h),
            ("out2.w", (2 * h, 1), 2 * h), ("out2.b", (1,), 2 * h),
        ]
    if arch is Arch.CONV1D:
        k = CONV_KERNEL
        return [
            ("conv1.w", (k * 1, h), k * 1), ("conv1.b", (h,), k),
            ("conv2.w", (k * h, 1), k * h), ("conv2.b", (1,), k * h),
            ("conv3.w", (k * 2, h), k * 2), ("conv3.b", (h,), k * 2),
            ("conv4.w", (k * h, 1), k * h), ("conv4.b", (1,), k * h),
        ]
    layout = [("elem.w", (1, h), 1), ("elem.b", (h,), 1)]
    for name in ("colgru", "rowgru"):
        layout += [
            (f"{name}.wi", (h, 3 * h), h), (f"{name}.bi", (3 * h,), h),
            (f"{name}.wh", (h, 3 * h), h), (f"{name}.bh", (3 * h,), h),
        ]
    layout += [
        ("out1.w", (2 * h, 2 * h), 2 * h), ("out1.b", (2 * h,), 2 * h),
        ("out2.w", (2 * h, 1), 2 * h), ("out2.b", (1,), 2 * h),
    ]
    return layout


def param_count(arch, sizes) -> int:
    return int(sum(np.prod(shape) for _, shape, _ in param_layout(arch, sizes)))


@dataclass(frozen=True)
class MetaSolverParams:
    arch: Arch
    sizes: tuple
    flat: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch.parse(self.arch))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        flat = np.array(self.flat, dtype=float)
        n = param_count(self.arch, self.sizes)
        if flat.shape != (n,):
            raise DimensionError(f"{self.arch.value}{list(self.sizes)} needs {n} parameters, got {flat.shape}")
        if not np.all(np.isfinite(flat)):
            raise NonFiniteError("meta-solver parameters must be finite")
        flat.setflags(write=False)
        object.__setattr__(self, "flat", flat)

    def with_flat(self, flat) -> "MetaSolverParams":
        return MetaSolverParams(self.arch, self.sizes, flat)

    def __eq__(self, other):
        return (isinstance(other, MetaSolverParams) and self.arch == other.arch
                and self.sizes == other.sizes and np.array_equal(self.flat, other.flat))

    __hash__ = None


def init_params(arch, sizes, seed: int) -> MetaSolverParams:
    """Weights uniform on +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    parts = []
    for name, shape, fan_in in param_layout(arch, sizes):
        if name.endswith(".b") or name.endswith(".bi") or name.endswith(".bh"):
            parts.append(np.zeros(int(np.prod(shape))))
        else:
            bound = 1.0 / np.sqrt(fan_in)
            parts.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
    return MetaSolverParams(arch, sizes, np.concatenate(parts))


def unpack(arch, sizes, flat) -> dict:
    """Split a flat vector (array or tape value) into named tensors."""
    out, i = {}, 0
    for name, shape, _ in param_layout(arch, sizes):
        n = int(np.prod(shape))
        out[name] = ad.reshape(flat[i:i + n], shape)
        i += n
    return out


# -- architectures ----------------------------------------------------------

def _dense(x, W, b):
    return ad.matmul(x, W) + b


def _mlp(P, M, h):
    t = ad.value_of(M).shape[0]
    e = ad.reshape(M, (t * t, 1))
    e = ad.relu(_dense(e, P["elem1.w"], P["elem1.b"]))
    e = ad.relu(_dense(e, P["elem2.w"], P["elem2.b"]))
    rows = ad.mean(ad.reshape(e, (t, t, h)), axis=1)  # column mean-pool
    glob = ad.mean(ad.relu(_dense(rows, P["row.w"], P["row.b"])), axis=0)
    glob = ad.reshape(glob, (1, h)) * np.ones((t, 1))
    z = ad.concatenate([rows, glob], axis=1)
    z = ad.relu(_dense(z, P["out1.w"], P["out1.b"]))
    return ad.reshape(_dense(z, P["out2.w"], P["out2.b"]), (t,))


def _conv(x, W, b):
    """Size-preserving 1-D convolution, channels last: (rows, length, c_in) -> (rows, length, c_out)."""
    r, L, c = ad.value_of(x).shape
    pad = np.zeros((r, 1, c))
    xp = ad.concatenate([pad, x, pad], axis=1)
    cols = ad.concatenate([xp[:, k:k + L, :] for k in range(CONV_KERNEL)], axis=2)
    y = _dense(ad.reshape(cols, (r * L, CONV_KERNEL * c)), W, b)
    return ad.reshape(y, (r, L, np.shape(ad.value_of(W))[1]))


def _conv1d(P, M, h):
    t = ad.value_of(M).shape[0]
    x = ad.reshape(M, (t, t, 1))
    x = ad.leaky_relu(_conv(x, P["conv1.w"], P["conv1.b"]))
    x = ad.leaky_relu(_conv(x, P["conv2.w"], P["conv2.b"]))  # (t, t, 1)
    glob = ad.mean(x, axis=0, keepdims=True) * np.ones((t, 1, 1))
    x = ad.concatenate([x, glob], axis=2)
    x = ad.leaky_relu(_conv(x, P["conv3.w"], P["conv3.b"]))
    x = _conv(x, P["conv4.w"], P["conv4.b"])
    return ad.mean(ad.reshape(x, (t, t)), axis=1)


def _gru_step(P, name, x, hprev, h):
    gi = _dense(x, P[f"{name}.wi"], P[f"{name}.bi"])
    gh = _dense(hprev, P[f"{name}.wh"], P[f"{name}.bh"])
    r = ad.sigmoid(gi[:, :h] + gh[:, :h])
    z = ad.sigmoid(gi[:, h:2 * h] + gh[:, h:2 * h])
    n = ad.tanh(gi[:, 2 * h:] + r * gh[:, 2 * h:])
    return (1.0 - z) * n + z * hprev


def _gru(P, M, h):
    t = ad.value_of(M).shape[0]
    e = ad.relu(_dense(ad.reshape(M, (t * t, 1)), P["elem.w"], P["elem.b"]))
    e = ad.reshape(e, (t, t, h))
    state = np.zeros((t, h))
    for j in range(t):  # every row in parallel, walking along its columns
        state = _gru_step(P, "colgru", e[:, j, :], state, h)
    rows = state
    g = np.zeros((1, h))
    for i in range(t):
        g = _gru_step(P, "rowgru", rows[i:i + 1, :], g, h)
    z = ad.concatenate([rows, g * np.ones((t, 1))], axis=1)
    z = ad.relu(_dense(z, P["out1.w"], P["out1.b"]))
    return ad.reshape(_dense(z, P["out2.w"], P["out2.b"]), (t,))


_FORWARD = {Arch.MLP: _mlp, Arch.CONV1D: _conv1d, Arch.GRU: _gru}


def solver_logits(arch, sizes, flat, M):
    arch = Arch.parse(arch)
    v = ad.value_of(M)
    if np.ndim(v) != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
        raise DimensionError(f"meta-solver input must be a non-empty square matrix, got {np.shape(v)}")
    if np.shape(ad.value_of(flat)) != (param_count(arch, sizes),):
        raise DimensionError("parameter vector does not match the architecture")
    P = unpack(arch, sizes, flat)
    return _FORWARD[arch](P, M, int(sizes[0]))


def solver_forward(theta: MetaSolverParams, M, flat=None):
    """Meta-distribution for the payoff matrix ``M``.

    ``flat`` overrides ``theta.flat`` (e.g. with a tape value) while keeping
    its architecture.
    """
    flat = theta.flat if flat is None else flat
    return ad.softmax(solver_logits(theta.arch, theta.sizes, flat, M))


# -- game-theoretic baselines ----------------------------------------------

class Baseline(str, enum.Enum):
    UNIFORM = "uniform"
    NASH = "nash"
    LAST_AGENT = "last_agent"


@dataclass(frozen=True)
class SolverSpec:
    """Learned(arch) or one of the baselines."""

    variant: str
    fp_iters: int = 10000
    exact: bool = False  # solve the Nash baseline as a linear program instead
    theta: MetaSolverParams | None = None

    def __post_init__(self):
        if self.variant not in ("learned",) + tuple(b.value for b in Baseline):
            raise ConfigError(f"unknown solver variant {self.variant!r}")
        if self.variant == "nash" and self.fp_iters < 1:
            raise ConfigError("fictitious play needs at least one round")
        if self.variant == "learned" and self.theta is None:
            raise ConfigError("a learned solver needs parameters")

    @property
    def label(self) -> str:
        return self.theta.arch.value if self.variant == "learned" else self.variant

    def __call__(self, M):
        if self.variant == "learned":
            return solver_forward(self.theta, M)
        return baseline_distribution(self, M)


def fictitious_play(M, iters: int) -> np.ndarray:
    """Empirical row strategy of alternating fictitious play on the zero-sum game M.

    The row player maximises, the column player minimises; ties break to the
    lowest index.
    """
    M = np.asarray(M, float)
    n, m = M.shape
    row_counts = np.zeros(n)
    row_value = np.zeros(n)  # cumulative payoff of each row against the column history
    col_value = np.zeros(m)  # cumulative payoff each column concedes against the row history
    i = 0
    for _ in range(iters):
        row_counts[i] += 1
        col_value += M[i]
        j = int(np.argmin(col_value))
        row_value += M[:, j]
        i = int(np.argmax(row_value))
    return row_counts / iters


def nash_lp(M) -> np.ndarray:
    """Maximin row strategy of M via linear programming."""
    from scipy.optimize import linprog

    M = np.asarray(M, float)
    n, m = M.shape
    # variables (pi_1..pi_n, v); maximise v subject to pi^T M[:, j] >= v
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((m, 1))])
    A_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    pi = np.clip(res.x[:n], 0.0, None)
    return pi / pi.sum()


def baseline_distribution(spec: SolverSpec, M) -> np.ndarray:
    M = np.asarray(ad.value_of(M), float)
    if M.ndim != 2 or M.shape[0] < 1:
        raise DimensionError("payoff matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(M)):
        raise NonFiniteError("payoff matrix has non-finite entries")
    t = M.shape[0]
    if spec.variant == Baseline.UNIFORM.value:
        return np.full(t, 1.0 / t)
    if spec.variant == Baseline.LAST_AGENT.value:
        out = np.zeros(t)
        out[-1] = 1.0
        return out
    if spec.exact:
        return nash_lp(M)
    return fictitious_play(M, spec.fp_iters)


def solve_both(solver, M):
    """Row and column meta-distributions for a two-population meta-game."""
    return solver(M), solver(-ad.transpose(M))


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(path, theta: MetaSolverParams) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "arch": theta.arch.value,
        "layer_sizes": list(theta.sizes),
        # repr of a float is the shortest string that reads back to the same double
        "flat_params": [float(v) for v in theta.flat],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> MetaSolverParams:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint is not a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint format version {version!r}, expected {CHECKPOINT_VERSION}")
    try:
        arch = Arch.parse(doc["arch"])
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        flat = np.array(doc["flat_params"], dtype=float)
    except (KeyError, TypeError, ValueError, ConfigError) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from e
    try:
        return MetaSolverParams(arch, sizes, flat)
    except (DimensionError, NonFiniteError, ConfigError) as e:
        raise CheckpointError(f"checkpoint parameters invalid: {e}") from e
