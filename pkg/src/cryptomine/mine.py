"""Neural mutual-information estimation with a Donsker-Varadhan statistic network.

The statistic network is a plain numpy MLP (input -> 100 -> 100 -> 1, ReLU)
trained by gradient ascent on the regularized bound

    mean F(joint) - lme F(marginal) - reg * lme F(marginal)**2

where ``lme`` is a max-shifted log-mean-exp over the empirical product of the
batch marginals: the matched pairs weighted 1/B plus shuffled pairs weighted
1 - 1/B. With that weighting the estimate on a batch of B pairs can never
exceed ln B. Everything runs in float64.
"""
from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

TRACE_HEADER = ("epoch", "raw_dv_nats", "ema_nats", "reg_term")
CHECKPOINT_MAGIC = b"MINE"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Raised when the statistic network produces non-finite values."""


@dataclass
class Dataset:
    """Joint samples: row i of ``x`` is paired with row i of ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.ascontiguousarray(self.x, dtype=np.uint8)
        self.y = np.ascontiguousarray(self.y, dtype=np.uint8)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ValueError("dataset x and y must be 2-D byte matrices")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dx(self) -> int:
        return self.x.shape[1]

    @property
    def dy(self) -> int:
        return self.y.shape[1]


@dataclass
class MineConfig:
    input_dim: int
    hidden: tuple[int, int] = (100, 100)
    lr: float = 1e-4
    batch_size: int = 10_000
    epochs: int = 2000
    reg_coeff: float = 0.1
    optimizer: str = "adam"
    seed: int = 0
    eval_every: int = 10
    ema_decay: float = 0.9
    # evaluation batch for the trace; defaults to batch_size
    eval_batch_size: int | None = None

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 to shuffle marginals")
        if self.reg_coeff < 0:
            raise ValueError("reg_coeff must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.epochs < 0 or self.eval_every < 1:
            raise ValueError("epochs must be >= 0 and eval_every >= 1")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")
        if self.eval_batch_size is not None and self.eval_batch_size < 2:
            raise ValueError("eval_batch_size must be >= 2")

    @property
    def eval_size(self) -> int:
        return self.eval_batch_size or self.batch_size


@dataclass
class MlpParams:
    """Dense layers of the statistic network; ``weights[k]`` is (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list, ordered w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


@dataclass
class TracePoint:
    epoch: int
    raw_dv_nats: float
    ema_nats: float
    reg_term: float


@dataclass
class TrainTrace:
    points: list[TracePoint] = field(default_factory=list)

    def append(self, point: TracePoint) -> None:
        if self.points and point.epoch <= self.points[-1].epoch:
            raise ValueError("trace epochs must be strictly increasing")
        self.points.append(point)

    def __len__(self) -> int:
        return len(self.points)

    def final_estimate(self) -> float:
        """Mean of the smoothed estimate over the final 10% of trace points."""
        if not self.points:
            raise ValueError("empty trace has no final estimate")
        k = max(1, math.ceil(0.1 * len(self.points)))
        return float(np.mean([p.ema_nats for p in self.points[-k:]]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for p in self.points:
                writer.writerow([p.epoch, repr(p.raw_dv_nats), repr(p.ema_nats), repr(p.reg_term)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header}")
            trace = cls()
            for row in reader:
                trace.append(TracePoint(int(row[0]), float(row[1]), float(row[2]), float(row[3])))
        return trace


# ---------------------------------------------------------------------------
# network primitives


def normalize(block: np.ndarray) -> np.ndarray:
    """Map octets to [0, 1] (value / 255) as float64."""
    return np.asarray(block, dtype=np.float64) / 255.0


def init_params(input_dim: int, hidden: Sequence[int], rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _forward_cache(params: MlpParams, v: np.ndarray):
    acts = [v]
    pre = []
    h = v
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        if k != last:
            acts.append(h)
    return h[:, 0], acts, pre


def mlp_forward(params: MlpParams, v: np.ndarray) -> np.ndarray | float:
    """Evaluate the statistic network on one vector or a batch of rows."""
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    batch = v[None, :] if single else v
    if batch.shape[1] != params.input_dim:
        raise ValueError(
            f"input has {batch.shape[1]} features, network expects {params.input_dim}"
        )
    out, _, _ = _forward_cache(params, batch)
    return float(out[0]) if single else out


def product_logmeanexp(fj: np.ndarray, fm: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """log E[e^F] under the empirical product of marginals.

    The matched pairs ``fj`` are the diagonal of the B x B product and carry
    total weight 1/B; the shuffled pairs ``fm`` stand in for the off-diagonal
    mass 1 - 1/B. Returns the value and its derivatives w.r.t. fj and fm.
    """
    b = len(fj)
    m = max(float(np.max(fj)), float(np.max(fm)))
    ej = np.exp(fj - m)
    em = np.exp(fm - m)
    mean_j = float(ej.sum()) / b
    mean_m = float(em.sum()) / len(fm)
    # written so that constant F gives z == 1.0 exactly
    z = (mean_j + (b - 1) * mean_m) / b
    return m + math.log(z), ej / (b * b * z), em * ((b - 1) / (b * len(fm) * z))


def dv_from_outputs(fj: np.ndarray, fm: np.ndarray, reg_coeff: float = 0.1) -> tuple[float, float]:
    """(raw DV estimate, regularized objective) from network outputs on matched
    and shuffled pairs."""
    fj = np.asarray(fj, dtype=np.float64)
    fm = np.asarray(fm, dtype=np.float64)
    lme, _, _ = product_logmeanexp(fj, fm)
    mi = float(np.mean(fj)) - lme
    return mi, mi - reg_coeff * lme * lme


def _check_finite(*values, where: str = "") -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise TrainingError(f"non-finite statistic network output{where}")


def dv_objective(
    params: MlpParams, joint: np.ndarray, marginal: np.ndarray, reg_coeff: float = 0.1
) -> tuple[float, float]:
    """Return (raw DV estimate in nats, regularized objective).

    ``joint`` and ``marginal`` are normalized, concatenated [x || y] rows.
    """
    if len(joint) == 0 or len(marginal) == 0:
        raise ValueError("joint and marginal batches must be nonempty")
    fj = mlp_forward(params, joint)
    fm = mlp_forward(params, marginal)
    _check_finite(fj, fm)
    return dv_from_outputs(fj, fm, reg_coeff)


def _backprop(params: MlpParams, acts, pre, dout: np.ndarray):
    """Gradients of sum(dout * F) for a cached forward pass."""
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = dout[:, None]
    for k in range(n_layers - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ params.weights[k].T) * (pre[k - 1] > 0)
    return gw, gb


def backward(
    params: MlpParams, joint: np.ndarray, marginal: np.ndarray, reg_coeff: float = 0.1
) -> tuple[MlpParams, float, float]:
    """Exact gradient of the regularized objective w.r.t. every parameter.

    Returns ``(grads, raw_mi, objective)``; ``grads`` mirrors ``params``.
    """
    joint = np.asarray(joint, dtype=np.float64)
    marginal = np.asarray(marginal, dtype=np.float64)
    fj, acts_j, pre_j = _forward_cache(params, joint)
    fm, acts_m, pre_m = _forward_cache(params, marginal)
    _check_finite(fj, fm)
    lme, sj, sm = product_logmeanexp(fj, fm)
    mi = float(np.mean(fj)) - lme
    obj = mi - reg_coeff * lme * lme

    scale = 1.0 + 2.0 * reg_coeff * lme
    dj = 1.0 / len(fj) - scale * sj
    dm = -scale * sm
    gwj, gbj = _backprop(params, acts_j, pre_j, dj)
    gwm, gbm = _backprop(params, acts_m, pre_m, dm)
    grads = MlpParams([a + b for a, b in zip(gwj, gwm)], [a + b for a, b in zip(gbj, gbm)])
    _check_finite(*grads.arrays())
    return grads, mi, obj


def shuffle_marginals(
    x: np.ndarray, y: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Pair x rows with a uniformly permuted copy of the y rows."""
    if len(y) < 2:
        raise ValueError("need a batch of at least 2 to shuffle marginals")
    return x, y[rng.permutation(len(y))]


# ---------------------------------------------------------------------------
# split-input fast path used in training
#
# The first layer is applied to x and y separately so the marginal batch
# (x, y[perm]) reuses the joint batch's first-layer products.


def _split_step(params: MlpParams, xb: np.ndarray, yb: np.ndarray, perm: np.ndarray,
                reg_coeff: float, need_grad: bool = True):
    dx = xb.shape[1]
    w0, w1, w2 = params.weights
    b0, b1, b2 = params.biases
    b = len(xb)
    a = xb @ w0[:dx]
    a += b0
    c = yb @ w0[dx:]
    h1 = np.empty((2 * b, w0.shape[1]))
    np.add(a, c, out=h1[:b])
    np.add(a, c[perm], out=h1[b:])
    np.maximum(h1, 0.0, out=h1)
    h2 = h1 @ w1
    h2 += b1
    np.maximum(h2, 0.0, out=h2)
    f = h2 @ w2[:, 0]
    f += b2[0]
    fj, fm = f[:b], f[b:]
    if not np.isfinite(f).all():
        raise TrainingError("non-finite statistic network output")
    lme, sj, sm = product_logmeanexp(fj, fm)
    mi = float(np.mean(fj)) - lme
    obj = mi - reg_coeff * lme * lme
    if not need_grad:
        return None, mi, obj, lme

    scale = 1.0 + 2.0 * reg_coeff * lme
    dout = np.empty(2 * b)
    np.multiply(sj, -scale, out=dout[:b])
    dout[:b] += 1.0 / b
    np.multiply(sm, -scale, out=dout[b:])

    gw2 = (dout @ h2)[:, None]
    gb2 = np.array([dout.sum()])
    d2 = np.multiply.outer(dout, w2[:, 0])
    d2 *= h2 > 0
    gw1 = h1.T @ d2
    gb1 = d2.sum(axis=0)
    d1 = d2 @ w1.T
    d1 *= h1 > 0
    dj, dm = d1[:b], d1[b:]
    gb0 = d1.sum(axis=0)
    dc = dj.copy()
    dc[perm] += dm
    dj += dm
    gw0 = np.vstack((xb.T @ dj, yb.T @ dc))
    grads = MlpParams([gw0, gw1, gw2], [gb0, gb1, gb2])
    return grads, mi, obj, lme


def split_backward(params: MlpParams, x: np.ndarray, y: np.ndarray, perm: np.ndarray,
                   reg_coeff: float = 0.1) -> tuple[MlpParams, float, float]:
    """Same result as ``backward`` on joint [x||y] and marginal [x||y[perm]]."""
    grads, mi, obj, _ = _split_step(params, np.asarray(x, float), np.asarray(y, float),
                                    np.asarray(perm), reg_coeff)
    return grads, mi, obj


# ---------------------------------------------------------------------------
# optimizers


class _Adam:
    def __init__(self, params: MlpParams, lr: float):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]

    def ascend(self, params: MlpParams, grads: MlpParams) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        step = self.lr * math.sqrt(c2) / c1
        for p, g, m, v in zip(params.arrays(), grads.arrays(), self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p += step * m / (np.sqrt(v) + ADAM_EPS * math.sqrt(c2))


class _Sgd:
    def __init__(self, params: MlpParams, lr: float):
        self.lr = lr

    def ascend(self, params: MlpParams, grads: MlpParams) -> None:
        for p, g in zip(params.arrays(), grads.arrays()):
            p += self.lr * g


# ---------------------------------------------------------------------------
# estimation


def estimate_mi(params: MlpParams, dataset: Dataset, eval_batch_size: int,
                rng: np.random.Generator) -> float:
    """Unregularized DV estimate on a random batch against shuffled marginals."""
    if eval_batch_size > dataset.n:
        raise ValueError("eval_batch_size exceeds dataset size")
    idx = rng.choice(dataset.n, size=eval_batch_size, replace=False)
    perm = rng.permutation(eval_batch_size)
    _, mi, _, _ = _split_step(params, normalize(dataset.x[idx]), normalize(dataset.y[idx]),
                              perm, 0.0, need_grad=False)
    return mi


def train(dataset: Dataset, cfg: MineConfig) -> tuple[MlpParams, TrainTrace]:
    """Fit the statistic network; deterministic for a given (dataset, cfg)."""
    if cfg.input_dim != dataset.dx + dataset.dy:
        raise ValueError(
            f"input_dim {cfg.input_dim} != dx + dy = {dataset.dx + dataset.dy}"
        )
    if dataset.n < cfg.batch_size:
        raise ValueError(f"dataset has {dataset.n} samples, batch_size is {cfg.batch_size}")
    if dataset.n < cfg.eval_size:
        raise ValueError("eval batch larger than dataset")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0x4D494E45,)))
    params = init_params(cfg.input_dim, cfg.hidden, rng)
    trace = TrainTrace()
    if cfg.epochs == 0:
        return params, trace

    xs = normalize(dataset.x)
    ys = normalize(dataset.y)
    eval_idx = np.sort(rng.choice(dataset.n, size=cfg.eval_size, replace=False))
    ex, ey = xs[eval_idx], ys[eval_idx]
    eval_perm = rng.permutation(cfg.eval_size)

    opt = _Adam(params, cfg.lr) if cfg.optimizer == "adam" else _Sgd(params, cfg.lr)
    n_batches = dataset.n // cfg.batch_size
    ema = None
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(dataset.n)
        for bi in range(n_batches):
            idx = order[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
            perm = rng.permutation(cfg.batch_size)
            try:
                grads, _, _, _ = _split_step(params, xs[idx], ys[idx], perm, cfg.reg_coeff)
                _check_finite(*grads.arrays())
            except TrainingError as exc:
                raise TrainingError(f"{exc} at epoch {epoch}, batch {bi}") from None
            opt.ascend(params, grads)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            _, mi, _, lme = _split_step(params, ex, ey, eval_perm, 0.0, need_grad=False)
            ema = mi if ema is None else cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * mi
            trace.append(TracePoint(epoch, mi, ema, cfg.reg_coeff * lme * lme))
            log.debug("epoch %d: dv=%.4f ema=%.4f", epoch, mi, ema)
    if not params.is_finite():
        raise TrainingError("parameters became non-finite")
    return params, trace


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: MlpParams, path: str | Path) -> None:
    """Write magic, u16 version, u32 layer count, per-layer u32 dims, then float64 arrays."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(params.weights)))
        for w in params.weights:
            fh.write(struct.pack("<II", *w.shape))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> MlpParams:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a MINE checkpoint")
    version, n_layers = struct.unpack_from("<HI", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 10
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", data, off))
        off += 8
    weights, biases = [], []
    for rows, cols in shapes:
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
        off += 8 * rows * cols
        b = np.frombuffer(data, dtype="<f8", count=cols, offset=off)
        off += 8 * cols
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return MlpParams(weights, biases)
