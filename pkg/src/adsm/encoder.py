"""A small trainable frame classifier with temporal max-pool subsampling.

Each hidden layer sees a sliding window of its input frames (zero padded at
the edges), applies an affine map and tanh; factor-2 max-pool stages between
layers realize the configured subsampling.  The output layer produces
row-normalized log-posteriors over the units plus blank.  Training minimizes
the lattice-marginal alignment loss by plain gradient descent with
newbob-style learning-rate decay; everything is float64 and, given a seed,
bitwise reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .ctc import log_loss
from .errors import FormatError, InfeasibleUtteranceError, NumericalError
from .lattice import CtcGraph, UttLattice, ctc_expand

log = logging.getLogger(__name__)

PARAMS_HEADER = "#adsm-params-v1"


@dataclass
class TrainConfig:
    """Gradient-descent schedule; architecture lives in the params object."""

    learning_rate: float = 2.0
    decay: float = 0.7
    min_learning_rate: float = 1e-3
    epochs: int = 40
    batch_size: int = 0          # 0 = full batch
    clip: float = 50.0
    seed: int = 0
    holdout_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate < 0 or self.min_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay factor must lie in (0, 1]")
        if self.epochs < 1 or self.clip <= 0:
            raise ValueError("epochs and clip must be positive")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout fraction must lie in [0, 1)")


@dataclass
class EncoderParams:
    """Weights of the context-window stack plus the output projection."""

    input_dim: int
    num_classes: int
    subsample_factor: int
    radii: tuple[int, ...]
    weights: list[np.ndarray]    # per hidden layer, ((2r+1)*D_in, H)
    biases: list[np.ndarray]
    out_w: np.ndarray            # (H_last, num_classes)
    out_b: np.ndarray
    pool_after: tuple[int, ...] = field(default=())

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights)

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases, self.out_w, self.out_b]


def _pool_schedule(subsample_factor: int, n_layers: int) -> tuple[int, ...]:
    if subsample_factor < 1 or subsample_factor & (subsample_factor - 1):
        raise ValueError("subsample factor must be a power of two")
    stages = subsample_factor.bit_length() - 1
    return tuple(min(i, n_layers - 1) for i in range(stages))


def init_params(input_dim: int, hidden_sizes: Sequence[int], num_classes: int,
                subsample_factor: int = 1, radii: Sequence[int] | None = None,
                seed: int = 0) -> EncoderParams:
    """Fresh parameters with scaled-gaussian weights."""
    if num_classes < 2:
        raise ValueError("need at least two output classes")
    if not hidden_sizes:
        raise ValueError("need at least one hidden layer")
    radii = tuple(radii) if radii is not None else tuple(1 for _ in hidden_sizes)
    if len(radii) != len(hidden_sizes):
        raise ValueError("one context radius per hidden layer")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    d = input_dim
    for h, r in zip(hidden_sizes, radii):
        fan_in = (2 * r + 1) * d
        weights.append(rng.standard_normal((fan_in, h)) / np.sqrt(fan_in))
        biases.append(np.zeros(h))
        d = h
    out_w = rng.standard_normal((d, num_classes)) / np.sqrt(d)
    out_b = np.zeros(num_classes)
    return EncoderParams(input_dim, num_classes, subsample_factor, radii,
                         weights, biases, out_w, out_b,
                         _pool_schedule(subsample_factor, len(hidden_sizes)))


def resize_output(params: EncoderParams, num_classes: int, seed: int = 0,
                  keep_lower: bool = False) -> EncoderParams:
    """Parameters for a changed class inventory.

    By default the whole stack is reinitialized (each stage trains a fresh
    model); ``keep_lower`` retains the hidden layers and renews only the
    output projection.
    """
    if num_classes < 2:
        raise ValueError("need at least two output classes")
    if not keep_lower:
        return init_params(params.input_dim, params.hidden_sizes, num_classes,
                           params.subsample_factor, params.radii, seed)
    rng = np.random.default_rng(seed)
    d = params.hidden_sizes[-1]
    return replace(
        params,
        num_classes=num_classes,
        weights=[w.copy() for w in params.weights],
        biases=[b.copy() for b in params.biases],
        out_w=rng.standard_normal((d, num_classes)) / np.sqrt(d),
        out_b=np.zeros(num_classes),
    )


def _window(x: np.ndarray, r: int) -> np.ndarray:
    """(T, D) -> (T, (2r+1)*D) sliding context with zero edge padding."""
    if r == 0:
        return x
    T, D = x.shape
    xp = np.pad(x, ((r, r), (0, 0)))
    view = np.lib.stride_tricks.sliding_window_view(xp, 2 * r + 1, axis=0)
    return view.transpose(0, 2, 1).reshape(T, (2 * r + 1) * D)


def _unwindow(dxw: np.ndarray, r: int, D: int) -> np.ndarray:
    if r == 0:
        return dxw
    T = dxw.shape[0]
    parts = dxw.reshape(T, 2 * r + 1, D)
    dxp = np.zeros((T + 2 * r, D))
    for k in range(2 * r + 1):
        dxp[k : k + T] += parts[:, k, :]
    return dxp[r : r + T]


def set_subsample(params: EncoderParams, factor: int) -> None:
    """Change the temporal reduction in place, redistributing pool stages."""
    params.subsample_factor = factor
    params.pool_after = _pool_schedule(factor, len(params.weights))


def subsampled_length(T: int, factor: int) -> int:
    out = T
    for _ in range(factor.bit_length() - 1):
        out = (out + 1) // 2
    return out


def _forward(x: np.ndarray, params: EncoderParams):
    """Returns (logp, cache) with everything the backward pass needs."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"expected (T, {params.input_dim}) features, got {x.shape}")
    stages = []
    h = x
    for i, (w, b, r) in enumerate(zip(params.weights, params.biases, params.radii)):
        xw = _window(h, r)
        z = xw @ w + b
        h = np.tanh(z)
        stages.append(("layer", i, xw, h))
        for _ in range(params.pool_after.count(i)):
            T = h.shape[0]
            To = (T + 1) // 2
            padded = np.pad(h, ((0, 2 * To - T), (0, 0)), constant_values=-np.inf)
            pair = padded.reshape(To, 2, h.shape[1])
            which = np.argmax(pair, axis=1)            # (To, H), first max wins
            pooled = np.take_along_axis(pair, which[:, None, :], axis=1)[:, 0, :]
            stages.append(("pool", T, which, None))
            h = pooled
    score = h @ params.out_w + params.out_b
    logp = score - logsumexp(score, axis=1, keepdims=True)
    cache = (stages, h, logp)
    return logp, cache


def encode(x: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Log-posterior matrix, ceil(T / subsample_factor) rows."""
    logp, _ = _forward(x, params)
    return logp


def _backward(dscore: np.ndarray, params: EncoderParams, cache):
    """Gradients of sum-form loss w.r.t. every parameter array and nothing else."""
    stages, h_last, _ = cache
    grads = {id(a): np.zeros_like(a) for a in params.arrays()}
    grads[id(params.out_w)] += h_last.T @ dscore
    grads[id(params.out_b)] += dscore.sum(axis=0)
    dh = dscore @ params.out_w.T
    for kind, a, b, c in reversed(stages):
        if kind == "pool":
            T, which = a, b
            To = which.shape[0]
            dpadded = np.zeros((2 * To, which.shape[1]))
            pair = dpadded.reshape(To, 2, which.shape[1])
            np.put_along_axis(pair, which[:, None, :], dh[:, None, :], axis=1)
            dh = dpadded[:T]
        else:
            i, xw, h = a, b, c
            dz = dh * (1.0 - h * h)
            grads[id(params.weights[i])] += xw.T @ dz
            grads[id(params.biases[i])] += dz.sum(axis=0)
            dxw = dz @ params.weights[i].T
            din = params.input_dim if i == 0 else params.hidden_sizes[i - 1]
            dh = _unwindow(dxw, params.radii[i], din)
    return [grads[id(a)] for a in params.arrays()]


def utterance_grads(x: np.ndarray, graph: CtcGraph, params: EncoderParams):
    """(loss, per-array gradients) for one utterance."""
    logp, cache = _forward(x, params)
    loss, occ = log_loss(graph, logp)
    dscore = np.exp(logp) - occ
    return loss, _backward(dscore, params, cache)


@dataclass
class TrainResult:
    params: EncoderParams
    curve: list[tuple[float, float]]   # (train loss, holdout loss) per epoch
    skipped: int


def _as_graph(item, params: EncoderParams, vocab) -> CtcGraph:
    if isinstance(item, CtcGraph):
        return item
    if isinstance(item, UttLattice):
        if vocab is None:
            raise ValueError("expanding a lattice requires the vocabulary")
        return ctc_expand(item, vocab)
    raise TypeError(f"expected UttLattice or CtcGraph, got {type(item)!r}")


def _features(item) -> np.ndarray:
    return np.asarray(getattr(item, "values", item), dtype=np.float64)


def train(dataset, params: EncoderParams, config: TrainConfig,
          vocab=None) -> TrainResult:
    """Fit the encoder to (features, lattice-or-graph) pairs.

    Utterances whose subsampled length cannot realize any accepted path are
    skipped and counted.  Returns the parameters of the best held-out epoch
    (training-loss epoch when the split is empty) and the loss curve.
    """
    items = []
    skipped = 0
    for feats, lat in dataset:
        x = _features(feats)
        graph = _as_graph(lat, params, vocab)
        if subsampled_length(x.shape[0], params.subsample_factor) < graph.min_frames:
            skipped += 1
            continue
        items.append((x, graph))
    if not items:
        raise ValueError("every utterance is infeasible at this subsampling")
    if skipped:
        log.info("skipped %d infeasible utterances", skipped)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(items))
    n_hold = int(round(config.holdout_fraction * len(items)))
    hold = [items[i] for i in order[:n_hold]]
    trainset = [items[i] for i in order[n_hold:]] or items

    arrays = params.arrays()
    lr = config.learning_rate
    best_loss = np.inf
    best_arrays = [a.copy() for a in arrays]
    curve: list[tuple[float, float]] = []

    for epoch in range(config.epochs):
        batch = config.batch_size or len(trainset)
        epoch_order = rng.permutation(len(trainset)) if config.batch_size else np.arange(len(trainset))
        losses = []
        for start in range(0, len(trainset), batch):
            idx = epoch_order[start : start + batch]
            grads = [np.zeros_like(a) for a in arrays]
            for i in idx:
                x, graph = trainset[i]
                loss, g = utterance_grads(x, graph, params)
                losses.append(loss)
                for acc, gi in zip(grads, g):
                    acc += gi
            scale = 1.0 / len(idx)
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads)) * scale
            if norm > config.clip:
                scale *= config.clip / norm
            for a, g in zip(arrays, grads):
                a -= lr * scale * g
        train_loss = float(np.mean(losses))
        if not np.isfinite(train_loss):
            raise NumericalError(f"training diverged at epoch {epoch}")
        monitor = train_loss
        hold_loss = np.nan
        if hold:
            hold_loss = float(np.mean([log_loss(g, encode(x, params))[0] for x, g in hold]))
            monitor = hold_loss
        curve.append((train_loss, hold_loss))
        if monitor < best_loss - 1e-12:
            best_loss = monitor
            best_arrays = [a.copy() for a in arrays]
        else:
            lr = max(lr * config.decay, config.min_learning_rate)
    for a, b in zip(arrays, best_arrays):
        a[...] = b
    return TrainResult(params, curve, skipped)


def save_params(params: EncoderParams, path) -> None:
    """Text checkpoint with an explicit shape header; exact float round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PARAMS_HEADER + "\n")
        fh.write(f"input_dim\t{params.input_dim}\n")
        fh.write(f"num_classes\t{params.num_classes}\n")
        fh.write(f"subsample_factor\t{params.subsample_factor}\n")
        fh.write(f"radii\t{' '.join(map(str, params.radii))}\n")
        fh.write(f"hidden\t{' '.join(map(str, params.hidden_sizes))}\n")
        for name, arr in _named_arrays(params):
            shape = " ".join(map(str, arr.shape))
            fh.write(f"array\t{name}\t{shape}\n")
            for v in arr.ravel():
                fh.write(repr(float(v)) + "\n")


def load_params(path) -> EncoderParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(PARAMS_HEADER):
        raise FormatError("missing params header", path=path, line=1)
    meta = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("array\t"):
        key, _, value = lines[pos].partition("\t")
        meta[key] = value
        pos += 1
    try:
        input_dim = int(meta["input_dim"])
        num_classes = int(meta["num_classes"])
        factor = int(meta["subsample_factor"])
        radii = tuple(int(v) for v in meta["radii"].split())
        hidden = tuple(int(v) for v in meta["hidden"].split())
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad checkpoint metadata: {exc}", path=path) from exc
    arrays = {}
    while pos < len(lines):
        _, name, shape_s = lines[pos].split("\t")
        shape = tuple(int(v) for v in shape_s.split())
        n = int(np.prod(shape))
        vals = np.array([float(v) for v in lines[pos + 1 : pos + 1 + n]])
        if vals.size != n:
            raise FormatError(f"array {name} truncated", path=path)
        arrays[name] = vals.reshape(shape)
        pos += 1 + n
    params = init_params(input_dim, hidden, num_classes, factor, radii)
    for name, arr in _named_arrays(params):
        if name not in arrays or arrays[name].shape != arr.shape:
            raise FormatError(f"array {name} missing or misshaped", path=path)
        arr[...] = arrays[name]
    return params


def _named_arrays(params: EncoderParams):
    for i, w in enumerate(params.weights):
        yield f"w{i}", w
    for i, b in enumerate(params.biases):
        yield f"b{i}", b
    yield "out_w", params.out_w
    yield "out_b", params.out_b


def flatten_params(params: EncoderParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays()])


def set_flat_params(params: EncoderParams, vec: np.ndarray) -> None:
    pos = 0
    for a in params.arrays():
        a[...] = vec[pos : pos + a.size].reshape(a.shape)
        pos += a.size
    if pos != vec.size:
        raise ValueError("flat vector length mismatch")
