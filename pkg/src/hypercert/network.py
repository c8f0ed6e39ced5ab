"""Small fully-connected classifiers, trained from scratch in numpy.

The classifier is a chain of affine layers with ReLU on hidden layers and
softmax on the output. Training uses Adam on a cross-entropy loss computed
from logits via log-sum-exp (never from stored probabilities), with an
optional adversarial term: loss = alpha * CE(clean) + beta * CE(attacked).

Everything is f64 and bitwise deterministic given (data, config): shuffling
uses a seeded generator, parameters update in fixed layer order, and the
adversarial branch is skipped entirely when beta = 0 so such runs match
plain training exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BadSpec, DimMismatch, Divergence, MalformedFile
from . import kvio

ACTIVATIONS = ("relu", "softmax", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise BadSpec(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise BadSpec(f"unknown activation {self.activation!r}")


@dataclass(eq=False)
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray     # (out_dim,)
    activation: str

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise BadSpec(f"weight shape {W.shape} does not match bias shape {b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise BadSpec("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise BadSpec(f"unknown activation {self.activation!r}")
        self.weights = W
        self.bias = b

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class MlpNetwork:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise BadSpec("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise BadSpec(
                    f"layer {i} expects {layers[i].in_dim} inputs, "
                    f"layer {i - 1} emits {layers[i - 1].out_dim}"
                )
        for i, layer in enumerate(layers):
            if layer.activation == "softmax" and i != len(layers) - 1:
                raise BadSpec("softmax is only allowed on the last layer")
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameter_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


def default_layer_specs(in_dim: int, hidden=(256, 128), n_classes: int = 2) -> list:
    """The standard architecture: ReLU hidden layers, softmax output."""
    dims = [in_dim] + list(hidden) + [n_classes]
    specs = []
    for i in range(len(dims) - 1):
        act = "softmax" if i == len(dims) - 2 else "relu"
        specs.append(LayerSpec(dims[i], dims[i + 1], act))
    return specs


def init_network(specs, seed: int) -> MlpNetwork:
    """Fresh network: weights uniform in +-sqrt(6/(in+out)), zero biases."""
    specs = list(specs)
    if not specs:
        raise BadSpec("empty layer spec")
    rng = np.random.default_rng(seed)
    layers = []
    for spec in specs:
        limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        W = rng.uniform(-limit, limit, size=(spec.out_dim, spec.in_dim))
        layers.append(Layer(W, np.zeros(spec.out_dim), spec.activation))
    return MlpNetwork(tuple(layers))


# ---------------------------------------------------------------------------
# Forward / loss / gradients


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_sum_exp(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1)
    return m + np.log(np.sum(np.exp(logits - m[..., None]), axis=-1))


def logits_batch(net: MlpNetwork, X) -> np.ndarray:
    """Pre-softmax outputs for an (n, in_dim) batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise DimMismatch(f"batch shape {X.shape}, network expects (*, {net.in_dim})")
    a = X
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return a


def forward(net: MlpNetwork, x) -> tuple:
    """(logits, probabilities) for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.in_dim,):
        raise DimMismatch(f"input shape {x.shape}, network expects ({net.in_dim},)")
    logits = logits_batch(net, x.reshape(1, -1))[0]
    return logits, softmax(logits)


def predict_batch(net: MlpNetwork, X) -> np.ndarray:
    return logits_batch(net, X).argmax(axis=1)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean CE over the batch, computed stably from logits."""
    lse = log_sum_exp(logits)
    picked = logits[np.arange(logits.shape[0]), y]
    return float(np.mean(lse - picked))


def _forward_trace(net: MlpNetwork, X: np.ndarray) -> tuple:
    """Per-layer (pre-activation, activation) pairs for backprop."""
    activations = [X]
    pre = []
    a = X
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        pre.append(z)
        activations.append(a)
    return pre, activations


def gradients(net: MlpNetwork, X, y) -> tuple:
    """Exact gradients of mean cross-entropy on logits.

    Returns (loss, param_grads, input_grad) where param_grads is a list of
    (dW, db) in layer order and input_grad has the batch's shape.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimMismatch(f"gradients need a nonempty 2-D batch, got shape {X.shape}")
    n = X.shape[0]
    pre, acts = _forward_trace(net, X)
    logits = pre[-1]
    loss = cross_entropy(logits, y)
    dz = softmax(logits)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    param_grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dW = dz.T @ acts[i]
        db = dz.sum(axis=0)
        param_grads[i] = (dW, db)
        da = dz @ layer.weights
        if i > 0:
            prev = net.layers[i - 1]
            dz = da * (pre[i - 1] > 0.0) if prev.activation == "relu" else da
        else:
            input_grad = da
    return loss, param_grads, input_grad


def input_gradient(net: MlpNetwork, X, y) -> np.ndarray:
    """d(mean CE)/dx only; skips parameter gradient assembly for attacks."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    pre, _ = _forward_trace(net, X)
    dz = softmax(pre[-1])
    dz[np.arange(n), y] -= 1.0
    dz /= n
    for i in range(len(net.layers) - 1, 0, -1):
        da = dz @ net.layers[i].weights
        prev = net.layers[i - 1]
        dz = da * (pre[i - 1] > 0.0) if prev.activation == "relu" else da
    return dz @ net.layers[0].weights


def logit_diff_input_gradient(net: MlpNetwork, X, target: int, other: int) -> np.ndarray:
    """Gradient of (logit_target - logit_other) w.r.t. the input batch."""
    X = np.asarray(X, dtype=np.float64)
    pre, _ = _forward_trace(net, X)
    dz = np.zeros_like(pre[-1])
    dz[:, target] = 1.0
    dz[:, other] = -1.0
    for i in range(len(net.layers) - 1, 0, -1):
        da = dz @ net.layers[i].weights
        prev = net.layers[i - 1]
        dz = da * (pre[i - 1] > 0.0) if prev.activation == "relu" else da
    return dz @ net.layers[0].weights


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    alpha: float = 1.0   # weight of the clean-loss term
    beta: float = 0.0    # weight of the adversarial-loss term

    def __post_init__(self):
        if self.epochs < 1:
            raise BadSpec(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise BadSpec(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise BadSpec(f"learning_rate must be positive, got {self.learning_rate}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta == 0:
            raise BadSpec(f"need alpha, beta >= 0 and alpha + beta > 0, got {self.alpha}, {self.beta}")


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_accuracy: float


class _Adam:
    """Adam with the conventional constants; state per parameter tensor."""

    def __init__(self, net: MlpNetwork, lr: float):
        self.lr = lr
        self.beta1 = 0.9
        self.beta2 = 0.999
        self.eps = 1e-8
        self.t = 0
        self.m = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]
        self.v = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]

    def step(self, net: MlpNetwork, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, layer in enumerate(net.layers):
            for j, (param, grad) in enumerate(
                ((layer.weights, grads[i][0]), (layer.bias, grads[i][1]))
            ):
                m = self.m[i][j]
                v = self.v[i][j]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clone(net: MlpNetwork) -> MlpNetwork:
    return MlpNetwork(tuple(Layer(l.weights.copy(), l.bias.copy(), l.activation)
                            for l in net.layers))


def train(net: MlpNetwork, X, y, config: TrainConfig,
          augment: Optional[tuple] = None,
          adversary: Optional[Callable] = None) -> tuple:
    """Train a copy of net; returns (trained network, per-epoch metrics).

    ``augment`` is an optional (X_extra, y_extra) pair concatenated once with
    the data (a one-time enlargement, not per-epoch resampling). ``adversary``
    is an optional callable (net, seed) -> (X_adv, y_adv) invoked per step for
    the beta-weighted loss term; it is never called when beta = 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise BadSpec(f"training data must be a nonempty 2-D array, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimMismatch(f"labels shape {y.shape} does not match {X.shape[0]} rows")
    if augment is not None:
        Xa = np.asarray(augment[0], dtype=np.float64)
        ya = np.asarray(augment[1], dtype=np.int64)
        if Xa.shape[0]:
            X = np.concatenate([X, Xa], axis=0)
            y = np.concatenate([y, ya], axis=0)

    net = _clone(net)
    opt = _Adam(net, config.learning_rate)
    root = np.random.SeedSequence(config.seed)
    shuffle_ss, adv_ss = root.spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    use_adv = adversary is not None and config.beta > 0.0
    # Per-step adversary seeds come from an independent stream so the clean
    # path is bit-identical whether or not an adversary is attached.
    adv_seeds = iter(np.random.default_rng(adv_ss).integers(2 ** 63, size=2 ** 20)) if use_adv else None

    n = X.shape[0]
    metrics = []
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            bx, by = X[idx], y[idx]
            loss, grads, _ = gradients(net, bx, by)
            total_loss = config.alpha * loss
            combined = [(config.alpha * dW, config.alpha * db) for dW, db in grads]
            if use_adv:
                ax, ay = adversary(net, int(next(adv_seeds)))
                adv_loss, adv_grads, _ = gradients(net, ax, ay)
                total_loss += config.beta * adv_loss
                for i, (dW, db) in enumerate(adv_grads):
                    combined[i] = (combined[i][0] + config.beta * dW,
                                   combined[i][1] + config.beta * db)
            if not np.isfinite(total_loss):
                raise Divergence(f"non-finite loss at epoch {epoch}", epoch=epoch)
            opt.step(net, combined)
            epoch_loss += total_loss
            n_batches += 1
        acc = float(np.mean(predict_batch(net, X) == y))
        metrics.append(EpochMetrics(epoch, epoch_loss / n_batches, acc))
    return net, metrics


# ---------------------------------------------------------------------------
# Evaluation and the linear separability probe


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray          # confusion[true, predicted]
    n: int
    in_region_accuracy: Optional[float] = None
    in_region_count: int = 0


def evaluate(net: MlpNetwork, X, y, regions=None) -> EvalResult:
    """Accuracy and per-class confusion counts; optionally restricted to a region set."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        return EvalResult(float("nan"), np.zeros((net.out_dim, net.out_dim), int), 0)
    pred = predict_batch(net, X)
    k = net.out_dim
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    result = EvalResult(float(np.mean(pred == y)), confusion, X.shape[0])
    if regions is not None:
        from .geometry import region_contains_batch

        mask = region_contains_batch(regions, X)
        result.in_region_count = int(mask.sum())
        if result.in_region_count:
            result.in_region_accuracy = float(np.mean(pred[mask] == y[mask]))
    return result


@dataclass
class ProbeReport:
    mode: str
    accuracy: float
    n_train: int
    n_eval: int


def linear_probe(dataset, mode: str = "all-data", seed: int = 0,
                 epochs: int = 30) -> ProbeReport:
    """How linearly separable are the 3-way classes?

    Trains a single affine layer + softmax with the shared training engine.
    Mode "all-data" reports fit accuracy on everything; "train/test" trains
    on the Train split and reports held-out Test accuracy.
    """
    from .dataset import Split, all_arrays, split_arrays

    if mode not in ("all-data", "train/test"):
        raise BadSpec(f"unknown probe mode {mode!r}")
    if mode == "all-data":
        X_fit, y_fit = all_arrays(dataset, three_way=True)
        X_eval, y_eval = X_fit, y_fit
    else:
        X_fit, y_fit = split_arrays(dataset, Split.TRAIN, three_way=True)
        X_eval, y_eval = split_arrays(dataset, Split.TEST, three_way=True)
    if len(np.unique(y_fit)) < 2:
        raise BadSpec("linear probe needs at least 2 classes present")
    spec = [LayerSpec(dataset.dim, 3, "softmax")]
    probe = init_network(spec, seed)
    config = TrainConfig(epochs=epochs, seed=seed)
    probe, _ = train(probe, X_fit, y_fit, config)
    accuracy = float(np.mean(predict_batch(probe, X_eval) == y_eval))
    return ProbeReport(mode, accuracy, X_fit.shape[0], X_eval.shape[0])


# ---------------------------------------------------------------------------
# Serialization

_FORMAT_NAME = "hypercert-network"


def save_network(net: MlpNetwork, path, meta: Optional[dict] = None) -> None:
    pairs = [
        ("format", _FORMAT_NAME),
        ("version", "1"),
        ("layers", str(len(net.layers))),
    ]
    for key, value in (meta or {}).items():
        pairs.append((f"meta.{key}", str(value)))
    for i, layer in enumerate(net.layers):
        pairs.append((f"layer{i}.in", str(layer.in_dim)))
        pairs.append((f"layer{i}.out", str(layer.out_dim)))
        pairs.append((f"layer{i}.activation", layer.activation))
        pairs.append((f"layer{i}.weights", kvio.fmt_floats(layer.weights)))
        pairs.append((f"layer{i}.bias", kvio.fmt_floats(layer.bias)))
    kvio.write_text(path, kvio.format_kv(pairs))


def load_network(path) -> tuple:
    """Load a network file; returns (MlpNetwork, meta dict)."""
    source = str(path)
    kv = kvio.parse_kv(kvio.read_text(path), source=source)
    if kv.get("format") != _FORMAT_NAME:
        raise MalformedFile(f"{source}: not a network file (format={kv.get('format')!r})")
    if kv.get("version") != "1":
        raise MalformedFile(f"{source}: unsupported version {kv.get('version')!r}")
    try:
        n_layers = int(kv["layers"])
    except (KeyError, ValueError) as exc:
        raise MalformedFile(f"{source}: bad header ({exc})") from None
    meta = {key[5:]: value for key, value in kv.items() if key.startswith("meta.")}
    layers = []
    for i in range(n_layers):
        try:
            in_dim = int(kv[f"layer{i}.in"])
            out_dim = int(kv[f"layer{i}.out"])
            activation = kv[f"layer{i}.activation"]
        except (KeyError, ValueError) as exc:
            raise MalformedFile(f"{source}: layer {i}: {exc}") from None
        W = kvio.parse_floats(kv.get(f"layer{i}.weights", ""), in_dim * out_dim,
                              f"{source}: layer{i}.weights").reshape(out_dim, in_dim)
        b = kvio.parse_floats(kv.get(f"layer{i}.bias", ""), out_dim, f"{source}: layer{i}.bias")
        try:
            layers.append(Layer(W, b, activation))
        except BadSpec as exc:
            raise MalformedFile(f"{source}: layer {i}: {exc}") from None
    try:
        return MlpNetwork(tuple(layers)), meta
    except BadSpec as exc:
        raise MalformedFile(f"{source}: {exc}") from None
