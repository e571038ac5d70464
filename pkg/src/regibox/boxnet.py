"""The box network: maps a unit embedding to a latent region (box).

An MLP takes one d-dimensional image embedding and emits 2d values, read
as two raw corner pre-images. Each is normalized back onto the unit
sphere and the elementwise min/max of the pair gives an axis-aligned box
around the image's position in the embedding space.

Training balances two pressures: a box-volume term that pushes the two
corners apart (their inner product down), and class-consistency terms
that keep both corners and the box midpoint classified as the source
image's class against the class-text table. The combined objective is

    total = (1 - alpha) * bv + alpha * (cc_lower + cc_upper + cc_mid) / 3

with all four terms summed over the batch. Gradients are analytic,
including through the row normalization and the min/max corner ordering
(subgradient of the selected branch, ties toward the first corner).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericError, ValidationError
from .optim import AdamW
from .seeding import derive_seed
from .store import ClassTextEmbeddings, EmbeddingSet

MAGIC_MODEL = b"RGBM"
MODEL_FORMAT_VERSION = 1

ACTIVATIONS = ("linear", "softplus", "relu")
_ACTIVATION_IDS = {name: i for i, name in enumerate(ACTIVATIONS)}
_ZERO_NORM_EPS = 1e-12


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return _softplus(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return _sigmoid(z)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.ones_like(z)


@dataclass
class LatentBox:
    """Axis-aligned box given by an ordered corner pair."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValidationError("box corners must be two vectors of the same shape")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise ValidationError("box corners must be finite")
        if (self.lower > self.upper).any():
            raise ValidationError("box invariant violated: lower > upper somewhere")

    @property
    def sides(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass
class BoxNetModel:
    """MLP parameters; widths run from d to 2d, hidden layers share one nonlinearity."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "softplus"

    def __post_init__(self) -> None:
        dims = [int(w) for w in self.layer_dims]
        if len(dims) < 2:
            raise ValidationError("need at least an input and an output width")
        if any(w < 1 for w in dims):
            raise ValidationError("layer widths must be positive")
        if dims[-1] != 2 * dims[0]:
            raise ValidationError(
                f"output width must be 2 * input width, got {dims[0]} -> {dims[-1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValidationError("one weight matrix and bias per layer transition")
        self.layer_dims = dims
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ValidationError(
                    f"layer {i} parameter shapes {w.shape}/{b.shape} do not match "
                    f"widths {dims[i]} -> {dims[i + 1]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValidationError(f"layer {i} has non-finite parameters")

    @property
    def dim(self) -> int:
        return self.layer_dims[0]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in a stable order (W0, b0, W1, b1, ...)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def clone(self) -> "BoxNetModel":
        return BoxNetModel(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


def init_model(
    dim: int,
    hidden_dims: tuple[int, ...] | None = None,
    activation: str = "softplus",
    seed: int = 0,
) -> BoxNetModel:
    """Seeded He-style init; default architecture is d -> d -> 2d."""
    if hidden_dims is None:
        hidden_dims = (dim,)
    dims = [dim, *hidden_dims, 2 * dim]
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return BoxNetModel(layer_dims=dims, weights=weights, biases=biases, activation=activation)


@dataclass
class Gradients:
    """Parameter gradients, shaped exactly like the model."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def _mlp_forward(model: BoxNetModel, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Return per-layer inputs H and pre-activations Z for a 2-D batch."""
    hs = [x]
    zs = []
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = hs[-1] @ w + b
        zs.append(z)
        hs.append(z if i == last else _activation(model.activation, z))
    return hs, zs


def forward(model: BoxNetModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw corner pre-images (a, b) for one embedding or a batch of them."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != model.dim:
        raise ValidationError(f"input shape {x.shape} does not match model dim {model.dim}")
    out = _mlp_forward(model, batch)[0][-1]
    a, b = out[:, : model.dim], out[:, model.dim :]
    if single:
        return a[0], b[0]
    return a, b


def _normalize_with_norms(points: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(points, axis=1)
    zero = np.flatnonzero(norms < _ZERO_NORM_EPS)
    if zero.size:
        raise NumericError(f"{what} {zero[0]} is numerically zero, cannot normalize")
    return points / norms[:, None], norms


def ordered_corners(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize both raw corner batches, then order elementwise."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValidationError("corner batches must have matching shapes")
    a_hat, _ = _normalize_with_norms(a, "raw corner a, row")
    b_hat, _ = _normalize_with_norms(b, "raw corner b, row")
    return np.minimum(a_hat, b_hat), np.maximum(a_hat, b_hat)


def corners_from_raw(a: np.ndarray, b: np.ndarray) -> LatentBox:
    """Box for a single raw corner pair."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValidationError("corners_from_raw expects single vectors; see image_boxes")
    lower, upper = ordered_corners(a[None, :], b[None, :])
    return LatentBox(lower=lower[0], upper=upper[0])


def image_boxes(model: BoxNetModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ordered (lower, upper) corner batches for a batch of embeddings."""
    a, b = forward(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return ordered_corners(a, b)


def box_volume_loss(lower: np.ndarray, upper: np.ndarray) -> float:
    """Sum of corner inner products over the batch; lower means bigger boxes."""
    lower = np.atleast_2d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_2d(np.asarray(upper, dtype=np.float64))
    if lower.shape != upper.shape:
        raise ValidationError("corner batches must have matching shapes")
    for name, arr in (("lower", lower), ("upper", upper)):
        norms = np.linalg.norm(arr, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
        if bad.size:
            raise ValidationError(
                f"{name} corner {bad[0]} has norm {norms[bad[0]]:.9g}, not unit"
            )
    return float(np.sum(lower * upper))


def _cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Summed CE and its gradient (softmax minus one-hot) for raw logits."""
    shift = logits.max(axis=1, keepdims=True)
    lse = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
    losses = lse - logits[np.arange(logits.shape[0]), labels]
    grad = np.exp(logits - lse[:, None])
    grad[np.arange(logits.shape[0]), labels] -= 1.0
    return float(losses.sum()), grad


def class_consistency_loss(
    points: np.ndarray,
    labels: np.ndarray,
    class_text: ClassTextEmbeddings,
    temperature: float = 1.0,
) -> float:
    """Summed cross-entropy of similarity logits against the true classes.

    Logits are the inner products with every class-text row (cosine
    similarities for unit inputs), divided by ``temperature``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != points.shape[0]:
        raise ValidationError("one label per point required")
    if points.shape[1] != class_text.dim:
        raise ValidationError(
            f"point dim {points.shape[1]} != class-text dim {class_text.dim}"
        )
    if labels.size and (labels.min() < 0 or int(labels.max()) >= class_text.n_classes):
        raise ValidationError("label out of range for the class-text table")
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    logits = points @ class_text.data.astype(np.float64).T / temperature
    return _cross_entropy(logits, labels.astype(np.intp))[0]


@dataclass
class _LossState:
    """Everything the backward pass reuses from a forward evaluation."""

    total: float
    parts: dict[str, float]
    hs: list[np.ndarray]
    zs: list[np.ndarray]
    a_hat: np.ndarray
    b_hat: np.ndarray
    a_norms: np.ndarray
    b_norms: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    a_is_lower: np.ndarray
    a_is_upper: np.ndarray
    mid_raw: np.ndarray
    mid: np.ndarray
    mid_norms: np.ndarray | None
    grad_lower_ce: np.ndarray
    grad_upper_ce: np.ndarray
    grad_mid_ce: np.ndarray


def _loss_forward(
    x: np.ndarray,
    labels: np.ndarray,
    model: BoxNetModel,
    class_text: ClassTextEmbeddings,
    alpha: float,
    temperature: float,
    raw_midpoint: bool,
) -> _LossState:
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels).astype(np.intp)
    if labels.shape[0] != x.shape[0]:
        raise ValidationError("one label per item required")
    if x.shape[0] == 0:
        raise ValidationError("empty batch")
    if labels.min() < 0 or int(labels.max()) >= class_text.n_classes:
        raise ValidationError("label out of range for the class-text table")

    hs, zs = _mlp_forward(model, x)
    out = hs[-1]
    d = model.dim
    a, b = out[:, :d], out[:, d:]
    a_hat, a_norms = _normalize_with_norms(a, "raw corner a, row")
    b_hat, b_norms = _normalize_with_norms(b, "raw corner b, row")

    a_is_lower = a_hat <= b_hat
    a_is_upper = a_hat >= b_hat
    lower = np.where(a_is_lower, a_hat, b_hat)
    upper = np.where(a_is_upper, a_hat, b_hat)

    mid_raw = 0.5 * (lower + upper)
    if raw_midpoint:
        mid, mid_norms = mid_raw, None
    else:
        mid, mid_norms = _normalize_with_norms(mid_raw, "box midpoint, row")

    text = class_text.data.astype(np.float64)
    bv = float(np.sum(lower * upper))
    cc_lower, g_lower = _cross_entropy(lower @ text.T / temperature, labels)
    cc_upper, g_upper = _cross_entropy(upper @ text.T / temperature, labels)
    cc_mid, g_mid = _cross_entropy(mid @ text.T / temperature, labels)

    total = (1.0 - alpha) * bv + alpha * ((cc_lower + cc_upper + cc_mid) / 3.0)
    if not np.isfinite(total):
        raise NumericError("combined loss is non-finite")
    parts = {
        "box_volume": bv,
        "cc_lower": cc_lower,
        "cc_upper": cc_upper,
        "cc_midpoint": cc_mid,
    }
    return _LossState(
        total=total,
        parts=parts,
        hs=hs,
        zs=zs,
        a_hat=a_hat,
        b_hat=b_hat,
        a_norms=a_norms,
        b_norms=b_norms,
        lower=lower,
        upper=upper,
        a_is_lower=a_is_lower,
        a_is_upper=a_is_upper,
        mid_raw=mid_raw,
        mid=mid,
        mid_norms=mid_norms,
        grad_lower_ce=g_lower,
        grad_upper_ce=g_upper,
        grad_mid_ce=g_mid,
    )


def combined_loss(
    x: np.ndarray,
    labels: np.ndarray,
    model: BoxNetModel,
    class_text: ClassTextEmbeddings,
    alpha: float,
    temperature: float = 1.0,
    raw_midpoint: bool = False,
) -> tuple[float, dict[str, float]]:
    """Mixed objective over a batch, with the four raw terms reported."""
    state = _loss_forward(x, labels, model, class_text, alpha, temperature, raw_midpoint)
    return state.total, state.parts


def _normalize_backward(
    grad_unit: np.ndarray, unit: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    inner = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - inner * unit) / norms[:, None]


def backward(
    x: np.ndarray,
    labels: np.ndarray,
    model: BoxNetModel,
    class_text: ClassTextEmbeddings,
    alpha: float,
    temperature: float = 1.0,
    raw_midpoint: bool = False,
) -> tuple[float, dict[str, float], Gradients]:
    """Analytic gradient of the combined objective for every parameter."""
    state = _loss_forward(x, labels, model, class_text, alpha, temperature, raw_midpoint)
    text = class_text.data.astype(np.float64)
    cc_scale = alpha / (3.0 * temperature)

    grad_lower = (1.0 - alpha) * state.upper + cc_scale * (state.grad_lower_ce @ text)
    grad_upper = (1.0 - alpha) * state.lower + cc_scale * (state.grad_upper_ce @ text)

    grad_mid = cc_scale * (state.grad_mid_ce @ text)
    if state.mid_norms is not None:
        grad_mid = _normalize_backward(grad_mid, state.mid, state.mid_norms)
    grad_lower = grad_lower + 0.5 * grad_mid
    grad_upper = grad_upper + 0.5 * grad_mid

    # min/max route each coordinate's gradient to the branch that produced it;
    # on ties both corners came from a, so a collects both contributions.
    grad_a_hat = np.where(state.a_is_lower, grad_lower, 0.0) + np.where(
        state.a_is_upper, grad_upper, 0.0
    )
    grad_b_hat = np.where(~state.a_is_lower, grad_lower, 0.0) + np.where(
        ~state.a_is_upper, grad_upper, 0.0
    )

    grad_a = _normalize_backward(grad_a_hat, state.a_hat, state.a_norms)
    grad_b = _normalize_backward(grad_b_hat, state.b_hat, state.b_norms)
    delta = np.concatenate([grad_a, grad_b], axis=1)

    weight_grads: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    last = len(model.weights) - 1
    for layer in range(last, -1, -1):
        dz = delta if layer == last else delta * _activation_grad(
            model.activation, state.zs[layer]
        )
        weight_grads[layer] = state.hs[layer].T @ dz
        bias_grads[layer] = dz.sum(axis=0)
        delta = dz @ model.weights[layer].T

    grads = Gradients(weights=weight_grads, biases=bias_grads)
    for g in grads.parameters():
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient encountered")
    return state.total, state.parts, grads


@dataclass
class Stage1Config:
    """Training settings for the box network."""

    alpha: float = 0.5
    epochs: int = 100
    batch_size: int = 512
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    seed: int = 0
    hidden_dims: tuple[int, ...] | None = None
    activation: str = "softplus"
    temperature: float = 1.0
    raw_midpoint: bool = False
    select: str = "best_val"

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")
        if self.select not in ("best_val", "final"):
            raise ValidationError(f"select must be best_val or final, got {self.select!r}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")


@dataclass
class TrainTrace:
    """Per-epoch training record; loss fields are per-item means."""

    loss_total: list[float] = field(default_factory=list)
    loss_box_volume: list[float] = field(default_factory=list)
    loss_class_consistency: list[float] = field(default_factory=list)
    train_corner_accuracy: list[float] = field(default_factory=list)
    val_corner_accuracy: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    selected: str = "final"

    @property
    def epochs(self) -> int:
        return len(self.loss_total)

    def to_dict(self) -> dict:
        return {
            "loss_total": self.loss_total,
            "loss_box_volume": self.loss_box_volume,
            "loss_class_consistency": self.loss_class_consistency,
            "train_corner_accuracy": self.train_corner_accuracy,
            "val_corner_accuracy": self.val_corner_accuracy,
            "best_epoch": self.best_epoch,
            "selected": self.selected,
        }


def _unit_rows64(data: np.ndarray) -> np.ndarray:
    x = data.astype(np.float64)
    return x / np.linalg.norm(x, axis=1)[:, None]


def corner_class_accuracy(
    model: BoxNetModel,
    x: np.ndarray,
    labels: np.ndarray,
    class_text: ClassTextEmbeddings,
) -> float:
    """Fraction of items whose lower, upper, and midpoint all classify correctly."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        return float("nan")
    labels = np.asarray(labels).astype(np.intp)
    lower, upper = image_boxes(model, x)
    mid = 0.5 * (lower + upper)
    text = class_text.data.astype(np.float64).T
    ok = np.ones(x.shape[0], dtype=bool)
    for points in (lower, upper, mid):
        ok &= np.argmax(points @ text, axis=1) == labels
    return float(ok.mean())


def train_stage1(
    train: EmbeddingSet,
    val: EmbeddingSet,
    class_text: ClassTextEmbeddings,
    config: Stage1Config,
) -> tuple[BoxNetModel, TrainTrace]:
    """Mini-batch AdamW training of the box network.

    Shuffles with a seeded generator each epoch, records per-epoch losses
    and corner-class accuracies, and returns either the checkpoint with
    the best validation corner-class accuracy (ties to the later epoch)
    or the final-epoch model, per ``config.select``.
    """
    config.validate()
    if train.count == 0:
        raise ValidationError("empty training set")
    if train.dim != class_text.dim or val.dim != class_text.dim:
        raise ValidationError("train/val dim must match the class-text table")
    train.validate_labels(class_text.n_classes)
    val.validate_labels(class_text.n_classes)

    x_train = _unit_rows64(train.data)
    y_train = train.labels.astype(np.intp)
    x_val = _unit_rows64(val.data) if val.count else np.zeros((0, train.dim))
    y_val = val.labels.astype(np.intp)

    model = init_model(
        dim=train.dim,
        hidden_dims=config.hidden_dims,
        activation=config.activation,
        seed=derive_seed(config.seed, "stage1-init"),
    )
    optimizer = AdamW(
        learning_rate=config.learning_rate, weight_decay=config.weight_decay
    )
    shuffle_rng = np.random.default_rng(derive_seed(config.seed, "stage1-shuffle"))

    trace = TrainTrace(selected=config.select)
    best_acc = -np.inf
    best_params: BoxNetModel | None = None

    n = train.count
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        sum_total = sum_bv = sum_cc = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            total, parts, grads = backward(
                x_train[idx],
                y_train[idx],
                model,
                class_text,
                config.alpha,
                temperature=config.temperature,
                raw_midpoint=config.raw_midpoint,
            )
            optimizer.step(model.parameters(), grads.parameters())
            sum_total += total
            sum_bv += parts["box_volume"]
            sum_cc += (
                parts["cc_lower"] + parts["cc_upper"] + parts["cc_midpoint"]
            ) / 3.0

        trace.loss_total.append(sum_total / n)
        trace.loss_box_volume.append(sum_bv / n)
        trace.loss_class_consistency.append(sum_cc / n)
        trace.train_corner_accuracy.append(
            corner_class_accuracy(model, x_train, y_train, class_text)
        )
        val_acc = (
            corner_class_accuracy(model, x_val, y_val, class_text)
            if val.count
            else float("nan")
        )
        trace.val_corner_accuracy.append(val_acc)
        if val.count and val_acc >= best_acc:
            best_acc = val_acc
            best_params = model.clone()
            trace.best_epoch = epoch

    if config.select == "best_val" and best_params is not None:
        return best_params, trace
    return model, trace


def save_model(model: BoxNetModel, path: str | Path) -> None:
    """Write an RGBM checkpoint (f32 parameters, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC_MODEL)
        fh.write(struct.pack("<II", MODEL_FORMAT_VERSION, len(model.layer_dims)))
        fh.write(np.asarray(model.layer_dims, dtype="<u4").tobytes())
        fh.write(struct.pack("<I", _ACTIVATION_IDS[model.activation]))
        for w, b in zip(model.weights, model.biases):
            fh.write(w.astype("<f4").tobytes())
            fh.write(b.astype("<f4").tobytes())


def load_model(path: str | Path) -> BoxNetModel:
    """Read an RGBM checkpoint written by save_model."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC_MODEL:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC_MODEL!r}")
        header = fh.read(8)
        if len(header) != 8:
            raise FormatError("truncated model header")
        version, n_dims = struct.unpack("<II", header)
        if version != MODEL_FORMAT_VERSION:
            raise FormatError(f"unsupported model format version {version}")
        if n_dims < 2:
            raise FormatError("model must have at least two layer widths")
        dims_raw = fh.read(4 * n_dims)
        if len(dims_raw) != 4 * n_dims:
            raise FormatError("truncated layer widths")
        dims = np.frombuffer(dims_raw, dtype="<u4").astype(int).tolist()
        act_raw = fh.read(4)
        if len(act_raw) != 4:
            raise FormatError("truncated activation id")
        (act_id,) = struct.unpack("<I", act_raw)
        if act_id >= len(ACTIVATIONS):
            raise FormatError(f"unknown activation id {act_id}")
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w_raw = fh.read(4 * fan_in * fan_out)
            b_raw = fh.read(4 * fan_out)
            if len(w_raw) != 4 * fan_in * fan_out or len(b_raw) != 4 * fan_out:
                raise FormatError("truncated parameter payload")
            weights.append(
                np.frombuffer(w_raw, dtype="<f4").reshape(fan_in, fan_out).astype(np.float64)
            )
            biases.append(np.frombuffer(b_raw, dtype="<f4").astype(np.float64))
        if fh.read(1):
            raise FormatError("trailing bytes after parameters")
    return BoxNetModel(
        layer_dims=dims, weights=weights, biases=biases, activation=ACTIVATIONS[act_id]
    )
