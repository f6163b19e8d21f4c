"""Small feed-forward regressor, written directly in numpy.

Architecture: dense layers with ReLU after every layer including the output
(scores are non-negative), inverted dropout on the second hidden layer
during training, uniform init scaled by 1/sqrt(fan_in). Optimizers are
mini-batch Adam (default) and plain SGD, with optional L2 weight decay.

Everything is deterministic given the seeds, which is what makes repeated
cross-validation runs byte-for-byte reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    InputDataError,
    UndefinedValueError,
)
from .seeding import derive_seed
from .stats import pearson

# 0-based index of the hidden layer whose activations are dropped out.
DROPOUT_HIDDEN_INDEX = 1

DEFAULT_HIDDEN = (25, 25)


@dataclass
class MlpModel:
    """Weights W[l] of shape (n_in, n_out) and biases b[l] of shape (n_out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.2

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        return arrays


def init_model(
    input_dim: int,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    output_dim: int = 1,
    seed: int = 0,
    dropout_rate: float = 0.2,
) -> MlpModel:
    """Seeded uniform init, range +-1/sqrt(fan_in) per layer; zero biases."""
    dims = [input_dim, *hidden, output_dim]
    if any(int(d) != d or d < 1 for d in dims):
        raise ConfigurationError(f"layer dims must be positive integers: {dims}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1): {dropout_rate}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for n_in, n_out in zip(dims, dims[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out, dtype=np.float64))
    return MlpModel(weights, biases, float(dropout_rate))


@dataclass
class _ForwardCache:
    activations: list[np.ndarray]  # a[0]=X, a[l]=post-ReLU (and dropout) output
    pre_activations: list[np.ndarray]
    dropout_masks: list[np.ndarray | None]


def _check_input(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.weights[0].shape[0]:
        raise DimensionError(
            f"input has shape {x.shape}, model expects (*, {model.weights[0].shape[0]})"
        )
    return x


def forward(
    model: MlpModel,
    x: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, _ForwardCache]:
    """Run the network; ``train=True`` applies dropout and needs ``rng``."""
    x = _check_input(model, x)
    use_dropout = (
        train and model.dropout_rate > 0.0 and model.n_hidden > DROPOUT_HIDDEN_INDEX
    )
    if use_dropout and rng is None:
        raise ConfigurationError("training forward pass with dropout needs an rng")
    a = x
    activations = [x]
    pre_activations = []
    masks: list[np.ndarray | None] = []
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = np.maximum(z, 0.0)
        mask = None
        if use_dropout and l == DROPOUT_HIDDEN_INDEX:
            keep = 1.0 - model.dropout_rate
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        pre_activations.append(z)
        activations.append(a)
        masks.append(mask)
    return a, _ForwardCache(activations, pre_activations, masks)


def predict(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Deterministic (no-dropout) predictions, shape (n,)."""
    out, _ = forward(model, x)
    return out[:, 0] if out.shape[1] == 1 else out


def mse_loss(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((pred - y) ** 2))


def _full_loss(model: MlpModel, pred: np.ndarray, y: np.ndarray, weight_decay: float) -> float:
    loss = mse_loss(pred, y)
    if weight_decay > 0.0:
        loss += 0.5 * weight_decay * sum(float((w**2).sum()) for w in model.weights)
    return loss


def backward(
    model: MlpModel,
    cache: _ForwardCache,
    y: np.ndarray,
    weight_decay: float = 0.0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the (weight-decayed) MSE loss, one (dW, db) per layer."""
    pred = cache.activations[-1]
    n_elements = pred.size
    da = 2.0 * (pred - y) / n_elements
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.weights)  # type: ignore[list-item]
    for l in range(len(model.weights) - 1, -1, -1):
        mask = cache.dropout_masks[l]
        if mask is not None:
            da = da * mask
        dz = da * (cache.pre_activations[l] > 0.0)
        dw = cache.activations[l].T @ dz
        if weight_decay > 0.0:
            dw = dw + weight_decay * model.weights[l]
        db = dz.sum(axis=0)
        grads[l] = (dw, db)
        if l > 0:
            da = dz @ model.weights[l].T
    return grads


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 16
    optimizer: str = "adam"  # "adam" or "sgd"
    weight_decay: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(
                f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}"
            )
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be non-negative")


@dataclass
class TrainResult:
    loss_history: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1] if self.loss_history else float("nan")


def _as_targets(y, n: int) -> np.ndarray:
    ya = np.asarray(y, dtype=np.float64)
    if ya.ndim == 1:
        ya = ya[:, None]
    if ya.ndim != 2 or ya.shape[0] != n:
        raise DimensionError(f"targets have shape {ya.shape}, expected ({n}, 1)")
    return ya


def train(model: MlpModel, x: np.ndarray, y, config: TrainConfig | None = None) -> TrainResult:
    """Mini-batch training, in place. Raises DivergenceError on non-finite loss."""
    config = config or TrainConfig()
    config.validate()
    x = _check_input(model, x)
    ya = _as_targets(y, x.shape[0])
    if x.shape[0] == 0:
        raise InputDataError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)

    adam_m = adam_v = None
    adam_t = 0
    if config.optimizer == "adam":
        adam_m = [
            (np.zeros_like(w), np.zeros_like(b))
            for w, b in zip(model.weights, model.biases)
        ]
        adam_v = [
            (np.zeros_like(w), np.zeros_like(b))
            for w, b in zip(model.weights, model.biases)
        ]

    result = TrainResult()
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sq_err_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb, yb = x[batch], ya[batch]
            pred, cache = forward(model, xb, train=True, rng=rng)
            batch_loss = mse_loss(pred, yb)
            if not np.isfinite(batch_loss):
                raise DivergenceError(epoch, config.learning_rate)
            sq_err_sum += batch_loss * len(batch)
            grads = backward(model, cache, yb, config.weight_decay)
            if config.optimizer == "sgd":
                for l, (dw, db) in enumerate(grads):
                    model.weights[l] -= config.learning_rate * dw
                    model.biases[l] -= config.learning_rate * db
            else:
                adam_t += 1
                b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
                for l, (dw, db) in enumerate(grads):
                    for g, param, m, v in (
                        (dw, model.weights[l], adam_m[l][0], adam_v[l][0]),
                        (db, model.biases[l], adam_m[l][1], adam_v[l][1]),
                    ):
                        m *= b1
                        m += (1 - b1) * g
                        v *= b2
                        v += (1 - b2) * g * g
                        m_hat = m / (1 - b1**adam_t)
                        v_hat = v / (1 - b2**adam_t)
                        param -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        result.loss_history.append(sq_err_sum / n)
    return result


@dataclass(frozen=True)
class EvalMetrics:
    mse: float
    pearson_r: float | None
    r_squared: float | None
    n: int


def evaluate(model: MlpModel, x: np.ndarray, y) -> EvalMetrics:
    """Held-out metrics. Correlation/R2 are None when undefined (e.g. a
    constant sample), rather than raising; MSE is always available."""
    x = _check_input(model, x)
    ya = _as_targets(y, x.shape[0])[:, 0]
    pred = predict(model, x)
    mse = float(np.mean((pred - ya) ** 2))
    try:
        r = pearson(pred, ya).statistic
    except UndefinedValueError:
        r = None
    ss_tot = float(((ya - ya.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = None
    else:
        ss_res = float(((ya - pred) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot
    return EvalMetrics(mse=mse, pearson_r=r, r_squared=r2, n=x.shape[0])


@dataclass(frozen=True)
class FoldMetrics:
    repeat: int
    fold: int
    metrics: EvalMetrics


@dataclass
class CvResult:
    folds: int
    repeats: int
    mse_mean: float
    mse_std: float
    r2_mean: float | None
    r2_std: float | None
    pearson_mean: float | None
    pearson_std: float | None
    n_evaluations: int
    n_r2_defined: int
    n_pearson_defined: int
    fold_metrics: list[FoldMetrics]


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def cross_validate(
    x: np.ndarray,
    y,
    *,
    folds: int = 4,
    repeats: int = 10,
    seed: int = 0,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    dropout_rate: float = 0.2,
    train_config: TrainConfig | None = None,
) -> CvResult:
    """Repeated k-fold cross-validation with derived per-fold seeds.

    Each repeat reshuffles the data; each fold trains a fresh model. Folds
    whose correlation or R2 is undefined are excluded from those aggregates
    (and counted), MSE aggregates over every fold. The ``seed`` fixes the
    entire procedure; ``train_config.seed`` is ignored in favour of derived
    per-fold seeds.
    """
    base = train_config or TrainConfig()
    base.validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-d, got shape {x.shape}")
    ya = _as_targets(y, x.shape[0])
    n = x.shape[0]
    if folds < 2:
        raise ConfigurationError("cross-validation needs at least 2 folds")
    if repeats < 1:
        raise ConfigurationError("cross-validation needs at least 1 repeat")
    if n < folds:
        raise InputDataError(f"need at least {folds} samples for {folds} folds, got {n}")

    mses: list[float] = []
    r2s: list[float] = []
    rs: list[float] = []
    fold_metrics: list[FoldMetrics] = []
    for rep in range(repeats):
        rng = np.random.default_rng(derive_seed(seed, f"cv-rep{rep}"))
        order = rng.permutation(n)
        # fold sizes differ by at most one
        bounds = np.linspace(0, n, folds + 1).astype(int)
        for fold in range(folds):
            test_idx = order[bounds[fold] : bounds[fold + 1]]
            train_idx = np.concatenate([order[: bounds[fold]], order[bounds[fold + 1] :]])
            fold_seed = derive_seed(seed, f"cv-rep{rep}-fold{fold}")
            model = init_model(
                x.shape[1],
                hidden=hidden,
                seed=derive_seed(fold_seed, "init"),
                dropout_rate=dropout_rate,
            )
            cfg = replace(base, seed=derive_seed(fold_seed, "train"))
            train(model, x[train_idx], ya[train_idx], cfg)
            metrics = evaluate(model, x[test_idx], ya[test_idx])
            fold_metrics.append(FoldMetrics(rep, fold, metrics))
            mses.append(metrics.mse)
            if metrics.r_squared is not None:
                r2s.append(metrics.r_squared)
            if metrics.pearson_r is not None:
                rs.append(metrics.pearson_r)

    mse_mean, mse_std = _mean_std(mses)
    r2_mean, r2_std = _mean_std(r2s)
    p_mean, p_std = _mean_std(rs)
    return CvResult(
        folds=folds,
        repeats=repeats,
        mse_mean=mse_mean,
        mse_std=mse_std,
        r2_mean=r2_mean,
        r2_std=r2_std,
        pearson_mean=p_mean,
        pearson_std=p_std,
        n_evaluations=len(mses),
        n_r2_defined=len(r2s),
        n_pearson_defined=len(rs),
        fold_metrics=fold_metrics,
    )


def gradient_check(
    model: MlpModel,
    x: np.ndarray,
    y,
    eps: float = 1e-5,
    weight_decay: float = 0.0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs without dropout so both sides see the same deterministic function.
    Inputs should keep every pre-activation away from the ReLU kink by more
    than the finite-difference step; ``make_gradient_check_case`` builds
    such cases.

    Denominators are floored at a small fraction of the largest gradient
    magnitude: a component whose true gradient sits at the cancellation
    noise floor of ``loss_plus - loss_minus`` carries no signal, and
    dividing by it would report noise, not error. Real gradient bugs show
    up at the scale of the gradients themselves, far above the floor.
    """
    x = _check_input(model, x)
    ya = _as_targets(y, x.shape[0])
    _, cache = forward(model, x)
    grads = backward(model, cache, ya, weight_decay)

    def loss_at() -> float:
        out, _ = forward(model, x)
        return _full_loss(model, out, ya, weight_decay)

    grad_scale = max(
        float(np.abs(g).max()) for dw, db in grads for g in (dw, db)
    )
    floor = 1e-3 * max(grad_scale, 1e-8)
    max_rel = 0.0
    for l in range(len(model.weights)):
        for param, grad in ((model.weights[l], grads[l][0]), (model.biases[l], grads[l][1])):
            flat = param.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                loss_plus = loss_at()
                flat[i] = orig - eps
                loss_minus = loss_at()
                flat[i] = orig
                numeric = (loss_plus - loss_minus) / (2.0 * eps)
                analytic = gflat[i]
                rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor)
                if rel > max_rel:
                    max_rel = rel
    return float(max_rel)


def make_gradient_check_case(
    input_dim: int,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    seed: int = 0,
    n_samples: int = 3,
    eps: float = 1e-5,
    max_tries: int = 50,
) -> tuple[MlpModel, np.ndarray, np.ndarray]:
    """Model and data whose pre-activations all sit clear of the ReLU kink.

    A pre-activation inside the finite-difference window makes the central
    difference disagree with the (one-sided) analytic gradient, so cases
    near the kink are resampled.
    """
    for attempt in range(max_tries):
        case_seed = derive_seed(seed, f"gradcheck-{attempt}")
        model = init_model(input_dim, hidden=hidden, seed=case_seed, dropout_rate=0.0)
        rng = np.random.default_rng(derive_seed(case_seed, "data"))
        x = rng.normal(0.0, 1.0, size=(n_samples, input_dim))
        y = rng.normal(1.0, 0.5, size=(n_samples, 1))
        _, cache = forward(model, x)
        max_abs_act = max(float(np.abs(a).max()) for a in cache.activations)
        margin = 50.0 * eps * max(1.0, max_abs_act)
        min_abs_z = min(float(np.abs(z).min()) for z in cache.pre_activations)
        if min_abs_z > margin:
            return model, x, y
    raise ConfigurationError(
        f"could not build a kink-free gradient check case after {max_tries} tries"
    )


def save_model(model: MlpModel, path: str) -> None:
    """Write weights/biases to an .npz; round-trips bit-exactly."""
    arrays = model.parameter_arrays()
    arrays["dropout_rate"] = np.asarray(model.dropout_rate, dtype=np.float64)
    arrays["n_layers"] = np.asarray(len(model.weights), dtype=np.int64)
    np.savez(path, **arrays)


def load_model(path: str) -> MlpModel:
    if not os.path.isfile(path):
        raise InputDataError(f"{path}: no such file")
    with np.load(path, allow_pickle=False) as data:
        n_layers = int(data["n_layers"])
        weights = [data[f"W{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        return MlpModel(weights, biases, float(data["dropout_rate"]))
