"""Training loop, finite-difference gradient checking, and screening metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDatasetError
from .frequency import BinSpec, FrequencyFeatures
from .graph import SkeletonTopology
from .model import (
    Gradients,
    Model,
    backward,
    init_model,
    loss,
    model_forward,
    one_hot,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0
    full_batch: bool = True
    init_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)


class _Adam:
    """Adaptive-moment update over a fixed list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], learning_rate: float):
        self.params = params
        self.lr = learning_rate
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * g * g
            m_hat = m / (1 - ADAM_BETA1**self.t)
            v_hat = v / (1 - ADAM_BETA2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _grad_arrays(g: Gradients) -> list[np.ndarray]:
    return [g.w_z, g.w_alpha, *g.layers, g.head_weight, g.head_bias]


def _param_arrays(model: Model) -> list[np.ndarray]:
    return list(model.parameter_groups().values())


def train(
    dataset: list[tuple[FrequencyFeatures, int]],
    config: TrainConfig,
    topology: SkeletonTopology,
    bin_spec: BinSpec,
    channel_widths: tuple[int, ...] = (2, 16, 16),
) -> tuple[Model, TrainHistory]:
    """Full-batch gradient descent with Adam moments; deterministic per seed.

    Gradients are averaged over examples in dataset order, so two runs with
    the same seed produce bitwise-identical parameters. With
    ``full_batch=False`` the step runs per example instead, in order.
    """
    if not dataset:
        raise DegenerateDatasetError("training dataset is empty")
    labels = {label for _, label in dataset}
    if labels != {0, 1}:
        raise DegenerateDatasetError(
            f"training data must contain both classes, found labels {sorted(labels)}"
        )
    model = init_model(
        topology,
        bin_spec,
        channel_widths=channel_widths,
        seed=config.seed,
        init_scale=config.init_scale,
    )
    params = _param_arrays(model)
    optimizer = _Adam(params, config.learning_rate)
    history = TrainHistory()

    for _ in range(config.epochs):
        epoch_loss = 0.0
        correct = 0
        if config.full_batch:
            total = [np.zeros_like(p) for p in params]
            for features, label in dataset:
                target = one_hot(label)
                prediction, _, cache = model_forward(features, model)
                epoch_loss += loss(cache.logits, target)
                correct += prediction.label == label
                for acc, g in zip(total, _grad_arrays(backward(cache, target))):
                    acc += g
            optimizer.step([g / len(dataset) for g in total])
        else:
            for features, label in dataset:
                target = one_hot(label)
                prediction, _, cache = model_forward(features, model)
                epoch_loss += loss(cache.logits, target)
                correct += prediction.label == label
                optimizer.step(_grad_arrays(backward(cache, target)))
        history.losses.append(epoch_loss / len(dataset))
        history.accuracies.append(correct / len(dataset))
    return model, history


# ---------------------------------------------------------------------------
# Finite-difference verification.


def finite_difference_gradients(
    model: Model, features: FrequencyFeatures | np.ndarray, label: int, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central-difference loss gradients for every parameter entry."""
    target = one_hot(label)
    out: dict[str, np.ndarray] = {}
    for name, param in model.parameter_groups().items():
        grad = np.zeros_like(param)
        flat_p = param.reshape(-1)
        flat_g = grad.reshape(-1)
        for idx in range(flat_p.size):
            original = flat_p[idx]
            flat_p[idx] = original + eps
            _, _, cache = model_forward(features, model)
            upper = loss(cache.logits, target)
            flat_p[idx] = original - eps
            _, _, cache = model_forward(features, model)
            lower = loss(cache.logits, target)
            flat_p[idx] = original
            flat_g[idx] = (upper - lower) / (2 * eps)
        out[name] = grad
    return out


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Worst-case |a - b| / max(|a|, |b|, floor) across entries."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def gradient_check(
    model: Model,
    features: FrequencyFeatures | np.ndarray,
    label: int,
    eps: float = 1e-5,
) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients, per group."""
    target = one_hot(label)
    _, _, cache = model_forward(features, model)
    analytic = backward(cache, target).groups()
    numeric = finite_difference_gradients(model, features, label, eps=eps)
    return {
        name: max_relative_error(analytic[name], numeric[name].reshape(analytic[name].shape))
        for name in analytic
    }


def draw_smooth_check_case(
    model: Model, rng: np.random.Generator, margin: float = 1e-3, scale: float = 1.0
) -> np.ndarray:
    """Random features whose forward pass stays clear of every ReLU kink.

    Central differences assume local smoothness; a draw that leaves some
    pre-activation within ``margin`` of zero would straddle the kink at
    eps = 1e-5 and report a false mismatch. Rejected draws are resampled.
    """
    n, b, c = model.num_joints, model.num_bins, model.in_channels
    for _ in range(1000):
        candidate = scale * np.abs(rng.normal(size=(n, b, c)))
        _, _, cache = model_forward(candidate, model)
        if all(np.abs(z).min() > margin for z in cache.pre_relu):
            return candidate
    raise RuntimeError("could not draw a kink-free gradient-check case")


# ---------------------------------------------------------------------------
# Screening metrics.


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy plus the screening pair: sensitivity on abnormal (label 1),
    specificity on normal (label 0). Vacuously 1.0 when a class is absent."""

    accuracy: float
    sensitivity: float
    specificity: float
    predictions: tuple[tuple[str, int, int, float], ...]  # (id, true, predicted, p_abnormal)


def evaluate(
    model: Model, dataset: list[tuple[str, FrequencyFeatures, int]]
) -> MetricsReport:
    if not dataset:
        raise DegenerateDatasetError("evaluation dataset is empty")
    rows = []
    tp = tn = fp = fn = 0
    for seq_id, features, label in dataset:
        prediction, _, _ = model_forward(features, model)
        rows.append((seq_id, label, prediction.label, prediction.probability[1]))
        if label == 1 and prediction.label == 1:
            tp += 1
        elif label == 1:
            fn += 1
        elif prediction.label == 0:
            tn += 1
        else:
            fp += 1
    accuracy = (tp + tn) / len(dataset)
    sensitivity = tp / (tp + fn) if (tp + fn) else 1.0
    specificity = tn / (tn + fp) if (tn + fp) else 1.0
    return MetricsReport(
        accuracy=accuracy,
        sensitivity=sensitivity,
        specificity=specificity,
        predictions=tuple(rows),
    )
