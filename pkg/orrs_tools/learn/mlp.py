import logging
import time
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from orrs_tools.learn.base import TrainReport, check_training_data, check_prediction_width, rmse
from orrs_tools.learn.exceptions import TrainingException
from orrs_tools.utils import substream


mlp_logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity")
INIT_STREAM = 0
EPOCH_STREAM = 1
# mini-batch updates run in single precision; reported losses and saved weights are float64
TRAIN_DTYPE = np.float32


@dataclass(frozen=True)
class MlpConfig(object):
    hidden_layers: Tuple[int, ...] = (256, 256)
    activation: str = "relu"
    output_activation: str = "relu"
    dropout_rate: float = 0.1
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if any(w <= 0 for w in self.hidden_layers):
            raise ValueError("Hidden layer widths must be positive: {0}".format(self.hidden_layers))
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation not in ACTIVATIONS or self.output_activation not in ACTIVATIONS:
            raise ValueError("Activations must be one of {0}".format(ACTIVATIONS))
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")


def _activate(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def _activation_slope(z, kind):
    return (z > 0).astype(z.dtype) if kind == "relu" else np.ones_like(z)


class InputScaler(object):
    """Standardizes numeric columns and one-hot expands categorical codes in column order."""

    def __init__(self, mean, scale, categorical_levels):
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.categorical_levels = {int(k): int(v) for k, v in categorical_levels.items()}

    @classmethod
    def fit(cls, X, categorical_levels=None):
        categorical_levels = categorical_levels or {}
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        for column in categorical_levels:
            mean[column], scale[column] = 0.0, 1.0
        return cls(mean, scale, categorical_levels)

    @property
    def n_inputs(self):
        return len(self.mean)

    @property
    def width(self):
        return self.n_inputs - len(self.categorical_levels) + sum(self.categorical_levels.values())

    def transform(self, X):
        blocks = []
        numeric = [i for i in range(self.n_inputs) if i not in self.categorical_levels]
        blocks.append((X[:, numeric] - self.mean[numeric]) / self.scale[numeric])
        for column in sorted(self.categorical_levels):
            levels = self.categorical_levels[column]
            codes = X[:, column].astype(np.int64)
            codes[(codes < 0) | (codes >= levels)] = 0
            one_hot = np.zeros((len(X), levels))
            one_hot[np.arange(len(X)), codes] = 1.0
            blocks.append(one_hot)
        return np.hstack(blocks)

    def to_document(self):
        return {
            "mean": self.mean.tolist(), "scale": self.scale.tolist(),
            "categorical_levels": {str(k): v for k, v in sorted(self.categorical_levels.items())}
        }

    @classmethod
    def from_document(cls, doc):
        return cls(doc["mean"], doc["scale"], doc["categorical_levels"])


def forward(params, A, activation="relu", output_activation="relu", dropout_rate=0.0, rng=None):
    """Returns the output vector and the per-layer cache used by backpropagation."""
    cache = []
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = A @ W + b
        if i == last:
            cache.append((A, z, None))
            return _activate(z, output_activation)[:, 0], cache
        out = _activate(z, activation)
        mask = None
        if dropout_rate > 0 and rng is not None:
            mask = ((rng.random(out.shape) >= dropout_rate) / (1.0 - dropout_rate)).astype(out.dtype)
            out = out * mask
        cache.append((A, z, mask))
        A = out


def backward(params, cache, d_out, activation="relu", output_activation="relu"):
    grads = [None] * len(params)
    delta = d_out[:, None] * _activation_slope(cache[-1][1], output_activation)
    for i in range(len(params) - 1, -1, -1):
        A, _, _ = cache[i]
        grads[i] = (A.T @ delta, delta.sum(axis=0))
        if i:
            _, z_prev, mask = cache[i - 1]
            delta = (delta @ params[i][0].T) * _activation_slope(z_prev, activation)
            if mask is not None:
                delta = delta * mask
    return grads


def mlp_loss_and_gradient(params, A, y, activation="relu", output_activation="identity"):
    """RMSE of the network on (A, y) and its analytic gradient, dropout disabled."""
    predicted, cache = forward(params, A, activation, output_activation)
    error = predicted - y
    loss = float(np.sqrt(np.mean(error ** 2)))
    d_out = error / (len(y) * loss) if loss > 0 else np.zeros_like(error)
    return loss, backward(params, cache, d_out, activation, output_activation)


def _cast(params, dtype):
    return [(W.astype(dtype), b.astype(dtype)) for W, b in params]


def glorot_init(widths, rng):
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


class MlpModel(object):
    KIND = "mlp"

    def __init__(self, params, scaler, y_scale, config):
        self.params = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in params]
        self.scaler = scaler
        self.y_scale = float(y_scale)
        self.config = config

    def __repr__(self):
        return "MlpModel(inputs={0}, hidden={1})".format(self.n_features, list(self.config.hidden_layers))

    @property
    def n_features(self):
        return self.scaler.n_inputs

    def predict(self, X):
        X = check_prediction_width(X, self.n_features, self.KIND)
        if not len(X):
            return np.empty(0)
        out, _ = forward(self.params, self.scaler.transform(X), self.config.activation, self.config.output_activation)
        return out * self.y_scale

    def standardization(self):
        return dict(self.scaler.to_document(), y_scale=self.y_scale)

    def encode_body(self):
        return {"layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in self.params]}

    @classmethod
    def decode_body(cls, body, header, config):
        standardization = header["standardization"]
        params = [(layer["weights"], layer["bias"]) for layer in body["layers"]]
        return cls(params, InputScaler.from_document(standardization), standardization["y_scale"], config)


def _constant_model(X, y, cfg, categorical_levels):
    scaler = InputScaler.fit(X, categorical_levels)
    params = glorot_init([scaler.width] + list(cfg.hidden_layers) + [1], substream(cfg.seed, INIT_STREAM))
    params = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    params[-1][1][:] = float(y[0])
    return MlpModel(params, scaler, 1.0, cfg)


def train_mlp(X, y, cfg, categorical_levels=None):
    started = time.time()
    X, y = check_training_data(X, y, MlpModel.KIND)
    report = TrainReport()
    if np.ptp(y) == 0:
        model = _constant_model(X, y, cfg, categorical_levels)
        report.loss = [rmse(y, model.predict(X))] * cfg.epochs
        report.seconds = time.time() - started
        return model, report

    scaler = InputScaler.fit(X, categorical_levels)
    A = scaler.transform(X)
    A_train = A.astype(TRAIN_DTYPE)
    y_scale = float(np.std(y))
    target = (y / y_scale).astype(TRAIN_DTYPE)
    params = glorot_init([A.shape[1]] + list(cfg.hidden_layers) + [1], substream(cfg.seed, INIT_STREAM))
    params[-1][1][:] = float(np.mean(target))
    params = _cast(params, TRAIN_DTYPE)

    n = len(y)
    for epoch in range(cfg.epochs):
        rng = substream(cfg.seed, EPOCH_STREAM, epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            out, cache = forward(
                params, A_train[batch], cfg.activation, cfg.output_activation, cfg.dropout_rate, rng
            )
            # gradient of 0.5 * mean squared error
            d_out = (out - target[batch]) / len(batch)
            grads = backward(params, cache, d_out, cfg.activation, cfg.output_activation)
            params = [
                (W - cfg.learning_rate * gW, b - cfg.learning_rate * gb)
                for (W, b), (gW, gb) in zip(params, grads)
            ]
        out, _ = forward(_cast(params, float), A, cfg.activation, cfg.output_activation)
        loss = rmse(y, out * y_scale)
        if not np.isfinite(loss):
            raise TrainingException("diverged at epoch {0}".format(epoch), MlpModel.KIND)
        report.loss.append(loss)

    report.seconds = time.time() - started
    mlp_logger.debug("MLP trained for {0} epochs in {1:.2f}s, RMSE {2:.4g}".format(
        cfg.epochs, report.seconds, report.loss[-1]
    ))
    return MlpModel(_cast(params, float), scaler, y_scale, cfg), report


def predict_mlp(model, X):
    return model.predict(X)
