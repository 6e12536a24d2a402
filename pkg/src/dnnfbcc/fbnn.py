"""Filter bank neural network with a constrained, learnable first layer.

The network maps a power spectrum row ``F`` (``D`` bins) through

    H1 = F @ W_fb                      linear, no bias; W_fb = sigmoid(W) * mask
    H2 = sigmoid(H1 @ W2 + b2)
    P  = softmax(H2 @ W3 + b3)

and is trained with cross-entropy. Because ``sigmoid`` is positive and the
mask is a band-limited filter bank, every column of ``W_fb`` stays
non-negative, band-limited and frequency ordered, so it can replace a
hand-designed bank in cepstral analysis.

Momentum follows ``g_new = (1 - m) * g + m * g_old`` followed by
``param -= lr * g_new``, applied to every trainable tensor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError, NumericError
from .filterbanks import validate_bank

logger = logging.getLogger(__name__)

PARAM_NAMES = ("W", "W2", "b2", "W3", "b3")


@dataclass
class FbnnModel:
    """Network parameters plus the fixed mask and the momentum memory."""

    W: np.ndarray
    mask: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.W.shape != self.mask.shape:
            raise ConfigurationError(f"W shape {self.W.shape} does not match mask shape {self.mask.shape}")
        if self.W2.shape != (self.n_channels, self.b2.shape[0]):
            raise ConfigurationError("W2 must be (channels, hidden) with a matching bias")
        if self.W3.shape != (self.b2.shape[0], self.b3.shape[0]):
            raise ConfigurationError("W3 must be (hidden, outputs) with a matching bias")
        if self.n_outputs < 2:
            raise ConfigurationError("the output layer needs at least two classes")
        for name in PARAM_NAMES:
            self.velocity.setdefault(name, np.zeros_like(getattr(self, name)))

    @property
    def n_bins(self):
        return self.W.shape[0]

    @property
    def n_channels(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W2.shape[1]

    @property
    def n_outputs(self):
        return self.W3.shape[1]

    def params(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return FbnnModel(
            **{name: getattr(self, name).copy() for name in PARAM_NAMES},
            mask=self.mask.copy(),
            velocity={k: v.copy() for k, v in self.velocity.items()},
        )

    def tensors(self):
        """Flat name -> array mapping, used for serialisation."""
        out = dict(self.params(), mask=self.mask)
        out.update({f"velocity.{k}": v for k, v in self.velocity.items()})
        return out

    @classmethod
    def from_tensors(cls, tensors):
        velocity = {k.split(".", 1)[1]: v for k, v in tensors.items() if k.startswith("velocity.")}
        return cls(mask=tensors["mask"], velocity=velocity, **{n: tensors[n] for n in PARAM_NAMES})


def init_model(mask, n_hidden, n_outputs, rng, init_range=0.05):
    """Uniform ``[-init_range, init_range]`` weights, zero biases, zero momentum."""
    mask = validate_bank(mask, bounded=False)
    n_bins, n_channels = mask.shape
    W = rng.uniform(-init_range, init_range, size=(n_bins, n_channels))
    W2 = rng.uniform(-init_range, init_range, size=(n_channels, n_hidden))
    W3 = rng.uniform(-init_range, init_range, size=(n_hidden, n_outputs))
    return FbnnModel(W=W, mask=mask.copy(), W2=W2, b2=np.zeros(n_hidden), W3=W3, b3=np.zeros(n_outputs))


def effective_filter_bank(model):
    """The learned bank ``sigmoid(W) * mask``; entries lie in ``[0, mask]``."""
    return expit(model.W) * model.mask


@dataclass
class ForwardPass:
    h1: np.ndarray
    h2: np.ndarray
    probs: np.ndarray
    loss: float | None
    log_probs: np.ndarray


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite activation in layer {name}", layer=name)


def forward(model, inputs, labels=None):
    """Run the network on a batch of power spectrum rows.

    ``loss`` is the mean cross-entropy over the batch, or ``None`` when no
    labels are given.
    """
    F = np.asarray(inputs, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != model.n_bins:
        raise ConfigurationError(f"inputs must be (batch, {model.n_bins}), got {F.shape}")
    with np.errstate(invalid="ignore", over="ignore"):
        h1 = F @ effective_filter_bank(model)
    _check_finite("H1", h1)
    h2 = expit(h1 @ model.W2 + model.b2)
    _check_finite("H2", h2)
    logits = h2 @ model.W3 + model.b3
    _check_finite("output", logits)
    log_probs = log_softmax(logits, axis=1)
    loss = None
    if labels is not None:
        labels = _check_labels(labels, F.shape[0], model.n_outputs)
        loss = float(-np.mean(log_probs[np.arange(F.shape[0]), labels]))
    return ForwardPass(h1=h1, h2=h2, probs=np.exp(log_probs), loss=loss, log_probs=log_probs)


def _check_labels(labels, n, n_outputs):
    labels = np.asarray(labels)
    if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
        raise ConfigurationError("labels must be one integer class index per input row")
    if labels.size and (labels.min() < 0 or labels.max() >= n_outputs):
        raise ConfigurationError(f"labels must lie in [0, {n_outputs})")
    return labels


def filter_weight_gradient(inputs, upstream, W, mask):
    """Gradient of the loss w.r.t. the pre-constraint weights ``W``.

    Parameters
    ----------
    inputs : ndarray, shape (B, D)
        Power spectrum rows.
    upstream : ndarray, shape (B, C)
        ``dL/dH1`` for each row, already scaled by the batch averaging.
    W, mask : ndarray, shape (D, C)

    Returns
    -------
    ndarray, shape (D, C)
        ``sum_b upstream[b, c] * F[b, d] * mask[d, c] * s(W[d, c]) * (1 - s(W[d, c]))``.
    """
    s = expit(W)
    return (inputs.T @ upstream) * mask * s * (1.0 - s)


def gradients(model, inputs, labels, cache=None):
    """Batch-mean cross-entropy gradients for all five trainable tensors."""
    F = np.asarray(inputs, dtype=np.float64)
    labels = _check_labels(labels, F.shape[0], model.n_outputs)
    if cache is None:
        cache = forward(model, F, labels)
    batch = F.shape[0]
    d_logits = cache.probs.copy()
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch
    d_h2 = d_logits @ model.W3.T
    d_z2 = d_h2 * cache.h2 * (1.0 - cache.h2)
    d_h1 = d_z2 @ model.W2.T
    return {
        "W": filter_weight_gradient(F, d_h1, model.W, model.mask),
        "W2": cache.h1.T @ d_z2,
        "b2": d_z2.sum(axis=0),
        "W3": cache.h2.T @ d_logits,
        "b3": d_logits.sum(axis=0),
    }


def sgd_update(model, grads, lr, momentum):
    """In-place momentum step on every parameter; returns ``model``."""
    if not 0.0 <= momentum < 1.0:
        raise ConfigurationError(f"momentum must be in [0, 1), got {momentum}")
    for name in PARAM_NAMES:
        g_new = (1.0 - momentum) * grads[name] + momentum * model.velocity[name]
        param = getattr(model, name)
        param -= lr * g_new
        model.velocity[name] = g_new
    return model


def default_schedule(epochs):
    """Learning rate 0.1 without momentum for the first epoch, then 1.0 with 0.9."""
    return [(0.1, 0.0)] + [(1.0, 0.9)] * (epochs - 1)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    schedule: list | None = None
    seed: int = 0
    n_hidden: int = 100
    init_range: float = 0.05

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.n_hidden < 1:
            raise ConfigurationError("epochs, batch_size and n_hidden must be at least 1")
        for lr, m in self.resolved_schedule():
            if lr <= 0 or not 0 <= m < 1:
                raise ConfigurationError(f"invalid schedule entry (lr={lr}, momentum={m})")

    def resolved_schedule(self):
        """One ``(lr, momentum)`` pair per epoch; a short schedule repeats its last entry."""
        if not self.schedule:
            return default_schedule(self.epochs)
        sched = [tuple(map(float, pair)) for pair in self.schedule]
        return (sched + [sched[-1]] * self.epochs)[: self.epochs]


def train_fbnn(inputs, labels, mask, cfg=None, n_outputs=None):
    """Train a network from scratch.

    Every epoch visits the rows in a fresh seeded permutation, in mini-batches
    of ``cfg.batch_size`` (the last one may be smaller).

    Returns
    -------
    model : FbnnModel
    epoch_losses : list of float
        Mean training cross-entropy of each epoch, accumulated before each
        batch's update.
    """
    cfg = cfg or TrainConfig()
    F = check_array(inputs, dtype=np.float64)
    if np.any(F < 0):
        raise ConfigurationError("power spectrum inputs must be non-negative")
    labels = np.asarray(labels)
    if n_outputs is None:
        n_outputs = int(labels.max()) + 1 if labels.size else 0
    labels = _check_labels(labels, F.shape[0], max(n_outputs, 1))
    if n_outputs < 2:
        raise ConfigurationError("training needs at least two classes")
    missing = sorted(set(range(n_outputs)) - set(np.unique(labels).tolist()))
    if missing:
        raise ConfigurationError(f"training data has no samples for class(es) {missing}")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape[0] != F.shape[1]:
        raise ConfigurationError(f"mask has {mask.shape[0]} bins but inputs have {F.shape[1]}")

    rng = np.random.default_rng(cfg.seed)
    model = init_model(mask, cfg.n_hidden, n_outputs, rng, cfg.init_range)
    n = F.shape[0]
    epoch_losses = []
    for epoch, (lr, momentum) in enumerate(cfg.resolved_schedule()):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            cache = forward(model, F[idx], labels[idx])
            total += cache.loss * idx.size
            sgd_update(model, gradients(model, F[idx], labels[idx], cache), lr, momentum)
        epoch_losses.append(total / n)
        logger.info("epoch %d lr=%g momentum=%g loss=%.6f", epoch + 1, lr, momentum, epoch_losses[-1])
    return model, epoch_losses


class FBNN(TransformerMixin, ClassifierMixin, BaseEstimator):
    """Filter bank neural network classifier and learned filter bank.

    Parameters
    ----------
    mask : array_like, shape (n_bins, n_channels)
        Band-limiting mask, usually a manually designed filter bank.
    n_hidden : int
        Width of the sigmoid hidden layer.
    epochs, batch_size : int
    schedule : list of (lr, momentum) or None
        Per-epoch optimiser settings; ``None`` uses :func:`default_schedule`.
    init_range : float
        Half-width of the uniform weight initialisation.
    log_input : bool
        Feed ``log1p`` of the spectra instead of the raw power. Off by
        default; when on, :meth:`transform` is no longer a filter bank
        applied to the power spectrum.
    random_state : int

    Attributes
    ----------
    model_ : FbnnModel
    filter_bank_ : ndarray, shape (n_bins, n_channels)
    loss_curve_ : list of float
    classes_ : ndarray
        Sorted distinct training labels; output unit ``i`` is ``classes_[i]``.
    """

    def __init__(self, mask=None, n_hidden=100, epochs=30, batch_size=128, schedule=None,
                 init_range=0.05, log_input=False, random_state=0):
        self.mask = mask
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.schedule = schedule
        self.init_range = init_range
        self.log_input = log_input
        self.random_state = random_state

    def _inputs(self, X):
        X = check_array(X, dtype=np.float64)
        return np.log1p(X) if self.log_input else X

    def fit(self, X, y):
        if self.mask is None:
            raise ConfigurationError("FBNN needs a band-limiting mask")
        self.classes_, encoded = np.unique(np.asarray(y), return_inverse=True)
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size, schedule=self.schedule,
                          seed=self.random_state, n_hidden=self.n_hidden, init_range=self.init_range)
        self.model_, self.loss_curve_ = train_fbnn(self._inputs(X), encoded, self.mask, cfg)
        self.n_features_in_ = self.model_.n_bins
        return self

    @property
    def filter_bank_(self):
        check_is_fitted(self, "model_")
        return effective_filter_bank(self.model_)

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, self._inputs(X)).probs

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]

    def transform(self, X):
        """Filter bank features ``H1`` of each row."""
        check_is_fitted(self, "model_")
        return forward(self.model_, self._inputs(X)).h1
