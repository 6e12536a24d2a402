"""Diagonal-covariance Gaussian mixtures and log-likelihood-ratio scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError, EvaluationError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
MIN_VARIANCE = 1e-12


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        K = self.weights.shape[0]
        if self.means.shape[0] != K or self.variances.shape != self.means.shape:
            raise ConfigurationError("weights, means and variances disagree on shape")
        if np.any(self.variances <= 0):
            raise ConfigurationError("variances must be positive")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError("mixture weights must be a probability vector")

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def tensors(self):
        return {"weights": self.weights, "means": self.means, "variances": self.variances}

    @classmethod
    def from_tensors(cls, tensors):
        return cls(tensors["weights"], tensors["means"], tensors["variances"])


@dataclass
class GmmTrainConfig:
    n_components: int = 512
    em_iters: int = 10
    var_floor_factor: float = 1e-3
    seed: int = 0
    init: str = "kmeans"
    kmeans_iters: int = 10
    kmeans_max_samples: int = 20000
    chunk_size: int = 4096

    def __post_init__(self):
        if self.n_components < 1 or self.em_iters < 1:
            raise ConfigurationError("n_components and em_iters must be at least 1")
        if self.init not in ("kmeans", "random_frames"):
            raise ConfigurationError(f"unknown init {self.init!r}")


def log_joint(model, X):
    """``log w_k + log N(x_n; mu_k, diag var_k)`` for every frame and component."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ConfigurationError(f"features have dim {X.shape[1]}, model expects {model.dim}")
    precision = 1.0 / model.variances
    const = (np.log(model.weights)
             - 0.5 * (model.dim * LOG_2PI + np.log(model.variances).sum(axis=1)
                      + (model.means**2 * precision).sum(axis=1)))
    quad = (X**2) @ precision.T - 2.0 * X @ (model.means * precision).T
    return const - 0.5 * quad


def frame_log_likelihoods(model, X):
    return logsumexp(log_joint(model, X), axis=1)


def gmm_log_likelihood(model, frame):
    """``log sum_k w_k N(frame; mu_k, var_k)`` for a single feature vector."""
    return float(frame_log_likelihoods(model, np.asarray(frame, dtype=np.float64)[None, :])[0])


def llr_score(features, human, spoof):
    """Average per-frame log-likelihood ratio of human versus spoof models."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EvaluationError("cannot score an empty utterance")
    if human.dim != spoof.dim:
        raise ConfigurationError("human and spoof models have different dimensions")
    return float(np.mean(frame_log_likelihoods(human, X) - frame_log_likelihoods(spoof, X)))


def _kmeans(X, k, iters, rng):
    centers = X[rng.choice(X.shape[0], size=k, replace=False)].copy()
    for _ in range(iters):
        dist = (X**2).sum(1)[:, None] - 2.0 * X @ centers.T + (centers**2).sum(1)[None, :]
        assign = np.argmin(dist, axis=1)
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # Re-seed an empty cluster at the frame worst served by its centre.
            far = int(np.argmax(dist[np.arange(X.shape[0]), assign]))
            centers[j] = X[far]
            assign[far] = j
            dist[far] = 0.0
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, X)
        centers = sums / counts[:, None]
    return centers, assign


def _initial_model(X, cfg, rng, floor, global_var):
    k = cfg.n_components
    if cfg.init == "random_frames":
        means = X[rng.choice(X.shape[0], size=k, replace=False)].copy()
        variances = np.tile(global_var, (k, 1))
        return GmmModel(np.full(k, 1.0 / k), means, np.maximum(variances, floor))
    n_sub = min(X.shape[0], max(cfg.kmeans_max_samples, k))
    sub = X[np.sort(rng.choice(X.shape[0], size=n_sub, replace=False))]
    means, assign = _kmeans(sub, k, cfg.kmeans_iters, rng)
    counts = np.bincount(assign, minlength=k).astype(np.float64)
    variances = np.tile(global_var, (k, 1))
    for j in range(k):
        members = sub[assign == j]
        if members.shape[0] > 1:
            variances[j] = members.var(axis=0)
    return GmmModel(counts / counts.sum(), means, np.maximum(variances, floor))


def _accumulate(model, X, chunk_size):
    """One E-step pass in fixed-order chunks: total log-likelihood and zeroth,
    first and second order statistics."""
    K, d = model.means.shape
    nk = np.zeros(K)
    sx = np.zeros((K, d))
    sxx = np.zeros((K, d))
    total = 0.0
    for start in range(0, X.shape[0], chunk_size):
        chunk = X[start:start + chunk_size]
        lj = log_joint(model, chunk)
        ll = logsumexp(lj, axis=1)
        total += float(ll.sum())
        resp = np.exp(lj - ll[:, None])
        rk = resp.sum(axis=0)
        rx = resp.T @ chunk
        nk += rk
        sx += rx
        sxx += resp.T @ (chunk**2)
    return total, nk, sx, sxx


def train_gmm(features, cfg=None):
    """Fit a diagonal GMM by EM.

    Parameters
    ----------
    features : array_like, shape (n_frames, dim)
        Pooled frames of one class.
    cfg : GmmTrainConfig

    Returns
    -------
    model : GmmModel
    trace : list of float
        Total log-likelihood of the data under the initial model and after
        every EM iteration (``em_iters + 1`` values, non-decreasing).
    """
    cfg = cfg or GmmTrainConfig()
    X = check_array(features, dtype=np.float64)
    n, _ = X.shape
    if n < cfg.n_components:
        raise ConfigurationError(f"{n} frames are not enough for {cfg.n_components} components")
    rng = np.random.default_rng(cfg.seed)
    # Centred data keeps the raw second moments well conditioned; the
    # likelihood is translation invariant.
    offset = X.mean(axis=0)
    X = X - offset
    global_var = X.var(axis=0)
    floor = np.maximum(cfg.var_floor_factor * global_var, MIN_VARIANCE)
    model = _initial_model(X, cfg, rng, floor, np.maximum(global_var, floor))

    trace = []
    for it in range(cfg.em_iters):
        total, nk, sx, sxx = _accumulate(model, X, cfg.chunk_size)
        trace.append(total)
        means = model.means.copy()
        variances = model.variances.copy()
        live = nk > 0.0
        means[live] = sx[live] / nk[live, None]
        variances[live] = sxx[live] / nk[live, None] - means[live] ** 2
        weights = nk / n
        dead = np.flatnonzero(~live | (weights < np.finfo(float).tiny))
        for j in dead:
            logger.warning("EM iteration %d: component %d collapsed, re-seeding from a random frame", it, j)
            means[j] = X[rng.integers(n)]
            variances[j] = np.maximum(global_var, floor)
            weights[j] = 1.0 / n
        model = GmmModel(weights / weights.sum(), means, np.maximum(variances, floor))
    trace.append(_accumulate(model, X, cfg.chunk_size)[0])
    return GmmModel(model.weights, model.means + offset, model.variances), trace


class DiagonalGMM(DensityMixin, BaseEstimator):
    """Diagonal-covariance Gaussian mixture fitted by a fixed number of EM iterations.

    Attributes
    ----------
    model_ : GmmModel
    log_likelihood_trace_ : list of float
    """

    def __init__(self, n_components=512, em_iters=10, var_floor_factor=1e-3, init="kmeans",
                 random_state=0):
        self.n_components = n_components
        self.em_iters = em_iters
        self.var_floor_factor = var_floor_factor
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        cfg = GmmTrainConfig(n_components=self.n_components, em_iters=self.em_iters,
                             var_floor_factor=self.var_floor_factor, seed=self.random_state,
                             init=self.init)
        self.model_, self.log_likelihood_trace_ = train_gmm(X, cfg)
        self.n_features_in_ = self.model_.dim
        return self

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return frame_log_likelihoods(self.model_, check_array(X, dtype=np.float64))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        lj = log_joint(self.model_, check_array(X, dtype=np.float64))
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))


class GMMMLDetector(BaseEstimator):
    """Two-model GMM maximum-likelihood spoofing detector.

    ``fit`` takes a list of per-utterance feature matrices and a label per
    utterance (``1``/``"human"`` for bona fide speech, ``0``/``"spoof"``
    otherwise). ``decision_function`` returns the average frame
    log-likelihood ratio; higher means more human-like.
    """

    def __init__(self, n_components=512, em_iters=10, var_floor_factor=1e-3, init="kmeans",
                 random_state=0):
        self.n_components = n_components
        self.em_iters = em_iters
        self.var_floor_factor = var_floor_factor
        self.init = init
        self.random_state = random_state

    def _gmm(self):
        return DiagonalGMM(self.n_components, self.em_iters, self.var_floor_factor, self.init,
                           self.random_state)

    def fit(self, utterances, y):
        is_human = np.array([label in (1, True, "human") for label in y])
        if len(utterances) != is_human.size:
            raise ConfigurationError("need one label per utterance")
        if is_human.all() or not is_human.any():
            raise ConfigurationError("training needs both human and spoof utterances")
        pooled = lambda keep: np.concatenate([u for u, k in zip(utterances, is_human) if k == keep])
        self.human_ = self._gmm().fit(pooled(True))
        self.spoof_ = self._gmm().fit(pooled(False))
        return self

    def decision_function(self, utterances):
        check_is_fitted(self, ["human_", "spoof_"])
        return np.array([llr_score(u, self.human_.model_, self.spoof_.model_) for u in utterances])

    def predict(self, utterances, threshold=0.0):
        return np.where(self.decision_function(utterances) >= threshold, "human", "spoof")
