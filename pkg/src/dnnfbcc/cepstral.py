"""Cepstral analysis through an arbitrary filter bank, plus dynamic features.

``power @ bank`` gives filter bank energies; their floored natural log goes
through an orthonormal DCT-II and the first ``M`` coefficients are kept.
The classifier sees only the first- and second-order regression deltas of
those coefficients unless static coefficients are requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from . import dsp
from .exceptions import ConfigurationError

KIND_POWER = "power"
KIND_FBANK = "fbank"
KIND_CEP = "cep"
KIND_CEP_DELTAS = "cep_deltas"
FEATURE_KINDS = (KIND_POWER, KIND_FBANK, KIND_CEP, KIND_CEP_DELTAS)


@dataclass(frozen=True)
class CepstralConfig:
    bank: np.ndarray
    num_coeffs: int = 20
    log_floor: float = 1e-10
    delta_window: int = 2
    include_static: bool = False

    def __post_init__(self):
        bank = np.asarray(self.bank, dtype=np.float64)
        if bank.ndim != 2:
            raise ConfigurationError("bank must be a (bins, channels) matrix")
        object.__setattr__(self, "bank", bank)
        if not 1 <= self.num_coeffs <= bank.shape[1]:
            raise ConfigurationError(f"num_coeffs must be in [1, {bank.shape[1]}], got {self.num_coeffs}")
        if self.log_floor <= 0:
            raise ConfigurationError("log_floor must be positive")
        if self.delta_window < 1:
            raise ConfigurationError("delta_window must be at least 1")

    @property
    def output_dim(self):
        return self.num_coeffs * (3 if self.include_static else 2)


@dataclass(frozen=True)
class FrontEndConfig:
    nfft: int = 512
    frame_ms: float = 20.0
    hop_ms: float = 10.0
    pre_emphasis: float = dsp.DEFAULT_PRE_EMPHASIS


def dct_matrix(n):
    """Orthonormal DCT-II basis as an ``(n, n)`` matrix (row ``k`` is basis ``k``)."""
    return dct(np.eye(n), type=2, norm="ortho", axis=0)


def filterbank_energies(power, bank):
    power = np.asarray(power, dtype=np.float64)
    bank = np.asarray(bank, dtype=np.float64)
    if power.ndim != 2 or power.shape[1] != bank.shape[0]:
        raise ConfigurationError(
            f"power spectra have {power.shape[-1]} bins but the filter bank expects {bank.shape[0]}"
        )
    return power @ bank


def log_dct(fbank, num_coeffs, log_floor=1e-10):
    """Floored natural log followed by the orthonormal DCT-II, truncated."""
    logged = np.log(np.maximum(fbank, log_floor))
    return dct(logged, type=2, norm="ortho", axis=-1)[..., :num_coeffs]


def cepstra(power, cfg: CepstralConfig):
    """Static cepstral coefficients, shape ``(T, num_coeffs)``."""
    return log_dct(filterbank_energies(power, cfg.bank), cfg.num_coeffs, cfg.log_floor)


def deltas(features, window=2):
    """Regression deltas over +-``window`` frames with edge frames repeated.

    ``d_t = sum_k k * (c_{t+k} - c_{t-k}) / (2 * sum_k k**2)``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] == 0:
        return x.copy()
    T = x.shape[0]
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x, np.repeat(x[-1:], window, axis=0)])
    out = np.zeros_like(x)
    for k in range(1, window + 1):
        out += k * (padded[window + k:window + k + T] - padded[window - k:window - k + T])
    return out / (2.0 * sum(k * k for k in range(1, window + 1)))


def append_deltas(cep, cfg: CepstralConfig):
    """``[delta, delta2]`` (or ``[static, delta, delta2]``) per frame."""
    cep = np.asarray(cep, dtype=np.float64)
    d1 = deltas(cep, cfg.delta_window)
    d2 = deltas(d1, cfg.delta_window)
    parts = [cep, d1, d2] if cfg.include_static else [d1, d2]
    return np.concatenate(parts, axis=1)


def extract_utterance(audio, frontend: FrontEndConfig, cfg: CepstralConfig, utt_id=None):
    """Audio to dynamic cepstral features, shape ``(T, cfg.output_dim)``."""
    try:
        power = dsp.power_spectrogram(audio, frontend.nfft, frontend.frame_ms, frontend.hop_ms,
                                      frontend.pre_emphasis)
        return append_deltas(cepstra(power, cfg), cfg)
    except (ConfigurationError, ValueError) as exc:
        if utt_id is None:
            raise
        raise type(exc)(f"utterance {utt_id}: {exc}") from exc


class CepstralTransformer(TransformerMixin, BaseEstimator):
    """Power spectrum rows of one utterance to cepstral (delta) features.

    Stateless; ``fit`` only records the input width. Rows are treated as a
    time sequence when deltas are requested, so pass one utterance at a time.

    Parameters
    ----------
    bank : array_like, shape (n_bins, n_channels)
    n_coeffs : int
    log_floor : float
    deltas : bool
        Append regression deltas; ``False`` returns static coefficients.
    delta_window : int
    include_static : bool
    """

    def __init__(self, bank=None, n_coeffs=20, log_floor=1e-10, deltas=True, delta_window=2,
                 include_static=False):
        self.bank = bank
        self.n_coeffs = n_coeffs
        self.log_floor = log_floor
        self.deltas = deltas
        self.delta_window = delta_window
        self.include_static = include_static

    def _config(self):
        if self.bank is None:
            raise ConfigurationError("CepstralTransformer needs a filter bank")
        return CepstralConfig(self.bank, self.n_coeffs, self.log_floor, self.delta_window,
                              self.include_static)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        self._config()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        cfg = self._config()
        cep = cepstra(X, cfg)
        return append_deltas(cep, cfg) if self.deltas else cep
