"""DNN filter bank cepstral coefficients for spoofing detection.

A constrained filter bank neural network learns a non-negative,
band-limited filter bank from power spectra; cepstra computed through it
feed a two-model GMM log-likelihood-ratio detector evaluated by EER.
"""

from .cepstral import CepstralConfig, CepstralTransformer, FrontEndConfig, append_deltas, cepstra, extract_utterance
from .dsp import AudioBuffer, frame_and_window, power_spectrum, pre_emphasize, read_wav, write_wav
from .evaluation import EvalReport, ScoreEntry, aggregate_report, compute_eer
from .exceptions import ConfigurationError, EvaluationError, FormatError, ManifestError, NumericError
from .fbnn import FBNN, FbnnModel, TrainConfig, effective_filter_bank, forward, gradients, sgd_update, train_fbnn
from .filterbanks import BankSpec, build_filter_bank, erb_bandwidth
from .gmm import DiagonalGMM, GMMMLDetector, GmmModel, GmmTrainConfig, gmm_log_likelihood, llr_score, train_gmm
from .presets import PRESETS, get_preset

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "BankSpec", "CepstralConfig", "CepstralTransformer", "ConfigurationError", "DiagonalGMM",
    "EvalReport", "EvaluationError", "FBNN", "FbnnModel", "FormatError", "FrontEndConfig", "GMMMLDetector",
    "GmmModel", "GmmTrainConfig", "ManifestError", "NumericError", "PRESETS", "ScoreEntry", "TrainConfig",
    "aggregate_report", "append_deltas", "build_filter_bank", "cepstra", "compute_eer", "effective_filter_bank",
    "erb_bandwidth", "extract_utterance", "forward", "frame_and_window", "get_preset", "gmm_log_likelihood",
    "gradients", "llr_score", "power_spectrum", "pre_emphasize", "read_wav", "sgd_update", "train_fbnn",
    "train_gmm", "write_wav",
]
