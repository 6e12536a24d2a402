"""Short-time power spectrum front end.

Audio is pre-emphasised, cut into overlapping Hamming-windowed frames and
turned into one-sided power spectra ``|FFT_N(frame)|**2`` with ``N/2 + 1``
bins. No voice activity detection is applied; every frame is kept.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, FormatError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_PRE_EMPHASIS = 0.97


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio with amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ConfigurationError("audio must be mono (1-D samples)")
        if int(self.sample_rate) <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ConfigurationError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM mono RIFF WAV file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono audio, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write ``audio`` as 16-bit PCM mono, clipping to the representable range."""
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(audio.sample_rate)
        fh.writeframes(pcm.tobytes())


def pre_emphasize(samples, coeff=DEFAULT_PRE_EMPHASIS):
    """First-order pre-emphasis ``y[n] = x[n] - coeff * x[n-1]``, ``y[0] = x[0]``."""
    x = np.asarray(samples, dtype=np.float64)
    if not 0.0 <= coeff < 1.0:
        raise ConfigurationError(f"pre-emphasis coefficient must be in [0, 1), got {coeff}")
    if x.size == 0:
        return x.copy()
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - coeff * x[:-1]
    return y


def hamming(length):
    """Symmetric Hamming window ``0.54 - 0.46 cos(2 pi n / (L - 1))``."""
    if length < 1:
        raise ConfigurationError("window length must be at least 1")
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def ms_to_samples(ms, sample_rate):
    """Round a duration in milliseconds to a whole number of samples (half up)."""
    return int(np.floor(ms * sample_rate / 1000.0 + 0.5))


def num_frames(signal_len, frame_len, hop):
    if hop < 1 or frame_len < 1:
        raise ConfigurationError("frame length and hop must be at least one sample")
    if signal_len < frame_len:
        return 0
    return (signal_len - frame_len) // hop + 1


def frame_signal(samples, frame_len, hop, window=True):
    """Split ``samples`` into a ``(T, frame_len)`` array of (windowed) frames.

    Trailing samples that do not fill a whole frame are dropped.
    """
    x = np.asarray(samples, dtype=np.float64)
    count = num_frames(x.shape[0], frame_len, hop)
    if count == 0:
        return np.zeros((0, frame_len))
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop][:count]
    if window:
        return frames * hamming(frame_len)
    return frames.copy()


def frame_and_window(samples, sample_rate, frame_ms=20.0, hop_ms=10.0):
    """Hamming-windowed frames for a frame length and step given in milliseconds."""
    if not frame_ms >= hop_ms > 0:
        raise ConfigurationError(f"need frame_ms >= hop_ms > 0, got {frame_ms}, {hop_ms}")
    frame_len = ms_to_samples(frame_ms, sample_rate)
    hop = ms_to_samples(hop_ms, sample_rate)
    return frame_signal(samples, frame_len, hop)


def check_nfft(nfft):
    nfft = int(nfft)
    if nfft < 1 or nfft & (nfft - 1):
        raise ConfigurationError(f"nfft must be a power of two, got {nfft}")
    return nfft


def power_spectrum(frames, nfft):
    """Unscaled one-sided power spectrum of each frame.

    Parameters
    ----------
    frames : array_like, shape (frame_len,) or (T, frame_len)
        Time-domain frames, zero-padded to ``nfft`` before the FFT.
    nfft : int
        FFT size, a power of two no smaller than the frame length.

    Returns
    -------
    ndarray, shape (..., nfft // 2 + 1)
        ``|X[k]|**2`` for ``k = 0 .. nfft/2``. No ``1/N`` normalisation.
    """
    nfft = check_nfft(nfft)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] > nfft:
        raise ConfigurationError(f"frame length {frames.shape[-1]} exceeds nfft {nfft}")
    spec = np.fft.rfft(frames, n=nfft, axis=-1)
    return spec.real**2 + spec.imag**2


def power_spectrogram(audio: AudioBuffer, nfft, frame_ms=20.0, hop_ms=10.0,
                      pre_emphasis=DEFAULT_PRE_EMPHASIS):
    """Full front end: pre-emphasis, framing, windowing and power spectra."""
    emphasized = pre_emphasize(audio.samples, pre_emphasis)
    frames = frame_and_window(emphasized, audio.sample_rate, frame_ms, hop_ms)
    return power_spectrum(frames, nfft)
