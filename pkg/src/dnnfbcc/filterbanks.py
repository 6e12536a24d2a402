"""Manually designed filter banks sampled on FFT bins.

Every bank is a ``(D, C)`` matrix with ``D = nfft // 2 + 1`` rows (one per
FFT bin at frequency ``k * sample_rate / nfft``) and one column per channel.
Columns are non-negative, peak at (or just below) 1 and are ordered by
ascending centre frequency. The same matrices serve as feature extractors
and as the band-limiting masks of the filter bank neural network.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, FormatError

KINDS = ("triangular", "rectangular", "gammatone", "inverted_gammatone")

GAMMATONE_ORDER = 4
GAMMATONE_BANDWIDTH_FACTOR = 1.019


@dataclass(frozen=True)
class BankSpec:
    kind: str
    channels: int
    nfft: int
    sample_rate: int = 16000
    f_low: float | None = None
    f_high: float | None = None
    order: int = GAMMATONE_ORDER
    bandwidth_factor: float = GAMMATONE_BANDWIDTH_FACTOR

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown filter bank kind {self.kind!r}; expected one of {KINDS}")
        if self.channels < 1:
            raise ConfigurationError("a filter bank needs at least one channel")
        if self.f_low is None:
            object.__setattr__(self, "f_low", 20.0 if "gammatone" in self.kind else 0.0)
        if self.f_high is None:
            object.__setattr__(self, "f_high", self.sample_rate / 2.0)
        if not 0 <= self.f_low < self.f_high <= self.sample_rate / 2.0:
            raise ConfigurationError(
                f"need 0 <= f_low < f_high <= {self.sample_rate / 2.0}, got {self.f_low}, {self.f_high}"
            )

    @property
    def num_bins(self):
        return self.nfft // 2 + 1


def bin_frequencies(nfft, sample_rate):
    return np.arange(nfft // 2 + 1) * (sample_rate / nfft)


def erb_bandwidth(fc):
    """Equivalent rectangular bandwidth in Hz at centre frequency ``fc`` (Glasberg & Moore)."""
    fc_arr = np.asarray(fc, dtype=np.float64)
    if np.any(fc_arr < 0):
        raise ValueError("centre frequency must be non-negative")
    out = 24.7 * (4.37 * fc_arr / 1000.0 + 1.0)
    return float(out) if out.ndim == 0 else out


def hz_to_erb_rate(f):
    return 21.4 * np.log10(1.0 + 4.37e-3 * np.asarray(f, dtype=np.float64))


def erb_rate_to_hz(e):
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 4.37e-3


def gammatone_centers(channels, f_low, f_high):
    """Centre frequencies equally spaced on the ERB-rate scale, ascending."""
    return erb_rate_to_hz(np.linspace(hz_to_erb_rate(f_low), hz_to_erb_rate(f_high), channels))


def gammatone_magnitude(freqs, fc, bandwidth, order=GAMMATONE_ORDER):
    """Magnitude response ``[1 + ((f - fc) / b)**2] ** (-order / 2)``."""
    return (1.0 + ((freqs - fc) / bandwidth) ** 2) ** (-order / 2.0)


def _triangular(spec, freqs):
    edges = np.linspace(spec.f_low, spec.f_high, spec.channels + 2)
    weights = np.zeros((freqs.size, spec.channels))
    for c in range(spec.channels):
        left, center, right = edges[c:c + 3]
        rising = (freqs - left) / (center - left)
        falling = (right - freqs) / (right - center)
        weights[:, c] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def _rectangular(spec, freqs):
    edges = np.linspace(spec.f_low, spec.f_high, spec.channels + 1)
    weights = np.zeros((freqs.size, spec.channels))
    inside = (freqs >= spec.f_low) & (freqs <= spec.f_high)
    band = np.clip(np.searchsorted(edges, freqs, side="right") - 1, 0, spec.channels - 1)
    weights[np.flatnonzero(inside), band[inside]] = 1.0
    return weights


def _gammatone(spec, freqs, inverted):
    centers = gammatone_centers(spec.channels, spec.f_low, spec.f_high)
    bandwidths = spec.bandwidth_factor * erb_bandwidth(centers)
    if inverted:
        # Mirror the whole bank about the band centre: narrow, dense channels
        # end up at high frequency. Reversed so columns stay ascending.
        centers = (spec.f_low + spec.f_high - centers)[::-1]
        bandwidths = bandwidths[::-1]
    weights = gammatone_magnitude(freqs[:, None], centers[None, :], bandwidths[None, :], spec.order)
    return weights / weights.max(axis=0, keepdims=True)


def build_filter_bank(spec: BankSpec) -> np.ndarray:
    """Sample the bank described by ``spec`` on the FFT bin grid.

    Returns
    -------
    ndarray, shape (nfft // 2 + 1, channels)
        Non-negative weights in [0, 1]. Gammatone columns are normalised to
        a sampled peak of 1; triangles keep their continuous shape, so the
        sampled peak is below 1 when the apex falls between two bins, and
        overlapping triangles sum to 1 between the first and last apex.

    Raises
    ------
    ConfigurationError
        If some channel covers no FFT bin (too many channels for ``nfft``).
    """
    freqs = bin_frequencies(spec.nfft, spec.sample_rate)
    if spec.kind == "triangular":
        weights = _triangular(spec, freqs)
    elif spec.kind == "rectangular":
        weights = _rectangular(spec, freqs)
    else:
        weights = _gammatone(spec, freqs, inverted=spec.kind == "inverted_gammatone")
    empty = np.flatnonzero(weights.max(axis=0) <= 0.0)
    if empty.size:
        raise ConfigurationError(
            f"{spec.kind} bank with {spec.channels} channels leaves channel(s) "
            f"{empty.tolist()} without any FFT bin at nfft={spec.nfft}"
        )
    return weights


def peak_bins(bank):
    return np.argmax(np.asarray(bank), axis=0)


def validate_bank(bank, bounded=True, contiguous=True):
    """Check the filter bank invariants, returning the bank as a float array.

    Every entry must be non-negative (and at most 1 when ``bounded``), every
    column must have a non-zero entry and, when ``contiguous``, each column's
    support must be a single run of bins.
    """
    bank = np.asarray(bank, dtype=np.float64)
    if bank.ndim != 2:
        raise ConfigurationError("a filter bank must be a 2-D (bins, channels) matrix")
    if not np.all(np.isfinite(bank)) or np.any(bank < 0):
        raise ConfigurationError("filter bank entries must be finite and non-negative")
    if bounded and np.any(bank > 1.0):
        raise ConfigurationError("filter bank entries must not exceed 1")
    for c in range(bank.shape[1]):
        support = np.flatnonzero(bank[:, c] > 0)
        if support.size == 0:
            raise ConfigurationError(f"filter bank channel {c} is all zero")
        if contiguous and support[-1] - support[0] + 1 != support.size:
            raise ConfigurationError(f"filter bank channel {c} has non-contiguous support")
    return bank


def export_bank_csv(bank, path, sample_rate=16000):
    """Write ``bank`` as CSV with a ``bin_hz,ch_0,...`` header and one row per bin."""
    # Learned banks can underflow to exact zeros inside a band, so only
    # sign and non-empty columns are enforced here.
    bank = validate_bank(bank, bounded=False, contiguous=False)
    nfft = 2 * (bank.shape[0] - 1)
    freqs = bin_frequencies(nfft, sample_rate)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_hz"] + [f"ch_{c}" for c in range(bank.shape[1])])
        for f, row in zip(freqs, bank):
            writer.writerow([repr(float(f))] + [repr(float(v)) for v in row])


def read_bank_csv(path):
    """Inverse of :func:`export_bank_csv`; returns ``(bank, bin_hz)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["bin_hz"]:
        raise FormatError(f"{path}: missing 'bin_hz' header")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise FormatError(f"{path}: ragged rows")
    return data[:, 1:], data[:, 0]
