"""Named feature configurations (FFT size, channels, coefficients, bank)."""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConfigurationError
from .filterbanks import BankSpec


@dataclass(frozen=True)
class PipelinePreset:
    name: str
    nfft: int
    channels: int
    num_coeffs: int
    bank_kind: str
    learned: bool

    def bank_spec(self, sample_rate=16000, nfft=None, channels=None):
        return BankSpec(self.bank_kind, channels or self.channels, nfft or self.nfft, sample_rate)


PRESETS = {
    p.name: p
    for p in [
        PipelinePreset("lfcc", 512, 20, 20, "triangular", False),
        PipelinePreset("rfcc", 512, 20, 20, "rectangular", False),
        PipelinePreset("gfcc", 1024, 128, 20, "gammatone", False),
        PipelinePreset("igfcc", 1024, 128, 20, "inverted_gammatone", False),
        PipelinePreset("dnn-lfcc", 512, 20, 20, "triangular", True),
        PipelinePreset("dnn-rfcc", 512, 20, 20, "rectangular", True),
        PipelinePreset("dnn-gfcc", 1024, 128, 20, "gammatone", True),
        PipelinePreset("dnn-igfcc", 1024, 128, 20, "inverted_gammatone", True),
    ]
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
