"""Synthetic bona fide / spoofed utterances for desk-scale experiments.

Bona fide utterances are white noise shaped by a one-pole low-pass (about
-6 dB/octave above ~130 Hz) under a slow, syllable-rate amplitude envelope.
Spoofed utterances add a steady narrow-band resonance between 5 and 7 kHz
that does not follow the envelope, standing in for vocoder artefacts.
Every utterance is scaled to the same RMS so level carries no information.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .dsp import AudioBuffer, write_wav

TILT_POLE = 0.95
TARGET_RMS = 0.05


def _envelope(n, sample_rate, rng):
    t = np.arange(n) / sample_rate
    rates = rng.uniform(2.0, 6.0, size=2)
    phases = rng.uniform(0.0, 2 * np.pi, size=2)
    wave = 0.5 * (np.sin(2 * np.pi * rates[0] * t + phases[0]) + np.sin(2 * np.pi * rates[1] * t + phases[1]))
    return 0.05 + 0.95 * ((1.0 + wave) / 2.0) ** 2


def _resonance(n, sample_rate, rng, low=5000.0, high=7000.0, radius=0.995):
    fc = rng.uniform(low, high)
    theta = 2 * np.pi * fc / sample_rate
    a = [1.0, -2.0 * radius * np.cos(theta), radius**2]
    out = lfilter([1.0 - radius], a, rng.standard_normal(n))
    return out / np.std(out)


def make_utterance(spoofed, rng, sample_rate=16000, duration=1.0, resonance_gain=0.3):
    """One utterance; ``resonance_gain`` sets the artefact level relative to the speech RMS."""
    n = int(round(duration * sample_rate))
    speech = lfilter([1.0], [1.0, -TILT_POLE], rng.standard_normal(n))
    speech = speech / np.std(speech) * _envelope(n, sample_rate, rng)
    x = speech
    if spoofed:
        x = speech + resonance_gain * np.std(speech) * _resonance(n, sample_rate, rng)
    return AudioBuffer(TARGET_RMS * x / np.std(x), sample_rate)


def make_corpus(n_per_class, seed, sample_rate=16000, duration=1.0, resonance_gain=0.3):
    """Balanced list of ``(audio, is_spoof)`` pairs, alternating classes."""
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(n_per_class):
        for spoofed in (False, True):
            items.append((make_utterance(spoofed, rng, sample_rate, duration, resonance_gain), spoofed))
    return items


def write_corpus(directory, n_per_class, seed, prefix="utt", attack_id="S1", **kwargs):
    """Write a synthetic corpus as WAV files plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (audio, spoofed) in enumerate(make_corpus(n_per_class, seed, **kwargs)):
        name = f"{prefix}_{i:05d}.wav"
        write_wav(directory / name, audio)
        if spoofed:
            lines.append(f"{name}\tspoof\t{attack_id}\t1")
        else:
            lines.append(f"{name}\thuman\t-\t0")
    manifest = directory / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
