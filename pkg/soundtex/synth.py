"""Seeded synthetic ambient corpus for demos and end-to-end runs.

Each clip is one of a few stationary sound classes (white noise, amplitude
modulated noise at several rates, click trains, tone beds) at a random gain.
"""
from pathlib import Path
from typing import Callable, Dict, List, Union
import logging

import numpy as np

from .dsp_core import Waveform
from .exceptions import InvalidConfigError
from .manifest import Manifest, ManifestRecord, write_manifest
from .wav import write_wav

logger = logging.getLogger(__name__)

AM_RATES_HZ = (2.0, 4.0, 16.0, 64.0)
CLICK_RATES_HZ = (5.0, 20.0)
TONE_BEDS_HZ = ((250.0, 500.0), (1000.0, 1500.0, 3000.0))


def white_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n)


def am_noise(n: int, sample_rate: int, rate_hz: float, rng: np.random.Generator, depth: float = 1.0) -> np.ndarray:
    t = np.arange(n) / sample_rate
    phase = rng.uniform(0, 2 * np.pi)
    modulator = 1.0 + depth * np.sin(2 * np.pi * rate_hz * t + phase)
    return modulator * rng.standard_normal(n)


def click_train(n: int, sample_rate: int, rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(n)
    period = int(round(sample_rate / rate_hz))
    start = int(rng.integers(period))
    out[start::period] = 1.0
    return out


def tone_bed(n: int, sample_rate: int, freqs_hz, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for f in freqs_hz:
        out += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return out


def sound_classes(sample_rate: int) -> Dict[str, Callable[[int, np.random.Generator], np.ndarray]]:
    """Sample generators for each synthetic sound class, keyed by name."""
    classes = {"noise": lambda n, rng: white_noise(n, rng)}
    for rate in AM_RATES_HZ:
        classes[f"am{rate:g}"] = lambda n, rng, r=rate: am_noise(n, sample_rate, r, rng)
    for rate in CLICK_RATES_HZ:
        classes[f"clicks{rate:g}"] = lambda n, rng, r=rate: click_train(n, sample_rate, r, rng)
    for i, freqs in enumerate(TONE_BEDS_HZ):
        classes[f"tones{i}"] = lambda n, rng, f=freqs: tone_bed(n, sample_rate, f, rng)
    return classes


def synth_clip(kind: str, duration_s: float, sample_rate: int, rng: np.random.Generator, gain: float) -> Waveform:
    classes = sound_classes(sample_rate)
    if kind not in classes:
        raise InvalidConfigError(f"unknown sound class {kind!r}")
    n = int(round(duration_s * sample_rate))
    x = classes[kind](n, rng)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    return Waveform(gain * x, sample_rate)


def make_corpus(
    out_dir: Union[str, Path],
    n_clips: int = 20,
    duration_s: float = 6.0,
    seed: int = 0,
    sample_rate: int = 20000,
    n_short: int = 0,
    short_duration_s: float = 2.0,
) -> Manifest:
    """Write ``n_clips`` WAV files plus ``n_short`` too-short clips and a manifest.jsonl."""
    if n_clips < 0 or n_short < 0:
        raise InvalidConfigError("clip counts must be non-negative")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    kinds: List[str] = list(sound_classes(sample_rate))

    records = []
    for i in range(n_clips + n_short):
        kind = kinds[i % len(kinds)]
        duration = duration_s if i < n_clips else short_duration_s
        gain = float(rng.uniform(0.05, 0.5))
        clip = synth_clip(kind, duration, sample_rate, rng, gain)
        name = f"clip{i:03d}_{kind}.wav"
        write_wav(out_dir / name, clip)
        records.append(ManifestRecord(clip_id=f"clip{i:03d}", path=name, duration_s=clip.duration_s))

    manifest = Manifest(records=records, base_dir=out_dir)
    write_manifest(out_dir / "manifest.jsonl", manifest)
    logger.info(f"Synthesized {len(records)} clips into {out_dir}")
    return manifest
