"""Cochlear front end: resampling, ERB half-cosine filterbank, Hilbert envelopes
and the compressed 400 Hz cochleagram every texture statistic is computed from."""
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from typing import Optional, Union
import logging

import numpy as np
from scipy import fft as sp_fft
from scipy import signal as sp_signal

from .exceptions import ChannelIndexError, InvalidConfigError, InvalidInputError

logger = logging.getLogger(__name__)

WORKING_RATE = 20000
ENV_RATE = 400
COMPRESSION = 0.3
MIN_DURATION_S = 0.05

KAISER_BETA = 8.0
SINC_ZERO_CROSSINGS = 32  # per side of the interpolation kernel


def erb(freq_hz: Union[float, np.ndarray]) -> np.ndarray:
    """ERB-number of a frequency in Hz."""
    return 9.265 * np.log1p(np.asarray(freq_hz, dtype=np.float64) / 228.8)


def inverse_erb(erb_number: Union[float, np.ndarray]) -> np.ndarray:
    """Frequency in Hz of an ERB-number."""
    return 228.8 * np.expm1(np.asarray(erb_number, dtype=np.float64) / 9.265)


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio samples at a sample rate (Hz)."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError(f"Waveform samples must be 1-D, got shape {samples.shape}")
        if samples.size < 1:
            raise InvalidInputError("Waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("Waveform contains non-finite samples")
        if self.sample_rate <= 0 or int(self.sample_rate) != self.sample_rate:
            raise InvalidInputError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain: float) -> "Waveform":
        """Copy with every sample multiplied by ``gain``."""
        return Waveform(self.samples * gain, self.sample_rate)

    def segment(self, start: int, length: int) -> "Waveform":
        """Samples [start, start + length) as a new Waveform."""
        return Waveform(self.samples[start:start + length], self.sample_rate)


@lru_cache(maxsize=32)
def _lowpass_kernel(up: int, down: int) -> np.ndarray:
    max_rate = max(up, down)
    half_len = SINC_ZERO_CROSSINGS * max_rate
    kernel = sp_signal.firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", KAISER_BETA))
    kernel.setflags(write=False)
    return kernel


def _resample_array(x: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    g = gcd(int(source_rate), int(target_rate))
    up, down = int(target_rate) // g, int(source_rate) // g
    if up == down:
        return np.array(x, dtype=np.float64, copy=True)
    return sp_signal.resample_poly(
        x, up, down, axis=-1, window=_lowpass_kernel(up, down), padtype="line"
    )


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase Kaiser-windowed-sinc resampling to ``target_rate``."""
    if target_rate <= 0 or int(target_rate) != target_rate:
        raise InvalidConfigError(f"target_rate must be a positive integer, got {target_rate}")
    if len(w) < 2:
        raise InvalidInputError("Waveform is too short for the interpolation kernel (need >= 2 samples)")
    out = _resample_array(w.samples, w.sample_rate, int(target_rate))
    return Waveform(out, int(target_rate))


@dataclass(frozen=True, eq=False)
class CochlearFilterBank:
    """Half-cosine bands equally spaced on the ERB-number scale.

    Band k spans cutoffs k..k+2 and peaks at cutoff k+1, so neighbours overlap
    by half. The low and high shoulders complete the squared-gain sum to 1;
    they belong to the bank but are not cochleagram channels.
    """
    n_channels: int
    low_hz: float
    high_hz: float
    sample_rate: int
    fft_len: int
    cutoffs_erb: np.ndarray
    center_freqs: np.ndarray
    frequency_responses: np.ndarray
    shoulder_responses: np.ndarray

    @property
    def design_freqs(self) -> np.ndarray:
        return sp_fft.rfftfreq(self.fft_len, 1.0 / self.sample_rate)

    def gains(self, freqs: np.ndarray) -> np.ndarray:
        """Channel gains (n_channels x len(freqs)) at arbitrary frequencies."""
        e = erb(freqs)[np.newaxis, :]
        lo = self.cutoffs_erb[:-2, np.newaxis]
        hi = self.cutoffs_erb[2:, np.newaxis]
        mid = 0.5 * (lo + hi)
        inside = (e > lo) & (e < hi)
        return np.where(inside, np.cos((e - mid) / (hi - lo) * np.pi), 0.0)

    def channel_gain(self, channel: int, freqs: np.ndarray) -> np.ndarray:
        self._check_channel(channel)
        return self.gains(freqs)[channel]

    def shoulder_gains(self, freqs: np.ndarray) -> np.ndarray:
        e = erb(freqs)
        g = self.gains(freqs)
        low = np.where(e <= self.cutoffs_erb[1], np.sqrt(np.clip(1.0 - g[0] ** 2, 0.0, None)), 0.0)
        high = np.where(e >= self.cutoffs_erb[-2], np.sqrt(np.clip(1.0 - g[-1] ** 2, 0.0, None)), 0.0)
        return np.vstack([low, high])

    def squared_gain_sum(self, freqs: Optional[np.ndarray] = None) -> np.ndarray:
        if freqs is None:
            return (self.frequency_responses ** 2).sum(axis=0) + (self.shoulder_responses ** 2).sum(axis=0)
        return (self.gains(freqs) ** 2).sum(axis=0) + (self.shoulder_gains(freqs) ** 2).sum(axis=0)

    def _check_channel(self, channel: int):
        if not 0 <= channel < self.n_channels:
            raise ChannelIndexError(f"channel {channel} out of range for {self.n_channels} channels")


def default_fft_len(sample_rate: int) -> int:
    """Smallest power of two covering 0.2 s at ``sample_rate``."""
    return 1 << int(np.ceil(np.log2(2 * sample_rate * 0.1)))


def make_cochlear_filterbank(
    n_channels: int = 32,
    low_hz: float = 20.0,
    high_hz: float = 10000.0,
    fft_len: Optional[int] = None,
    sample_rate: int = WORKING_RATE,
) -> CochlearFilterBank:
    """Build the half-cosine ERB filterbank covering [low_hz, high_hz]."""
    if n_channels < 2:
        raise InvalidConfigError(f"n_channels must be at least 2, got {n_channels}")
    if sample_rate <= 0:
        raise InvalidConfigError(f"sample_rate must be positive, got {sample_rate}")
    if not 0 < low_hz < high_hz:
        raise InvalidConfigError(f"need 0 < low_hz < high_hz, got {low_hz}, {high_hz}")
    if high_hz > sample_rate / 2:
        raise InvalidConfigError(f"high_hz {high_hz} exceeds Nyquist {sample_rate / 2}")
    if fft_len is None:
        fft_len = default_fft_len(sample_rate)
    if fft_len < 2 * sample_rate * 0.1 or fft_len & (fft_len - 1):
        raise InvalidConfigError(f"fft_len must be a power of two >= {2 * sample_rate * 0.1:g}, got {fft_len}")

    cutoffs_erb = np.linspace(erb(low_hz), erb(high_hz), n_channels + 2)
    cutoffs_erb.setflags(write=False)
    center_freqs = inverse_erb(cutoffs_erb[1:-1])

    bank = CochlearFilterBank(
        n_channels=n_channels,
        low_hz=float(low_hz),
        high_hz=float(high_hz),
        sample_rate=int(sample_rate),
        fft_len=int(fft_len),
        cutoffs_erb=cutoffs_erb,
        center_freqs=center_freqs,
        frequency_responses=np.empty(0),
        shoulder_responses=np.empty(0),
    )
    freqs = bank.design_freqs
    responses = bank.gains(freqs)
    shoulders = bank.shoulder_gains(freqs)
    for arr in (center_freqs, responses, shoulders):
        arr.setflags(write=False)
    object.__setattr__(bank, "frequency_responses", responses)
    object.__setattr__(bank, "shoulder_responses", shoulders)
    logger.debug(
        f"Built {n_channels}-channel ERB filterbank {low_hz:g}-{high_hz:g} Hz "
        f"at {sample_rate} Hz (fft_len={fft_len})"
    )
    return bank


def _analytic_magnitude(spectrum: np.ndarray, gains: np.ndarray, n: int) -> np.ndarray:
    """|analytic signal| of the filtered input, from its one-sided spectrum."""
    m = spectrum.size
    full = np.zeros(n, dtype=np.complex128)
    full[:m] = spectrum * gains
    if n % 2 == 0:
        full[1:m - 1] *= 2.0
    else:
        full[1:m] *= 2.0
    return np.abs(sp_fft.ifft(full))


def subband_envelope(w: Waveform, bank: CochlearFilterBank, channel: int) -> np.ndarray:
    """Hilbert envelope of one channel at the waveform's sample rate."""
    bank._check_channel(channel)
    if w.sample_rate != bank.sample_rate:
        raise InvalidInputError(
            f"waveform rate {w.sample_rate} Hz does not match filterbank rate {bank.sample_rate} Hz"
        )
    n = len(w)
    spectrum = sp_fft.rfft(w.samples)
    freqs = sp_fft.rfftfreq(n, 1.0 / w.sample_rate)
    return _analytic_magnitude(spectrum, bank.channel_gain(channel, freqs), n)


def compress_and_downsample(
    envelope: np.ndarray,
    source_rate: int,
    env_rate: int = ENV_RATE,
    exponent: float = COMPRESSION,
) -> np.ndarray:
    """Power-law compression followed by band-limited resampling to ``env_rate``.

    Works along the last axis, so a channels x time matrix is accepted too.
    """
    env = np.asarray(envelope, dtype=np.float64)
    if env.shape[-1] < 2:
        raise InvalidInputError("envelope is too short to resample")
    if np.any(env < 0):
        raise InvalidInputError("envelope contains negative values")
    out = _resample_array(np.power(env, exponent), source_rate, env_rate)
    # resampling ringing can dip below zero
    np.maximum(out, 0.0, out=out)
    return out


@dataclass(frozen=True, eq=False)
class Cochleagram:
    envelopes: np.ndarray
    env_rate: int
    source_rate: int
    channel_center_freqs: np.ndarray

    def __post_init__(self):
        env = np.asarray(self.envelopes, dtype=np.float64)
        if env.ndim != 2 or env.shape[1] < 1:
            raise InvalidInputError(f"cochleagram must be a non-empty 2-D matrix, got shape {env.shape}")
        if not np.all(np.isfinite(env)) or np.any(env < 0):
            raise InvalidInputError("cochleagram entries must be finite and non-negative")
        object.__setattr__(self, "envelopes", env)

    @property
    def n_channels(self) -> int:
        return self.envelopes.shape[0]

    @property
    def n_frames(self) -> int:
        return self.envelopes.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.env_rate

    def with_envelopes(self, envelopes: np.ndarray) -> "Cochleagram":
        return Cochleagram(envelopes, self.env_rate, self.source_rate, self.channel_center_freqs)


def cochleagram(
    w: Waveform,
    bank: CochlearFilterBank,
    env_rate: int = ENV_RATE,
    exponent: float = COMPRESSION,
) -> Cochleagram:
    """Filter, envelope, compress and downsample every channel of ``bank``."""
    if w.sample_rate != bank.sample_rate:
        raise InvalidInputError(
            f"waveform rate {w.sample_rate} Hz does not match filterbank rate {bank.sample_rate} Hz"
        )
    if w.duration_s < MIN_DURATION_S:
        raise InvalidInputError(
            f"waveform is {w.duration_s * 1000:.1f} ms long; at least {MIN_DURATION_S * 1000:.0f} ms required"
        )

    n = len(w)
    n_frames = int(round(n * env_rate / w.sample_rate))
    spectrum = sp_fft.rfft(w.samples)
    gains = bank.gains(sp_fft.rfftfreq(n, 1.0 / w.sample_rate))

    envelopes = np.empty((bank.n_channels, n_frames))
    for channel in range(bank.n_channels):
        envelope = _analytic_magnitude(spectrum, gains[channel], n)
        envelopes[channel] = compress_and_downsample(envelope, w.sample_rate, env_rate, exponent)[:n_frames]

    return Cochleagram(envelopes, env_rate, w.sample_rate, bank.center_freqs)
