"""Sound-texture statistics of a cochleagram window.

The texture vector is [mu, sigma_tilde, rho, b_tilde, loudness], each group
rescaled inversely with its dimension.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import fft as sp_fft

from .dsp_core import (
    COMPRESSION,
    ENV_RATE,
    Cochleagram,
    CochlearFilterBank,
    Waveform,
    cochleagram,
)
from .exceptions import InvalidConfigError, InvalidInputError, OutOfRangeError

logger = logging.getLogger(__name__)

CORRELATION_OFFSETS = (1, 2, 3, 5)
DEFAULT_WINDOW_S = 3.75
MIN_MOD_LEN = 16
FLAT_RTOL = 1e-10


def correlation_pairs(n_channels: int, offsets: Sequence[int] = CORRELATION_OFFSETS):
    """(j, k) channel pairs ordered by offset, then by j."""
    return [(j, j + d) for d in offsets for j in range(n_channels - d)]


def group_factor(dim: int, rescale: str) -> float:
    """Multiplier applied to a statistic group of ``dim`` values."""
    if rescale == "dim":
        return 1.0 / dim
    if rescale == "sqrtdim":
        return 1.0 / np.sqrt(dim)
    raise InvalidConfigError(f"unknown rescale mode {rescale!r}")


@dataclass(frozen=True)
class TextureLayout:
    """Where each statistic group lives in the flat texture vector."""
    n_channels: int = 32
    offsets: Tuple[int, ...] = CORRELATION_OFFSETS
    n_mod: int = 10
    rescale: str = "dim"

    @property
    def n_rho(self) -> int:
        return sum(max(0, self.n_channels - d) for d in self.offsets)

    @property
    def group_dims(self) -> Tuple[int, int, int, int, int]:
        n = self.n_channels
        return (n, n, self.n_rho, n * self.n_mod, 1)

    @property
    def dim(self) -> int:
        return sum(self.group_dims)

    @property
    def slices(self) -> dict:
        names = ("mu", "sigma_tilde", "rho", "b_tilde", "loudness")
        out, start = {}, 0
        for name, size in zip(names, self.group_dims):
            out[name] = slice(start, start + size)
            start += size
        return out

    def factors(self) -> np.ndarray:
        """Per-entry group scale factors, aligned with the texture vector."""
        parts = []
        for size in self.group_dims:
            # loudness is a single entry, so its factor is 1 in either mode
            parts.append(np.full(size, group_factor(max(size, 1), self.rescale)))
        return np.concatenate(parts)

    def unscale(self, vector: np.ndarray) -> np.ndarray:
        """Undo the per-group rescaling (for display)."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape[-1] != self.dim:
            raise InvalidInputError(f"expected texture length {self.dim}, got {vector.shape[-1]}")
        return vector / self.factors()


@dataclass(frozen=True, eq=False)
class ModulationFilterBank:
    n_filters: int
    center_freqs: np.ndarray
    frequency_responses: np.ndarray
    env_len: int
    env_rate: int
    q: float


def make_modulation_filterbank(
    n: int = 10,
    low_hz: float = 0.5,
    high_hz: float = 200.0,
    env_len: int = 1500,
    env_rate: int = ENV_RATE,
    q: float = 2.0,
) -> ModulationFilterBank:
    """Log-spaced constant-Q half-cosine modulation filters on the envelope FFT grid."""
    if n < 1:
        raise InvalidConfigError(f"need at least one modulation filter, got {n}")
    if not 0 < low_hz < high_hz:
        raise InvalidConfigError(f"need 0 < low_hz < high_hz, got {low_hz}, {high_hz}")
    if high_hz > env_rate / 2:
        raise InvalidConfigError(f"high_hz {high_hz} exceeds the envelope Nyquist {env_rate / 2}")
    if env_len < MIN_MOD_LEN:
        raise InvalidConfigError(f"env_len must be at least {MIN_MOD_LEN}, got {env_len}")
    if q <= 0:
        raise InvalidConfigError(f"q must be positive, got {q}")

    if n == 1:
        centers = np.array([float(low_hz)])
    else:
        centers = low_hz * (high_hz / low_hz) ** (np.arange(n) / (n - 1))

    freqs = sp_fft.rfftfreq(env_len, 1.0 / env_rate)
    lo = centers * (1.0 - 1.0 / (2.0 * q))
    hi = centers * (1.0 + 1.0 / (2.0 * q))
    responses = np.zeros((n, freqs.size))
    positive = freqs > 0
    log_f = np.log2(freqs[positive])
    for j in range(n):
        inside = (freqs[positive] > lo[j]) & (freqs[positive] < hi[j])
        width = np.log2(hi[j]) - np.log2(lo[j])
        gain = np.cos((log_f - np.log2(centers[j])) / width * np.pi)
        responses[j, positive] = np.where(inside, gain, 0.0)

    centers.setflags(write=False)
    responses.setflags(write=False)
    return ModulationFilterBank(
        n_filters=n,
        center_freqs=centers,
        frequency_responses=responses,
        env_len=int(env_len),
        env_rate=int(env_rate),
        q=float(q),
    )


def loudness_and_normalize(c: Cochleagram) -> Tuple[Cochleagram, float]:
    """Divide by the median (over time) of the per-frame envelope norm."""
    norms = np.linalg.norm(c.envelopes, axis=0)
    loudness = float(np.median(norms))
    if loudness == 0.0:
        # silence stays at the origin
        return c.with_envelopes(np.zeros_like(c.envelopes)), 0.0
    return c.with_envelopes(c.envelopes / loudness), loudness


def flat_channels(envelopes: np.ndarray) -> np.ndarray:
    """Channels whose range is negligible next to their magnitude (or all zero)."""
    spread = envelopes.max(axis=1) - envelopes.min(axis=1)
    return spread <= FLAT_RTOL * np.abs(envelopes).max(axis=1)


def marginal_stats(c_norm: Cochleagram) -> Tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population standard deviation over time."""
    env = c_norm.envelopes
    sigma = env.std(axis=1)
    sigma[flat_channels(env)] = 0.0
    return env.mean(axis=1), sigma


def channel_correlations(
    c_norm: Cochleagram, offsets: Sequence[int] = CORRELATION_OFFSETS
) -> np.ndarray:
    """Pearson correlations for channel pairs at the given offsets.

    Pairs involving a zero-variance channel contribute 0.
    """
    if c_norm.n_frames < 2:
        raise InvalidInputError("correlations need at least 2 time steps")
    centered = c_norm.envelopes - c_norm.envelopes.mean(axis=1, keepdims=True)
    power = (centered ** 2).mean(axis=1)
    flat = flat_channels(c_norm.envelopes)

    pairs = correlation_pairs(c_norm.n_channels, offsets)
    rho = np.zeros(len(pairs))
    for idx, (j, k) in enumerate(pairs):
        if not (flat[j] or flat[k]):
            rho[idx] = (centered[j] * centered[k]).mean() / np.sqrt(power[j] * power[k])
    return np.clip(rho, -1.0, 1.0)


def modulation_power(
    c_norm: Cochleagram, mb: ModulationFilterBank, sigma: np.ndarray
) -> np.ndarray:
    """Variance-normalized modulation power, channels x filters."""
    n_frames = c_norm.n_frames
    if n_frames < MIN_MOD_LEN:
        raise InvalidInputError(f"modulation power needs at least {MIN_MOD_LEN} frames, got {n_frames}")
    if mb.env_len != n_frames:
        raise InvalidConfigError(
            f"modulation filterbank built for {mb.env_len} frames, cochleagram has {n_frames}"
        )
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (c_norm.n_channels,):
        raise InvalidInputError(f"sigma must have {c_norm.n_channels} entries, got shape {sigma.shape}")

    centered = c_norm.envelopes - c_norm.envelopes.mean(axis=1, keepdims=True)
    spectra = sp_fft.rfft(centered, axis=1)
    b_tilde = np.zeros((c_norm.n_channels, mb.n_filters))
    for j in range(mb.n_filters):
        response = sp_fft.irfft(spectra * mb.frequency_responses[j], n=n_frames, axis=1)
        b = (response ** 2).mean(axis=1)
        live = sigma > 0
        b_tilde[live, j] = np.sqrt(b[live] / sigma[live] ** 2)
    return b_tilde


@dataclass(frozen=True, eq=False)
class SoundTexture:
    mu: np.ndarray
    sigma_tilde: np.ndarray
    rho: np.ndarray
    b_tilde: np.ndarray
    loudness: float
    group_scaled: bool
    rescale: str = "dim"
    offsets: Tuple[int, ...] = CORRELATION_OFFSETS

    @property
    def layout(self) -> TextureLayout:
        n = self.mu.size
        return TextureLayout(
            n_channels=n, offsets=self.offsets, n_mod=self.b_tilde.shape[1], rescale=self.rescale
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.mu, self.sigma_tilde, self.rho, self.b_tilde.ravel(), [self.loudness]
        ])

    def __len__(self) -> int:
        return self.mu.size * 2 + self.rho.size + self.b_tilde.size + 1


def assemble_texture(
    mu: np.ndarray,
    sigma: np.ndarray,
    rho: np.ndarray,
    b_tilde: np.ndarray,
    loudness: float,
    rescale: str = "dim",
    offsets: Optional[Sequence[int]] = CORRELATION_OFFSETS,
) -> SoundTexture:
    """Turn sigma into sigma / mu and scale every statistic group by its group factor."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    b_tilde = np.asarray(b_tilde, dtype=np.float64)

    n = mu.size
    if mu.ndim != 1 or sigma.shape != mu.shape:
        raise InvalidInputError(f"mu and sigma must be equal-length vectors, got {mu.shape} and {sigma.shape}")
    if b_tilde.ndim != 2 or b_tilde.shape[0] != n:
        raise InvalidInputError(f"b_tilde must be {n} x n_mod, got shape {b_tilde.shape}")
    if offsets is not None:
        expected = sum(max(0, n - d) for d in offsets)
        if rho.shape != (expected,):
            raise InvalidInputError(f"rho must have {expected} entries for {n} channels, got {rho.size}")

    sigma_tilde = np.zeros(n)
    nonzero = mu != 0
    sigma_tilde[nonzero] = np.sqrt(sigma[nonzero] ** 2 / mu[nonzero] ** 2)

    return SoundTexture(
        mu=mu * group_factor(n, rescale),
        sigma_tilde=sigma_tilde * group_factor(n, rescale),
        rho=rho * group_factor(max(rho.size, 1), rescale),
        b_tilde=b_tilde * group_factor(max(b_tilde.size, 1), rescale),
        loudness=float(loudness) * group_factor(1, rescale),
        group_scaled=True,
        rescale=rescale,
        offsets=tuple(offsets) if offsets is not None else CORRELATION_OFFSETS,
    )


def texture_from_cochleagram(
    c: Cochleagram,
    mb: ModulationFilterBank,
    offsets: Sequence[int] = CORRELATION_OFFSETS,
    rescale: str = "dim",
) -> SoundTexture:
    """Texture statistics of a whole cochleagram."""
    c_norm, loudness = loudness_and_normalize(c)
    mu, sigma = marginal_stats(c_norm)
    rho = channel_correlations(c_norm, offsets)
    b_tilde = modulation_power(c_norm, mb, sigma)
    return assemble_texture(mu, sigma, rho, b_tilde, loudness, rescale=rescale, offsets=offsets)


def window_bounds(n_samples: int, sample_rate: int, t_center: float, win: float) -> Tuple[int, int]:
    """Sample range [start, start + length) of a window, or OutOfRangeError."""
    duration = n_samples / sample_rate
    start_s = t_center - win / 2.0
    if start_s < -1e-9 or t_center + win / 2.0 > duration + 1e-9:
        raise OutOfRangeError(
            f"window of {win:g} s centered at {t_center:g} s does not fit in a {duration:g} s clip"
        )
    length = int(round(win * sample_rate))
    start = min(max(int(round(start_s * sample_rate)), 0), n_samples - length)
    if start < 0:
        raise OutOfRangeError(f"window of {length} samples is longer than the {n_samples}-sample clip")
    return start, length


def texture_for_window(
    w: Waveform,
    bank: CochlearFilterBank,
    mb: ModulationFilterBank,
    t_center: float,
    win: float = DEFAULT_WINDOW_S,
    offsets: Sequence[int] = CORRELATION_OFFSETS,
    rescale: str = "dim",
    env_rate: int = ENV_RATE,
    exponent: float = COMPRESSION,
) -> SoundTexture:
    """Texture of the window centered at ``t_center`` seconds; OutOfRangeError if it does not fit."""
    start, length = window_bounds(len(w), w.sample_rate, t_center, win)
    c = cochleagram(w.segment(start, length), bank, env_rate=env_rate, exponent=exponent)
    return texture_from_cochleagram(c, mb, offsets=offsets, rescale=rescale)
