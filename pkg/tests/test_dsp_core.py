import numpy as np
import pytest

from soundtex.dsp_core import (
    Waveform,
    cochleagram,
    compress_and_downsample,
    erb,
    inverse_erb,
    make_cochlear_filterbank,
    resample,
    subband_envelope,
)
from soundtex.exceptions import ChannelIndexError, InvalidConfigError, InvalidInputError

SR = 20000


@pytest.fixture(scope="module")
def bank():
    return make_cochlear_filterbank()


def tone(freq_hz, duration_s=1.0, amplitude=1.0, sample_rate=SR):
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return Waveform(amplitude * np.cos(2 * np.pi * freq_hz * t), sample_rate)


def test_erb_round_trip():
    freqs = np.array([20.0, 228.8, 1000.0, 10000.0])
    np.testing.assert_allclose(inverse_erb(erb(freqs)), freqs, rtol=1e-12)


@pytest.mark.parametrize("samples", [[], [0.0, np.nan], [[0.1, 0.2]]])
def test_waveform_rejects_bad_samples(samples):
    with pytest.raises(InvalidInputError):
        Waveform(np.array(samples), SR)


def test_waveform_samples_are_read_only():
    w = Waveform(np.zeros(10), SR)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_resample_identity_rate():
    w = Waveform(np.full(800, 0.5), 8000)
    out = resample(w, 8000)
    assert out.sample_rate == 8000
    np.testing.assert_array_equal(out.samples, w.samples)


def test_resample_sine_44100_to_20000():
    src = 44100
    t = np.arange(src) / src
    w = Waveform(np.sin(2 * np.pi * 100 * t), src)

    out = resample(w, SR)

    assert out.sample_rate == SR
    assert abs(out.duration_s - w.duration_s) <= 1.0 / SR
    expected = np.sin(2 * np.pi * 100 * np.arange(len(out)) / SR)
    trim = len(out) // 20
    assert np.max(np.abs(out.samples[trim:-trim] - expected[trim:-trim])) < 1e-3


def test_resample_rejects_single_sample():
    with pytest.raises(InvalidInputError):
        resample(Waveform(np.array([0.3]), 44100), SR)


def test_filterbank_completeness(bank):
    freqs = bank.design_freqs
    passband = (freqs >= 20.0) & (freqs <= 10000.0)
    total = bank.squared_gain_sum()[passband]
    np.testing.assert_allclose(total, 1.0, atol=1e-6)


def test_filterbank_completeness_on_arbitrary_frequencies(bank):
    freqs = np.linspace(20.0, 10000.0, 5001)
    np.testing.assert_allclose(bank.squared_gain_sum(freqs), 1.0, atol=1e-6)


def test_filterbank_centers_ascending(bank):
    assert bank.n_channels == 32
    assert len(bank.center_freqs) == 32
    assert np.all(np.diff(bank.center_freqs) > 0)
    assert bank.center_freqs[0] > 20.0
    assert bank.center_freqs[-1] < 10000.0
    assert np.all(bank.frequency_responses >= 0)


def test_two_channel_filterbank_ordering():
    small = make_cochlear_filterbank(n_channels=2, low_hz=100, high_hz=400)
    assert small.center_freqs[0] < small.center_freqs[1]


@pytest.mark.parametrize("kwargs", [
    {"high_hz": 12000.0},
    {"n_channels": 1},
    {"low_hz": 500.0, "high_hz": 400.0},
    {"fft_len": 3000},
    {"fft_len": 1024},
])
def test_filterbank_invalid_config(kwargs):
    with pytest.raises(InvalidConfigError):
        make_cochlear_filterbank(**kwargs)


def test_envelope_of_center_tone_is_constant(bank):
    channel = 12
    freq = float(round(bank.center_freqs[channel]))
    env = subband_envelope(tone(freq), bank, channel)

    assert len(env) == SR
    trim = len(env) // 20
    body = env[trim:-trim]
    assert body.std() / body.mean() < 0.02
    expected_gain = bank.channel_gain(channel, np.array([freq]))[0]
    np.testing.assert_allclose(body.mean(), expected_gain, rtol=1e-6)


def test_envelope_of_silence_is_zero(bank):
    env = subband_envelope(Waveform(np.zeros(SR // 10), SR), bank, 5)
    np.testing.assert_array_equal(env, 0.0)


def test_envelope_rejects_tone_outside_passband(bank):
    env = subband_envelope(tone(5000.0), bank, 0)
    assert env.max() < 1e-3


def test_envelope_channel_out_of_range(bank):
    with pytest.raises(ChannelIndexError):
        subband_envelope(tone(1000.0, 0.1), bank, 32)
    with pytest.raises(IndexError):
        subband_envelope(tone(1000.0, 0.1), bank, -1)


@pytest.mark.parametrize("value", [1.0, 0.5])
def test_compress_constant_envelope(value):
    out = compress_and_downsample(np.full(SR, value), SR)
    assert len(out) == 400
    np.testing.assert_allclose(out, value ** 0.3, atol=1e-6)


def test_compress_rejects_negative():
    env = np.full(1000, 0.2)
    env[10] = -0.1
    with pytest.raises(InvalidInputError):
        compress_and_downsample(env, SR)


def test_cochleagram_of_silence(bank):
    c = cochleagram(Waveform(np.zeros(75000), SR), bank)
    assert c.envelopes.shape == (32, 1500)
    assert c.env_rate == 400
    np.testing.assert_array_equal(c.envelopes, 0.0)


def test_cochleagram_rejects_short_or_mismatched_input(bank):
    with pytest.raises(InvalidInputError):
        cochleagram(Waveform(np.zeros(500), SR), bank)
    with pytest.raises(InvalidInputError):
        cochleagram(Waveform(np.zeros(16000), 16000), bank)


def test_cochleagram_single_tone_selects_channels(bank):
    amplitude = 0.5
    c = cochleagram(tone(1000.0, amplitude=amplitude), bank)
    gains = bank.gains(np.array([1000.0]))[:, 0]

    means = c.envelopes.mean(axis=1)
    active = gains > 1e-3
    assert active.any()
    np.testing.assert_allclose(means[active], (amplitude * gains[active]) ** 0.3, rtol=1e-3)
    assert np.all(means[gains == 0] < 1e-2)


def test_cochleagram_gain_covariance(bank):
    rng = np.random.default_rng(3)
    w = Waveform(rng.standard_normal(SR) * 0.1, SR)
    base = cochleagram(w, bank).envelopes
    loud = cochleagram(w.scaled(10.0), bank).envelopes
    np.testing.assert_allclose(loud, 10.0 ** 0.3 * base, rtol=1e-6, atol=1e-12)


def test_cochleagram_circular_shift_by_period(bank):
    period = 400
    pattern = np.random.default_rng(5).standard_normal(period)
    x = np.tile(pattern, SR // period)
    a = cochleagram(Waveform(x, SR), bank).envelopes
    b = cochleagram(Waveform(np.roll(x, period), SR), bank).envelopes
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_cochleagram_entries_nonnegative(bank):
    rng = np.random.default_rng(11)
    clicks = np.zeros(SR)
    clicks[::400] = 1.0
    w = Waveform(clicks + 0.01 * rng.standard_normal(SR), SR)
    assert np.all(cochleagram(w, bank).envelopes >= 0)
