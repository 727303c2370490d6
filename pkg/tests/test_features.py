import numpy as np
import pytest

from csphmm.audio import AudioBuffer
from csphmm.features import (
    DEFAULT_FEATURES,
    FeatureConfig,
    SignalTooShortError,
    acoustic_features,
    compute_delta,
    compute_mfcc,
    estimate_f0,
    frame_signal,
    frame_tracks,
    log_mel_energies,
    prosodic_features,
)

from oracles import regression_delta, sine

RATE = 16000


def test_one_window_exactly():
    frames = frame_signal(np.zeros(480), 0.030, 0.005, sample_rate=RATE)
    assert frames.shape == (1, 480)


def test_sliding_window_count():
    frames = frame_signal(np.arange(1280.0), 0.030, 0.005, sample_rate=RATE, window=False)
    assert frames.shape == (11, 480)
    # starts at 0, 80, ..., 800
    np.testing.assert_array_equal(frames[:, 0], np.arange(0, 801, 80))


def test_constant_signal_gives_hamming_window():
    frames = frame_signal(np.ones(480), 0.030, 0.005, sample_rate=RATE)
    np.testing.assert_array_equal(frames[0], np.hamming(480))


def test_short_signal_rejected():
    with pytest.raises(SignalTooShortError, match="signal too short"):
        frame_signal(np.zeros(479), 0.030, 0.005, sample_rate=RATE)


def test_audio_buffer_is_scaled():
    buf = AudioBuffer(np.full(480, 16384, dtype=np.int16), RATE)
    frames = frame_signal(buf, window=False)
    np.testing.assert_allclose(frames, 0.5)


def test_mfcc_of_silence_is_floored_constant():
    mfcc = compute_mfcc(np.zeros((1, 480)))
    assert mfcc.shape == (1, 16)
    assert np.all(np.isfinite(mfcc))
    # the DCT of a constant log-floor vector: only c0 is non-zero
    expected_c0 = np.log(1e-10) * np.sqrt(26)
    assert mfcc[0, 0] == pytest.approx(expected_c0, rel=1e-12)
    np.testing.assert_allclose(mfcc[0, 1:], 0.0, atol=1e-9)


def test_mfcc_is_deterministic():
    frame = frame_signal(sine(1000, 0.03), sample_rate=RATE)
    first = compute_mfcc(frame)
    second = compute_mfcc(frame.copy())
    assert np.array_equal(first, second)


def test_amplitude_doubling_shifts_only_c0():
    rng = np.random.default_rng(3)
    frame = frame_signal(rng.standard_normal(480), sample_rate=RATE)
    loud = compute_mfcc(2 * frame)
    quiet = compute_mfcc(frame)
    # power x4 raises every log filter energy by log 4
    np.testing.assert_allclose(log_mel_energies(2 * frame) - log_mel_energies(frame),
                               np.log(4.0), rtol=0, atol=1e-10)
    assert loud[0, 0] - quiet[0, 0] == pytest.approx(np.log(4.0) * np.sqrt(26), rel=1e-10)
    np.testing.assert_allclose(loud[0, 1:], quiet[0, 1:], rtol=0, atol=1e-9)


def test_delta_of_constant_is_zero():
    static = np.tile(np.arange(16.0), (10, 1))
    np.testing.assert_array_equal(compute_delta(static), 0.0)


def test_delta_of_ramp_is_slope_inside():
    v = np.linspace(-1, 1, 16)
    static = np.arange(12)[:, None] * v
    delta = compute_delta(static, 2)
    np.testing.assert_allclose(delta[2:-2], np.tile(v, (8, 1)), atol=1e-12)


def test_delta_matches_regression_formula():
    rng = np.random.default_rng(11)
    static = rng.normal(size=(5, 16))
    np.testing.assert_allclose(compute_delta(static, 2), regression_delta(static, 2), atol=1e-12)


def test_delta_hand_case():
    # one coefficient, frames 0, 1, 4, 9, 16; K = 2, denominator 10
    static = np.array([[0.0], [1.0], [4.0], [9.0], [16.0]])
    # t=2: 1*(9-1) + 2*(16-0) = 40 -> 4.0
    # t=0: 1*(1-0) + 2*(4-0) = 9 -> 0.9 (edges replicated)
    delta = compute_delta(static, 2)
    assert delta[2, 0] == pytest.approx(4.0)
    assert delta[0, 0] == pytest.approx(0.9)


def test_delta_needs_enough_frames():
    with pytest.raises(ValueError, match="too few frames"):
        compute_delta(np.zeros((4, 16)), 2)


@pytest.mark.parametrize("freq", [80.0, 120.0, 200.0, 250.0, 350.0])
def test_f0_of_sine(freq):
    frame = sine(freq, 0.040, phase=0.3)
    assert estimate_f0(frame, RATE) == pytest.approx(freq, abs=2.0)


def test_f0_unvoiced_for_noise_and_silence():
    rng = np.random.default_rng(5)
    assert estimate_f0(rng.standard_normal(640), RATE) == 0.0
    assert estimate_f0(np.zeros(640), RATE) == 0.0


def test_f0_frame_must_hold_two_low_periods():
    with pytest.raises(ValueError, match="two periods"):
        estimate_f0(np.zeros(480), RATE)


def _buffer(signal):
    return AudioBuffer.from_float(signal, RATE)


def test_acoustic_features_shape():
    obs = acoustic_features(_buffer(sine(200, 0.5)))
    assert obs.dim == 32
    assert len(obs) == (8000 - 480) // 80 + 1


def test_single_segment_duration_is_utterance_duration():
    audio = _buffer(sine(200, 0.5))
    n = len(frame_tracks(audio))
    (vec,) = prosodic_features(audio, [0, n])
    assert vec.duration == pytest.approx(n * DEFAULT_FEATURES.frame_hop)
    assert vec.speaking_rate == pytest.approx(1 / vec.duration)


def test_two_equal_segments():
    audio = _buffer(sine(200, 0.505))  # 96 frames
    n = len(frame_tracks(audio))
    half = n // 2
    assert 2 * half == n
    first, second = prosodic_features(audio, [0, half, n])
    total = n * DEFAULT_FEATURES.frame_hop
    assert first.duration == pytest.approx(total / 2)
    assert second.duration == pytest.approx(total / 2)
    assert first.speaking_rate == pytest.approx(2 / total)


def test_segment_f0_means_follow_the_generator():
    # frames whose pitch window straddles the switch blend both tones, so
    # keep the segments long
    signal = np.concatenate([sine(200, 1.0), sine(300, 1.0)])
    audio = _buffer(signal)
    n = len(frame_tracks(audio))
    half = n // 2
    low, high = prosodic_features(audio, [0, half, n])
    assert low.f0_mean == pytest.approx(200, abs=5)
    assert high.f0_mean == pytest.approx(300, abs=5)
    assert abs(low.f0_slope) < 50


def test_louder_segment_has_higher_energy():
    signal = np.concatenate([sine(200, 0.3, amplitude=0.1), sine(200, 0.3, amplitude=0.4)])
    audio = _buffer(signal)
    n = len(frame_tracks(audio))
    quiet, loud = prosodic_features(audio, [0, n // 2, n])
    # amplitude x4 -> power x16
    assert loud.log_energy_mean - quiet.log_energy_mean == pytest.approx(np.log(16), abs=0.2)


def test_boundaries_must_cover_the_utterance():
    audio = _buffer(sine(200, 0.3))
    n = len(frame_tracks(audio))
    with pytest.raises(ValueError, match="cover"):
        prosodic_features(audio, [0, n - 1])
    with pytest.raises(ValueError, match="empty segment"):
        prosodic_features(audio, [0, 10, 10, n])


def test_tracks_align_with_acoustic_frames():
    audio = _buffer(sine(150, 0.7))
    assert len(frame_tracks(audio)) == len(acoustic_features(audio))


def test_pitch_window_config_is_respected():
    audio = _buffer(sine(220, 0.3))
    tracks = frame_tracks(audio, FeatureConfig(pitch_window=0.05))
    voiced = tracks.f0[tracks.f0 > 0]
    assert np.median(voiced) == pytest.approx(220, abs=2)
