import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile

from svclab.features import (AudioClip, AudioError, F0Config, F0Contour, FeatureError, LOG_FLOOR,
                             MelConfig, MelSpectrogram, PPGError, PPGSequence, add_white_noise,
                             align_features, compute_mel, extract_f0, griffin_lim, load_audio,
                             load_external_ppg, make_synthetic_ppg, read_features, resample_ppg,
                             save_audio, write_features)
from svclab.features.mel import frame_signal, hann, mel_filterbank
from svclab.features.pitch import frame_nccf
from svclab.evaluation import snr_with_reference

from conftest import SR, sine


# -- load_audio ------------------------------------------------------------

def test_load_silence(tmp_path):
    path = tmp_path / "silence.wav"
    wavfile.write(path, SR, np.zeros(SR, dtype=np.int16))
    clip = load_audio(path)
    assert len(clip) == 24000 and clip.sample_rate == 24000
    assert np.all(clip.samples == 0)


def test_load_resamples_48k(tmp_path):
    path = tmp_path / "hi.wav"
    t = np.arange(48000 * 2) / 48000
    wavfile.write(path, 48000, (0.3 * np.sin(2 * np.pi * 300 * t) * 32767).astype(np.int16))
    clip = load_audio(path, 24000)
    assert abs(len(clip) - 48000) <= 1


def test_full_scale_square_normalized(tmp_path):
    path = tmp_path / "square.wav"
    square = np.where((np.arange(SR) // 50) % 2 == 0, 32767, -32768).astype(np.int16)
    wavfile.write(path, SR, square)
    clip = load_audio(path)
    assert np.max(np.abs(clip.samples)) == pytest.approx(0.95, abs=1e-12)


def test_quiet_audio_left_alone(tmp_path):
    path = tmp_path / "quiet.wav"
    wavfile.write(path, SR, (0.25 * np.ones(100) * 32767).astype(np.int16))
    assert np.max(load_audio(path).samples) == pytest.approx(0.25, abs=1e-4)


def test_stereo_downmix(tmp_path):
    path = tmp_path / "stereo.wav"
    data = np.stack([np.full(1000, 0.5), np.full(1000, 0.1)], axis=1).astype(np.float32)
    wavfile.write(path, SR, data)
    assert np.allclose(load_audio(path).samples, 0.3, atol=1e-6)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav file at all")
    with pytest.raises(AudioError):
        load_audio(bad)
    empty = tmp_path / "empty.wav"
    wavfile.write(empty, SR, np.zeros(0, dtype=np.int16))
    with pytest.raises(AudioError):
        load_audio(empty)
    with pytest.raises(FileNotFoundError):
        load_audio(tmp_path / "missing.wav")


def test_wav_roundtrip_16bit(tmp_path):
    clip = sine(220, 0.5, amp=0.4)
    save_audio(tmp_path / "x.wav", clip)
    sr, data = wavfile.read(tmp_path / "x.wav")
    assert sr == SR and data.dtype == np.int16
    assert np.max(np.abs(load_audio(tmp_path / "x.wav").samples - clip.samples)) < 1e-4


def test_clip_invariants():
    with pytest.raises(AudioError):
        AudioClip(np.array([0.0, 1.5]))
    with pytest.raises(AudioError):
        AudioClip(np.array([0.0, np.nan]))
    with pytest.raises(AudioError):
        AudioClip(np.zeros(4), sample_rate=0)


# -- compute_mel -----------------------------------------------------------

def test_mel_frame_count():
    mel = compute_mel(sine(440))
    assert mel.frames.shape == (80, 80)
    assert len(compute_mel(AudioClip(np.zeros(24001)))) == 81


def test_mel_silence_is_floor():
    mel = compute_mel(AudioClip(np.zeros(SR)))
    assert np.all(mel.frames == np.float32(np.log(LOG_FLOOR)))


def test_mel_sine_peak_band_matches_dft_oracle():
    clip = sine(440, amp=0.5)  # -6 dBFS
    mel = compute_mel(clip)
    # oracle: direct (non-FFT) DFT of one interior frame, projected on the filterbank
    frame = frame_signal(clip.samples, 300, 1200)[40] * hann(1200)
    n = np.arange(1200)
    k = np.arange(601)[:, None]
    dft = np.abs(np.sum(frame[None, :] * np.exp(-2j * np.pi * k * n / 1200), axis=1))
    oracle_band = int(np.argmax(mel_filterbank(SR, 1200, 80) @ dft))
    # band whose triangle responds most to 440 Hz
    fb = mel_filterbank(SR, 1200, 80)
    assert fb[:, 22].argmax() == oracle_band  # bin 22 = 440 Hz at 20 Hz resolution
    assert np.all(mel.frames.argmax(axis=1) == oracle_band)


def test_mel_deterministic_and_finite(rng):
    clip = AudioClip(np.clip(0.1 * rng.standard_normal(SR // 2), -1, 1))
    a, b = compute_mel(clip), compute_mel(clip)
    assert np.array_equal(a.frames, b.frames)
    assert np.all(np.isfinite(a.frames)) and np.all(a.frames >= np.float32(np.log(LOG_FLOOR)))


def test_mel_errors():
    with pytest.raises(AudioError):
        compute_mel(AudioClip(np.zeros(0)))
    with pytest.raises(AudioError):
        compute_mel(AudioClip(np.zeros(100)))
    with pytest.raises(ValueError):
        MelConfig(hop=400, win=300)


# -- extract_f0 ------------------------------------------------------------

def test_f0_sine_220():
    f0 = extract_f0(sine(220))
    assert len(f0) == 80
    inner = slice(2, -2)
    assert np.all(f0.voicing[inner] == 1)
    assert abs(np.median(f0.hz[f0.voicing > 0]) - 220.0) <= 2.0


@pytest.mark.parametrize("freq", [80.0, 330.0, 880.0])
def test_f0_other_frequencies(freq):
    f0 = extract_f0(sine(freq, 0.5, amp=0.3))
    assert abs(np.median(f0.hz[f0.voicing > 0]) - freq) / freq < 0.01


def test_f0_white_noise_mostly_unvoiced(rng):
    noise = AudioClip(np.clip(0.2 * rng.standard_normal(SR), -1, 1))
    assert extract_f0(noise).voicing.mean() < 0.2


def test_f0_silence():
    f0 = extract_f0(AudioClip(np.zeros(SR)))
    assert np.all(f0.voicing == 0) and np.all(f0.log_f0 == 0)


def test_f0_matches_mel_frames():
    clip = sine(300, 0.77)
    assert len(extract_f0(clip)) == len(compute_mel(clip))


def test_nccf_matches_direct_sum(rng):
    frames = rng.standard_normal((3, 200))
    fast = frame_nccf(frames, 40)
    for i in range(3):
        x = frames[i]
        for k in (0, 1, 17, 40):
            a, b = x[:200 - k], x[k:]
            assert fast[i, k] == pytest.approx(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)), abs=1e-10)


def test_f0_contour_coupling():
    with pytest.raises(ValueError):
        F0Contour(np.array([5.0, 0.0]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        F0Contour(np.array([5.0, 0.0]), np.array([1.0, 1.0]))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(70.0, 900.0))
def test_f0_voicing_coupling_property(seed, freq):
    rng = np.random.default_rng(seed)
    t = np.arange(SR // 4) / SR
    samples = 0.3 * np.sin(2 * np.pi * freq * t) * (rng.random() > 0.3) + 0.05 * rng.standard_normal(t.size)
    f0 = extract_f0(AudioClip(np.clip(samples, -1, 1)))
    unvoiced = f0.voicing == 0
    assert np.all(f0.log_f0[unvoiced] == 0)
    voiced_hz = f0.hz[~unvoiced]
    assert np.all((voiced_hz >= 65.0) & (voiced_hz <= 1000.0))


# -- PPG -------------------------------------------------------------------

def test_synthetic_ppg_single_phone():
    ppg = make_synthetic_ppg([(0, 5)], ppg_dim=4)
    assert ppg.probs.shape == (5, 4)
    assert np.all(ppg.probs == ppg.probs[0])
    assert ppg.probs[0].sum() == pytest.approx(1.0, abs=1e-6)
    assert ppg.probs[0, 0] == pytest.approx(0.85, abs=1e-6)


def test_synthetic_ppg_argmax_sequence():
    ppg = make_synthetic_ppg([(1, 2), (2, 3)], ppg_dim=8)
    assert len(ppg) == 5
    assert list(ppg.probs.argmax(axis=1)) == [1, 1, 2, 2, 2]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 63), st.integers(1, 30)), min_size=1, max_size=10))
def test_synthetic_ppg_rows_stochastic(track):
    ppg = make_synthetic_ppg(track, ppg_dim=64)
    sums = ppg.probs.astype(np.float64).sum(axis=1)
    assert np.all(np.abs(sums - 1.0) <= 1e-6)
    assert np.all(ppg.probs >= 0)


def test_synthetic_ppg_errors():
    with pytest.raises(PPGError):
        make_synthetic_ppg([(4, 2)], ppg_dim=4)
    with pytest.raises(PPGError):
        make_synthetic_ppg([(0, 0)], ppg_dim=4)


def _external(tmp_path, probs, name="ppg.npz"):
    path = tmp_path / name
    np.savez(path, ppg=probs)
    return path


def test_external_ppg_full_width(tmp_path, rng):
    probs = rng.random((100, 1467))
    probs /= probs.sum(axis=1, keepdims=True)
    ppg = load_external_ppg(_external(tmp_path, probs), ppg_dim=1467)
    assert ppg.dim == 1467 and len(ppg) == 100


def test_external_ppg_renormalizes_small_drift(tmp_path):
    probs = np.full((10, 4), 1.0005 / 4)
    ppg = load_external_ppg(_external(tmp_path, probs), ppg_dim=4)
    assert np.allclose(ppg.probs.astype(np.float64).sum(axis=1), 1.0, atol=1e-6)


def test_external_ppg_rejects(tmp_path):
    with pytest.raises(PPGError):
        load_external_ppg(_external(tmp_path, np.full((10, 4), 0.5 / 4)), ppg_dim=4)
    with pytest.raises(PPGError, match="expected 8"):
        load_external_ppg(_external(tmp_path, np.full((10, 4), 0.25), "b.npz"), ppg_dim=8)
    np.savez(tmp_path / "c.npz", other=np.zeros(3))
    with pytest.raises(PPGError):
        load_external_ppg(tmp_path / "c.npz")


def test_resample_ppg_preserves_simplex():
    ppg = make_synthetic_ppg([(0, 10), (3, 10)], ppg_dim=8)
    out = resample_ppg(ppg, 45)
    assert len(out) == 45
    assert np.allclose(out.probs.astype(np.float64).sum(axis=1), 1.0, atol=1e-6)
    assert out.probs[0].argmax() == 0 and out.probs[-1].argmax() == 3


# -- align_features / archive ----------------------------------------------

def _streams(n_ppg, n_f0, n_mel, P=8, M=80):
    ppg = make_synthetic_ppg([(1, n_ppg)], P)
    f0 = F0Contour.from_hz(np.full(n_f0, 200.0))
    mel = MelSpectrogram(np.zeros((n_mel, M)))
    return ppg, f0, mel


@pytest.mark.parametrize("lengths,expected", [((100, 100, 100), 100), ((101, 100, 102), 100)])
def test_align_min_rule(lengths, expected):
    utt = align_features(*_streams(*lengths), singer=0)
    assert utt.frames == expected
    assert len(utt.ppg) == len(utt.f0) == len(utt.mel) == len(utt.stop_targets) == expected
    assert utt.stop_targets[-1] == 1 and utt.stop_targets[:-1].sum() == 0


def test_align_mismatch_guard():
    with pytest.raises(FeatureError):
        align_features(*_streams(90, 100, 100), singer=0)


def _utterance(rng, T=37, P=8, M=80, singer=3):
    probs = rng.random((T, P))
    hz = np.where(rng.random(T) > 0.3, rng.uniform(100, 500, T), 0.0)
    return align_features(PPGSequence(probs / probs.sum(axis=1, keepdims=True)), F0Contour.from_hz(hz),
                          MelSpectrogram(rng.standard_normal((T, M))), singer)


def test_archive_roundtrip(tmp_path, rng):
    utt = _utterance(rng)
    write_features(utt, tmp_path / "u")
    back = read_features(tmp_path / "u")
    assert np.array_equal(back.ppg.probs, utt.ppg.probs)
    assert np.array_equal(back.f0.log_f0, utt.f0.log_f0)
    assert np.array_equal(back.f0.voicing, utt.f0.voicing)
    assert np.array_equal(back.mel.frames, utt.mel.frames)
    assert np.array_equal(back.stop_targets, utt.stop_targets)
    assert back.singer == utt.singer and back.sample_rate == utt.sample_rate
    meta = json.loads((tmp_path / "u" / "meta.json").read_text())
    assert {"frames", "n_mels", "ppg_dim", "singer_id", "sample_rate", "hop"} <= set(meta)
    raw = np.fromfile(tmp_path / "u" / "mel.f32", dtype="<f4")
    assert raw.size == 37 * 80


def test_archive_corrupt_frame_count(tmp_path, rng):
    write_features(_utterance(rng), tmp_path / "u")
    meta_path = tmp_path / "u" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["frames"] += 1
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(FeatureError):
        read_features(tmp_path / "u")


def test_archive_wrong_ppg_dim(tmp_path, rng):
    write_features(_utterance(rng, P=8), tmp_path / "u")
    with pytest.raises(FeatureError, match="expected P=1467.*P=8"):
        read_features(tmp_path / "u", ppg_dim=1467)


def test_archive_missing_array(tmp_path, rng):
    write_features(_utterance(rng), tmp_path / "u")
    (tmp_path / "u" / "voicing.f32").unlink()
    with pytest.raises(FeatureError, match="voicing"):
        read_features(tmp_path / "u")


# -- noise -----------------------------------------------------------------

@pytest.mark.parametrize("target", [25.35, 15.30, 8.18])
def test_noise_levels(target):
    clean = sine(330, 1.0, amp=0.3)
    noisy = add_white_noise(clean, target, seed=7)
    assert abs(snr_with_reference(clean, noisy).snr_db - target) <= 0.1


def test_noise_infinite_is_identity():
    clean = sine(330, 0.5)
    assert np.array_equal(add_white_noise(clean, math.inf, seed=1).samples, clean.samples)


def test_noise_deterministic_and_silent_error():
    clean = sine(330, 0.5, amp=0.2)
    assert np.array_equal(add_white_noise(clean, 10, 3).samples, add_white_noise(clean, 10, 3).samples)
    assert not np.array_equal(add_white_noise(clean, 10, 3).samples, add_white_noise(clean, 10, 4).samples)
    with pytest.raises(AudioError):
        add_white_noise(AudioClip(np.zeros(100)), 10, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 40.0))
def test_noise_calibration_property(seed, target):
    rng = np.random.default_rng(seed)
    clean = AudioClip(0.2 * np.sin(2 * np.pi * rng.uniform(80, 800) * np.arange(4800) / SR)
                      + 0.02 * rng.standard_normal(4800))
    noisy = add_white_noise(clean, target, seed)
    assert abs(snr_with_reference(clean, noisy).snr_db - target) <= 0.1


# -- Griffin-Lim -----------------------------------------------------------

def test_griffin_lim_sine_peak():
    mel = compute_mel(sine(440, amp=0.5))
    audio = griffin_lim(mel, 32, seed=0)
    assert abs(len(audio) - len(mel) * 300) <= 300
    spectrum = np.abs(np.fft.rfft(audio.samples))
    peak = np.argmax(spectrum) * SR / len(audio)
    assert abs(peak - 440.0) <= 10.0


def test_griffin_lim_silence():
    mel = compute_mel(AudioClip(np.zeros(SR)))
    audio = griffin_lim(mel, 4)
    assert np.sqrt(np.mean(audio.samples ** 2)) < 1e-3


def test_griffin_lim_errors_and_determinism():
    mel = compute_mel(sine(300, 0.3))
    with pytest.raises(ValueError):
        griffin_lim(mel, 0)
    assert np.array_equal(griffin_lim(mel, 3, seed=5).samples, griffin_lim(mel, 3, seed=5).samples)
