import logging
import wave

import numpy as np
import pytest

from csphmm.audio import AudioBuffer, WavFormatError, read_wav, write_wav
from csphmm.corpus import (
    CorpusError,
    ShoutTransform,
    SynthConfig,
    ingest_corpus,
    make_voice,
    synth_corpus,
    voices_for,
)
from csphmm.features import frame_tracks

SMALL = {("neutral", "train"): 2, ("neutral", "test"): 1, ("shouted", "test"): 1}


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_same_seed_gives_identical_corpora(tmp_path):
    a = synth_corpus(tmp_path / "a", 3, 2, seed=5, takes=SMALL)
    b = synth_corpus(tmp_path / "b", 3, 2, seed=5, takes=SMALL)
    assert len(a) == len(b) == 3 * 2 * 4
    assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")
    c = synth_corpus(tmp_path / "c", 3, 2, seed=6, takes=SMALL)
    assert _tree_bytes(tmp_path / "c") != _tree_bytes(tmp_path / "a")
    assert len(c) == len(a)


def test_protocol_counts_per_speaker_and_sentence(tmp_path):
    manifest = synth_corpus(tmp_path, 2, 1, seed=1)
    assert len(manifest) == 2 * (5 + 4 + 9)
    assert ingest_corpus(tmp_path, protocol=True).entries == manifest.entries


def test_every_voice_is_distinct():
    voices = voices_for(10, seed=3)
    assert len({(v.base_f0, v.formant_profile) for v in voices}) == 10
    assert {v.gender for v in voices} == {"male", "female"}


def _mean_f0_and_rms(audio):
    tracks = frame_tracks(audio)
    voiced = tracks.f0[tracks.f0 > 0]
    return voiced.mean(), np.sqrt(np.mean(audio.as_float() ** 2))


def test_shout_raises_pitch_and_energy(tmp_path):
    manifest = synth_corpus(tmp_path, 4, 2, seed=9, takes={("neutral", "test"): 1,
                                                            ("shouted", "test"): 1})
    for spk in manifest.speakers:
        for sent in manifest.sentences:
            (neutral,) = manifest.select(speaker=spk, sentence=sent, environment="neutral")
            (shouted,) = manifest.select(speaker=spk, sentence=sent, environment="shouted")
            f0_n, rms_n = _mean_f0_and_rms(read_wav(manifest.resolve(neutral)))
            f0_s, rms_s = _mean_f0_and_rms(read_wav(manifest.resolve(shouted)))
            assert f0_s > f0_n
            assert rms_s > rms_n
            assert read_wav(manifest.resolve(shouted)).duration < \
                read_wav(manifest.resolve(neutral)).duration


def test_shout_transform_must_be_a_shout():
    with pytest.raises(ValueError):
        ShoutTransform(f0_scale=0.9)
    with pytest.raises(ValueError):
        ShoutTransform(energy_gain_db=-3)
    with pytest.raises(ValueError):
        ShoutTransform(duration_scale=1.2)
    assert make_voice(0, "male", 1, ShoutTransform(f0_scale=2.0)).shout_transform.f0_scale == 2.0


def test_synth_needs_two_speakers(tmp_path):
    with pytest.raises(ValueError):
        synth_corpus(tmp_path, 1, 1)


def test_synth_config_changes_the_audio(tmp_path):
    quiet = synth_corpus(tmp_path / "q", 2, 1, seed=2, takes={("shouted", "test"): 1},
                         config=SynthConfig(shout=ShoutTransform(energy_gain_db=3)))
    loud = synth_corpus(tmp_path / "l", 2, 1, seed=2, takes={("shouted", "test"): 1})
    e_quiet = read_wav(quiet.resolve(quiet.entries[0])).as_float()
    e_loud = read_wav(loud.resolve(loud.entries[0])).as_float()
    assert np.sqrt(np.mean(e_loud ** 2)) > np.sqrt(np.mean(e_quiet ** 2))


@pytest.fixture
def small_corpus(tmp_path):
    root = tmp_path / "corpus"
    synth_corpus(root, 2, 1, seed=4, takes={("neutral", "train"): 3, ("neutral", "test"): 1,
                                            ("shouted", "test"): 1})
    return root


def test_round_trip_ingest_is_clean(small_corpus, caplog):
    with caplog.at_level(logging.WARNING):
        manifest = ingest_corpus(small_corpus)
    assert len(manifest) == 10
    assert not caplog.records


def test_empty_manifest(small_corpus):
    (small_corpus / "manifest.csv").write_text(
        "path,speaker,gender,sentence,environment,session,take\n")
    with pytest.raises(CorpusError, match="no entries"):
        ingest_corpus(small_corpus)


def test_one_bad_path_is_itemized(small_corpus):
    lines = (small_corpus / "manifest.csv").read_text().splitlines()
    assert len(lines) == 11
    lines[4] = lines[4].replace(".wav", "_gone.wav")
    (small_corpus / "manifest.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusError) as info:
        ingest_corpus(small_corpus)
    assert len(info.value.problems) == 1
    bad = lines[4].split(",")[0]
    assert info.value.problems[0] == f"missing file: {bad}"


def test_duplicate_key_and_bad_header(small_corpus):
    lines = (small_corpus / "manifest.csv").read_text().splitlines()
    lines.append(lines[1])
    (small_corpus / "manifest.csv").write_text("\n".join(lines) + "\n")
    stereo = small_corpus / lines[2].split(",")[0]
    with wave.open(str(stereo), "wb") as handle:
        handle.setnchannels(2)
        handle.setsampwidth(2)
        handle.setframerate(16000)
        handle.writeframes(b"\x00" * 400)
    with pytest.raises(CorpusError) as info:
        ingest_corpus(small_corpus)
    problems = sorted(info.value.problems)
    assert len(problems) == 2
    assert problems[0].startswith("bad header: " + lines[2].split(",")[0])
    assert problems[1].startswith("duplicate key")


def test_protocol_mode_flags_counts(small_corpus):
    with pytest.raises(CorpusError, match="expected 5"):
        ingest_corpus(small_corpus, protocol=True)


def test_bad_manifest_header(small_corpus):
    (small_corpus / "manifest.csv").write_text("file,who\nx.wav,a\n")
    with pytest.raises(CorpusError, match="manifest header"):
        ingest_corpus(small_corpus)


def test_wav_round_trip(tmp_path):
    samples = (np.arange(-500, 500) * 30).astype(np.int16)
    write_wav(tmp_path / "x.wav", AudioBuffer(samples, 16000))
    back = read_wav(tmp_path / "x.wav")
    assert back.sample_rate == 16000
    np.testing.assert_array_equal(back.samples, samples)
    assert back.duration == pytest.approx(1000 / 16000)


def test_wav_must_be_16_bit(tmp_path):
    path = tmp_path / "x8.wav"
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(1)
        handle.setframerate(16000)
        handle.writeframes(b"\x80" * 100)
    with pytest.raises(WavFormatError, match="16-bit"):
        read_wav(path)


def test_other_sample_rates_warn(tmp_path, caplog):
    write_wav(tmp_path / "x.wav", AudioBuffer(np.zeros(800, dtype=np.int16), 8000))
    with caplog.at_level(logging.WARNING):
        assert read_wav(tmp_path / "x.wav").sample_rate == 8000
    assert "16 kHz" in caplog.text
