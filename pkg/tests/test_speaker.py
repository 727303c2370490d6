import math

import numpy as np
import pytest

from csphmm.corpus import make_voice, sentence_script, synthesize
from csphmm.features import UtteranceFeatures
from csphmm.hmm import Kind
from csphmm.speaker import (
    IdentificationError,
    ModelConfig,
    Registry,
    SpeakerModel,
    UtteranceScore,
    Variant,
    enroll,
    identify,
    rank_scores,
    score_utterance,
)

FAST = ModelConfig(max_iters=6)


def test_variant_structure():
    assert (Variant.CSPHMM2.kind, Variant.CSPHMM2.order) == (Kind.CIRCULAR, 2)
    assert (Variant.LTRSPHMM1.kind, Variant.LTRSPHMM1.order) == (Kind.LEFT_TO_RIGHT, 1)
    assert Variant.CSPHMM1.acoustic_name == "CHMM1"


def test_enroll_builds_mirrored_models(voice_takes):
    model = enroll("spk01", "s1", Variant.CSPHMM2, voice_takes["spk01"][:5], FAST)
    for part in (model.acoustic, model.suprasegmental.hmm):
        assert (part.kind, part.order) == (Kind.CIRCULAR, 2)
        assert part.transitions.tensor.ndim == 3
    assert model.acoustic.num_states == 9
    assert model.suprasegmental.num_states == 3


def test_enroll_is_deterministic(voice_takes):
    a = enroll("spk01", "s1", Variant.LTRSPHMM2, voice_takes["spk01"][:5], FAST)
    b = enroll("spk01", "s1", Variant.LTRSPHMM2, voice_takes["spk01"][:5], FAST)
    assert a.dumps() == b.dumps()
    assert SpeakerModel.loads(a.dumps()).dumps() == a.dumps()


def test_enroll_rejects_empty_training_set():
    with pytest.raises(RuntimeError, match="no training utterances"):
        enroll("spk01", "s1", Variant.CSPHMM1, [], FAST)


def test_own_model_wins_on_held_out_takes():
    seeds_ok = 0
    seeds = range(4)
    for seed in seeds:
        script = sentence_script(1, seed)
        voices = [make_voice(0, "female", seed), make_voice(1, "female", seed)]
        models, held = {}, {}
        for v in voices:
            rng = np.random.default_rng([seed, 77, int(v.base_f0)])
            utts = [UtteranceFeatures.from_audio(synthesize(v, script, rng)) for _ in range(9)]
            models[v.speaker_id] = enroll(v.speaker_id, "s2", Variant.LTRSPHMM1, utts[:5], FAST)
            held[v.speaker_id] = utts[5:]
        ok = all(rank_scores(score_utterance(u, models), 0.5).winner == spk
                 for spk, utts in held.items() for u in utts)
        seeds_ok += ok
    assert seeds_ok / len(seeds) >= 0.95


@pytest.fixture(scope="module")
def registry(voice_takes):
    reg = Registry()
    for spk, takes in voice_takes.items():
        reg.add(enroll(spk, "s1", Variant.CSPHMM1, takes[:5], FAST))
    return reg


def test_identify_enrolled_speakers(registry, voice_takes):
    for spk, takes in voice_takes.items():
        for utt in takes[5:]:
            assert identify(utt, "s1", Variant.CSPHMM1, 0.5, registry).winner == spk


def test_singleton_registry_always_wins(voice_takes):
    reg = Registry()
    reg.add(enroll("spk03", "s1", Variant.LTRSPHMM1, voice_takes["spk03"][:5], FAST))
    for utt in voice_takes["spk01"][5:]:
        result = identify(utt, "s1", Variant.LTRSPHMM1, 0.5, reg)
        assert result.winner == "spk03"
        assert result.margin is None


def test_unknown_sentence_or_variant(registry, voice_takes):
    utt = voice_takes["spk01"][5]
    with pytest.raises(IdentificationError, match="no CSPHMM1 models"):
        identify(utt, "s9", Variant.CSPHMM1, 0.5, registry)
    with pytest.raises(IdentificationError):
        identify(utt, "s1", Variant.LTRSPHMM2, 0.5, registry)


def test_hand_set_scores_margin():
    scores = {"A": UtteranceScore(-100.0, -20.0, 50, 3), "B": UtteranceScore(-110.0, -16.0, 50, 3)}
    result = rank_scores(scores, 0.5)
    # A: -60, B: -63
    assert result.winner == "A"
    assert result.margin == pytest.approx(3.0)
    assert not result.tie
    # prosody alone prefers B
    assert rank_scores(scores, 1.0).winner == "B"


def test_alpha_zero_is_acoustic_argmax(registry, voice_takes):
    for utt in voice_takes["spk02"][5:]:
        scores = score_utterance(utt, registry.models("s1", Variant.CSPHMM1))
        best = max(scores, key=lambda s: scores[s].acoustic_logp)
        assert rank_scores(scores, 0.0).winner == best


def test_exact_tie_goes_to_smallest_id():
    s = UtteranceScore(-10.0, -5.0, 10, 2)
    result = rank_scores({"spk09": s, "spk02": s, "spk05": UtteranceScore(-50, -50, 10, 2)}, 0.5)
    assert result.winner == "spk02"
    assert result.tie and result.margin == 0.0


def test_ranking_ignores_registry_order():
    rng = np.random.default_rng(0)
    scores = {f"spk{i:02d}": UtteranceScore(*rng.uniform(-100, -1, 2), 10, 3) for i in range(8)}
    expected = [spk for spk, _ in rank_scores(scores, 0.3).ranked]
    for _ in range(5):
        keys = list(scores)
        rng.shuffle(keys)
        shuffled = {k: scores[k] for k in keys}
        assert [spk for spk, _ in rank_scores(shuffled, 0.3).ranked] == expected


def test_unscorable_utterance():
    scores = {"A": UtteranceScore(-math.inf, -1.0, 10, 2), "B": UtteranceScore(-math.inf, -2.0, 10, 2)}
    with pytest.raises(IdentificationError, match="unscorable"):
        rank_scores(scores, 0.5)
    # alpha = 1 ignores the acoustic stream entirely
    assert rank_scores(scores, 1.0).winner == "A"


def test_normalized_fusion_uses_per_frame_and_per_segment_scores():
    scores = {"A": UtteranceScore(-1000.0, -30.0, 100, 3), "B": UtteranceScore(-900.0, -60.0, 100, 3)}
    fused = dict(rank_scores(scores, 0.5, normalize=True).ranked)
    assert fused["A"].fused == pytest.approx(0.5 * -10 + 0.5 * -10)
    assert fused["B"].fused == pytest.approx(0.5 * -9 + 0.5 * -20)


def test_registry_persists_and_reloads(tmp_path, registry):
    disk = Registry(tmp_path)
    for model in registry.models("s1", Variant.CSPHMM1).values():
        disk.add(model)
    assert (tmp_path / "index.json").exists()
    assert (tmp_path / "models/CSPHMM1/s1/spk02.json").exists()
    loaded = Registry.load(tmp_path)
    assert loaded.speakers("s1", "CSPHMM1") == ["spk01", "spk02", "spk03"]
    for spk, model in registry.models("s1", Variant.CSPHMM1).items():
        assert loaded.models("s1", Variant.CSPHMM1)[spk].dumps() == model.dumps()
    assert not list(tmp_path.rglob(".*"))  # no temporary files left behind


def test_model_variant_mismatch_is_rejected(registry):
    model = registry.models("s1", Variant.CSPHMM1)["spk01"]
    with pytest.raises(ValueError, match="CSPHMM2"):
        SpeakerModel("spk01", "s1", Variant.CSPHMM2, model.acoustic, model.suprasegmental)
