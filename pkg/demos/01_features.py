"""
Acoustic and prosodic features of a synthetic voice
===================================================

One sentence from one synthetic speaker, spoken neutrally and shouted.
We look at the 32-dimensional MFCC + delta frames the acoustic HMMs see,
then at the pitch and energy tracks that feed the suprasegmental layer.
"""

import numpy as np

from csphmm.corpus import make_voice, sentence_script, synthesize
from csphmm.features import acoustic_features, frame_tracks, segment_prosody

# a male voice and the script of sentence 0
voice = make_voice(0, "male", seed=7)
script = sentence_script(0, seed=7)
print(f"voice: base F0 {voice.base_f0:.0f} Hz, formants {np.round(voice.formant_profile).astype(int)}")
print("phones:", " ".join(p.kind[0] for p in script))

neutral = synthesize(voice, script, np.random.default_rng(1))
shouted = synthesize(voice, script, np.random.default_rng(1), shouted=True)
print(f"durations: neutral {neutral.duration:.2f} s, shouted {shouted.duration:.2f} s")

###############################################################################
# MFCC frames: 30 ms windows every 5 ms, c0..c15 plus deltas

obs = acoustic_features(neutral)
print("observation matrix:", obs.frames.shape)
print("mean static cepstrum (first 6):", np.round(obs.frames[:, :6].mean(axis=0), 2))

###############################################################################
# Pitch and energy, one value per acoustic frame (0 Hz = unvoiced)

for name, audio in (("neutral", neutral), ("shouted", shouted)):
    tracks = frame_tracks(audio)
    voiced = tracks.f0[tracks.f0 > 0]
    print(f"{name:8s} voiced {len(voiced) / len(tracks):.0%} of frames, "
          f"F0 median {np.median(voiced):.0f} Hz, "
          f"log energy mean {tracks.log_energy.mean():.2f}")

###############################################################################
# Prosody of three equal segments of the neutral take.  Each vector holds
# F0 mean, F0 slope, log-energy mean, duration and speaking rate.

tracks = frame_tracks(neutral)
third = len(tracks) // 3
for vec in segment_prosody(tracks, [0, third, 2 * third, len(tracks)]):
    print("  ", "  ".join(f"{k}={v:8.3f}" for k, v in vec._asdict().items()))
