import numpy as np
import pytest

from csphmm.corpus import make_voice, sentence_script, synthesize
from csphmm.features import UtteranceFeatures


@pytest.fixture(scope="session")
def voice_takes():
    """Features of 9 neutral takes of one sentence by each of three voices."""
    script = sentence_script(0, 42)
    takes = {}
    for index, gender in enumerate(("male", "female", "male")):
        voice = make_voice(index, gender, 42)
        rng = np.random.default_rng([42, index])
        takes[voice.speaker_id] = [UtteranceFeatures.from_audio(synthesize(voice, script, rng))
                                   for _ in range(9)]
    return takes


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
