import numpy as np
import pytest

from fixtures_voices import VOICE_A, VOICE_B, voice_clip

from podforge.codec import Codebook, train_codebook


@pytest.fixture(scope="session")
def voice_corpus():
    """Mixed-voice clips for codec training; ~3200 pooled frames."""
    clips = [voice_clip(VOICE_A, 8.0, seed) for seed in range(10)]
    clips += [voice_clip(VOICE_B, 8.0, 50 + seed) for seed in range(6)]
    return clips


@pytest.fixture(scope="session")
def codebook_1024(voice_corpus) -> Codebook:
    return train_codebook(voice_corpus, k=1024, seed=7)


@pytest.fixture(scope="session")
def codebook_16(voice_corpus) -> Codebook:
    return train_codebook(voice_corpus, k=16, seed=7)


@pytest.fixture(scope="session")
def held_out_clips():
    return [voice_clip(VOICE_A, 6.0, 900), voice_clip(VOICE_B, 6.0, 901)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
