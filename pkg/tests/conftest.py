import numpy as np
import pytest

from courier_har.datasets import build_arrays, load_corpus_windows
from courier_har.model import ClassifierConfig, EncoderConfig
from courier_har.synth import generate_corpus

# Small configs keep the per-op and per-module tests fast; the default
# full-scale config is exercised by the acceptance suite.
TINY_ENC = EncoderConfig(window_len=12, channels=6, layers=1,
                         attention_heads=2, hidden=8, feedforward=16)
TINY_CLF = ClassifierConfig(gru_hidden_sizes=(5, 4), num_classes=3)


@pytest.fixture(scope="session")
def tiny_enc_cfg():
    return TINY_ENC


@pytest.fixture(scope="session")
def tiny_clf_cfg():
    return TINY_CLF


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """Four synthetic delivery cycles on disk (ndjson + truth + manifest)."""
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(4, seed=3, out_dir=out)
    return out


@pytest.fixture(scope="session")
def small_windows(small_corpus_dir):
    return load_corpus_windows(small_corpus_dir)


@pytest.fixture(scope="session")
def small_arrays(small_windows):
    x, y, stats = build_arrays(small_windows, task="activity3")
    return x, y, stats


def rand_windows(n, length=12, channels=6, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.normal(size=(n, length, channels)).astype(np.float32)
