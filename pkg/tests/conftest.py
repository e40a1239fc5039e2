"""Shared fixtures sized so the whole unit suite stays fast.

The expensive artifacts (a small labeled corpus and detectors trained on
it) are built once per session and reused across modules.
"""

import pytest

from cerealia.corpus import DEFAULT_WINDOW, corpus_series
from cerealia.detect import NeuralDetectorConfig, train_neural, train_stat
from cerealia.faults import DatasetConfig, build_labeled_dataset
from cerealia.ingest import synth_generate
from cerealia.corpus import default_synth_config

# 48 + 199 * 24 samples: exactly 200 sliding windows under the default spec
TINY_CORPUS_SAMPLES = DEFAULT_WINDOW.length + 199 * DEFAULT_WINDOW.stride


@pytest.fixture(scope="session")
def synth_series():
    return synth_generate(default_synth_config(), 1000, seed=42)


@pytest.fixture(scope="session")
def tiny_corpus():
    return corpus_series(3, TINY_CORPUS_SAMPLES)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_corpus):
    config = DatasetConfig(pct_inconsistent=25.0, window=DEFAULT_WINDOW, seed=3)
    return build_labeled_dataset(tiny_corpus, config)


@pytest.fixture(scope="session")
def stat_detector(tiny_dataset):
    detector, report = train_stat(tiny_dataset)
    return detector, report


@pytest.fixture(scope="session")
def neural_detector(tiny_dataset):
    config = NeuralDetectorConfig(max_epochs=20, patience=3, seed=0)
    detector, report = train_neural(tiny_dataset, config)
    return detector, report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
