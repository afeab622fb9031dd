import numpy as np
import pytest

from chromamix import dataset
from chromamix.audio_io import SAMPLE_RATE, AudioSegment, Stem


def sine(freq, seconds=1.0, rate=SAMPLE_RATE, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return amp * np.sin(2 * np.pi * freq * t + phase)


def seg(samples, song_id="x", stem=Stem.MIXTURE, offset_s=0.0):
    return AudioSegment(np.asarray(samples), SAMPLE_RATE, song_id, stem, offset_s)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """20 tonally diverse 12 s songs shared by the slower tests."""
    out = tmp_path_factory.mktemp("corpus")
    dataset.synth_corpus(dataset.default_corpus_spec(20, 12.0), out, seed=1)
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return dataset.load_manifest(corpus_dir / "manifest.jsonl")


@pytest.fixture(scope="session")
def pool(corpus):
    return dataset.SegmentPool(corpus)


# --- acceptance reporting ----------------------------------------------------

_acceptance_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        duration = getattr(report, "duration", 0.0)
        _acceptance_results[number] = (status, title, duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance_results):
        status, title, duration = _acceptance_results[number]
        terminalreporter.write_line(f"[{status}] AC{number:>2}: {title} ({duration:.1f} s)")
