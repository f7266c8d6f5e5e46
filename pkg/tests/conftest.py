import json
from pathlib import Path

import pytest

from ragprobe.config import ExperimentConfig
from ragprobe.corpus import Chunk, Example
from ragprobe.synthetic import make_records

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="data.json"):
        path = tmp_path / name
        path.write_text(json.dumps(obj), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def single_support_path(write_json):
    return write_json(make_records(20, seed=0), "single.json")


@pytest.fixture
def two_support_path(write_json):
    return write_json(make_records(12, seed=1, both_supports_retrieved=True), "double.json")


@pytest.fixture
def stub_config(tmp_path):
    def _config(dataset, stub="default", **kw):
        kw.setdefault("cache_dir", str(tmp_path / "cache"))
        kw.setdefault("out_dir", str(tmp_path / "out"))
        return ExperimentConfig(dataset=str(dataset), stub=stub, **kw)

    return _config


def make_chunks(titles):
    return [Chunk(f"ctx_{i}", t, f"text about {t}") for i, t in enumerate(titles)]


def make_example(titles, gold, answer="Gold Answer", question="Which one?", eid="ex0"):
    return Example(
        id=eid,
        question=question,
        gold_answer=answer,
        gold_support_titles=frozenset(gold),
        candidates=tuple((t, (f"text about {t}",)) for t in titles),
    )


_CRITERIA: dict[str, tuple[int, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _CRITERIA[report.nodeid] = (number, title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_CRITERIA.values()):
        terminalreporter.write_line(f"AC{number:<2} {outcome}  {title}")
