import pytest

from hipool.data import save_corpus, split
from hipool.experiments import overfit_fixture


@pytest.fixture
def overfit_corpus():
    return overfit_fixture(seed=0)


@pytest.fixture
def corpus_files(tmp_path, overfit_corpus):
    """The overfit fixture on disk plus an 8/1/1 split of it."""
    full = tmp_path / "fixture.jsonl"
    save_corpus(overfit_corpus, full)
    paths = {"full": full}
    for name, part in zip(("train", "dev", "test"), split(overfit_corpus, seed=0)):
        paths[name] = tmp_path / f"{name}.jsonl"
        save_corpus(part, paths[name])
    return paths


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line, then assert it."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {name} ({detail})")
        assert ok, f"criterion {number} {name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
