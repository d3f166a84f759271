from __future__ import annotations

from pathlib import Path

import pytest

SAMPLE_PROJECT = Path(__file__).resolve().parent.parent / "sample_project"


@pytest.fixture(scope="session")
def sample_project_dir() -> Path:
    return SAMPLE_PROJECT


@pytest.fixture(scope="session")
def trained_project():
    from baatcheet.engine import train_project

    return train_project(SAMPLE_PROJECT, seed=42)


@pytest.fixture(scope="session")
def model_archive(trained_project, tmp_path_factory):
    from baatcheet.engine import package_model

    path = tmp_path_factory.mktemp("models") / "model.tar.gz"
    package_model(trained_project, path)
    return path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    results: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            if results.get(name) != "FAIL":
                results[name] = verdict
    if results:
        terminalreporter.section("acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(f"[{results[name]}] {name}")
