from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scaleform import shipped_scene  # noqa: E402
from scaleform.simulator import control_pipeline  # noqa: E402


@pytest.fixture(scope="session")
def shipped():
    return shipped_scene()


@pytest.fixture(scope="session")
def scene(shipped):
    return shipped.scene


@pytest.fixture(scope="session")
def pipeline(scene):
    """(decomposition, control scene, control Laplacian) of the shipped scene."""
    return control_pipeline(scene)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and assert on it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
