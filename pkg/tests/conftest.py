import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import crops, noise_image, textured_rgb  # noqa: E402

_acceptance_lines: list[str] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def source_rgb() -> np.ndarray:
    return textured_rgb()


@pytest.fixture(scope="session")
def crop_images(source_rgb):
    return crops(source_rgb)


@pytest.fixture(scope="session")
def noise_img():
    return noise_image()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def criterion():
    return record_criterion
