import numpy as np
import pytest
import torch

from decseg.datakit import SceneSpec, generate_toy_dataset
from decseg.taxonomy import cityscapes_taxonomy, preset_strategy

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def tax():
    return cityscapes_taxonomy()


@pytest.fixture(scope="session")
def bvht(tax):
    return preset_strategy("B+V+H+T", tax)


@pytest.fixture(scope="session")
def toy_small(tax):
    """Eight 32x32 labelled scenes."""
    return generate_toy_dataset(SceneSpec(32, 32, seed=11, tag="small"), 8, tax)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_labels(rng, shape, n_classes=19, ignore_frac=0.1, ignore_id=255):
    y = rng.integers(0, n_classes, size=shape).astype(np.uint8)
    y[rng.random(shape) < ignore_frac] = ignore_id
    return y


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
