import numpy as np
import pytest

from dar.codebook import make_codebook
from dar.harness.checks import randomize
from dar.model import ModelConfig, init_model
from dar.presets import TINY_4D_MODEL, TINY_MODEL


def tiny_params(cfg: ModelConfig = TINY_4D_MODEL, seed: int = 0, dtype=np.float64, random_ada: bool = True):
    """A small model with AdaLN and biases moved off their zero init."""
    params = init_model(cfg, make_codebook(cfg.vocab_size, cfg.code_dim, seed), seed=seed, dtype=dtype)
    if random_ada:
        randomize(params, np.random.default_rng(seed + 1))
    return params


@pytest.fixture
def tiny4d():
    return tiny_params(TINY_4D_MODEL)


@pytest.fixture
def tiny2d():
    return tiny_params(TINY_MODEL)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
