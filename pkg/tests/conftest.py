import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("dare", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("dare")


def random_psd(rng, d, rank=None):
    G = rng.standard_normal((d, d if rank is None else rank))
    return G @ G.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion -> (passed, detail), filled by test_acceptance
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            ok, detail = ACCEPTANCE_LINES[key]
            terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
