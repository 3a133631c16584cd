import numpy as np
import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
