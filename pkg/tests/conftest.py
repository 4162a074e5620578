import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


def record_criterion(number, label, passed, detail=""):
    ACCEPTANCE_RESULTS[number] = (label, passed, detail)
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {number:2d}] {status}  {label}  {detail}")
    assert passed, f"criterion {number} failed: {label} {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        label, passed, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"[criterion {number:2d}] {status}  {label}  {detail}")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
