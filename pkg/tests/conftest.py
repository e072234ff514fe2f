import pytest

from expunge.accumulator import AccumulatorParams, setup
from expunge.crypto import generate_keyring

#: Detail strings the acceptance tests file for the terminal summary.
ACCEPTANCE_NOTES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                rows.append((nodeid.split("::")[-1], outcome == "passed"))
    if not rows:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, passed in sorted(rows):
        note = ACCEPTANCE_NOTES.get(name, "")
        suffix = f"  ({note})" if note else ""
        terminalreporter.write_line(
            f"  {'PASS' if passed else 'FAIL'}  {name}{suffix}"
        )

#: 61 * 53 = 3233: the classic textbook toy modulus.
TINY_P, TINY_Q, TINY_SEED = 61, 53, 2


@pytest.fixture(scope="session")
def tiny_params() -> AccumulatorParams:
    return AccumulatorParams.insecure(p=TINY_P, q=TINY_Q, seed=TINY_SEED)


@pytest.fixture(scope="session")
def small_params() -> AccumulatorParams:
    """512-bit modulus: fast modexp, negligible collision probability."""
    return setup(modulus_bits=512)


@pytest.fixture(scope="session")
def keyring():
    return generate_keyring([b"user-00", b"user-01", b"user-02"])
