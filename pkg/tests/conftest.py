import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairpolicy.synthetic import SyntheticSpec, generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(SyntheticSpec(n=3000), np.random.default_rng(11))


@pytest.fixture(scope="session")
def default_synth():
    """Synthetic defaults: 10,000 training and 5,000 evaluation rows."""
    return generate_synthetic(SyntheticSpec(n=15000), np.random.default_rng(0))


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS[number] = line
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
