"""Shared fixtures and the acceptance summary printed at the end of a run."""

from collections import defaultdict

import numpy as np
import pytest

ACCEPTANCE = defaultdict(list)


def record(criterion: int, ok: bool, detail: str) -> None:
    """Log one checked part of an acceptance criterion."""
    ACCEPTANCE[criterion].append((bool(ok), detail))
    print(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
