import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from consbug.linalg import inner, ortho_columns
from consbug.lowrank import LowRankState

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40
)
settings.load_profile("default")


def random_frame(rng, n, r, weights=None, lead=None):
    """Random orthonormal ``n x r`` frame, optionally starting exactly with ``lead``."""
    k = 0 if lead is None else lead.shape[1]
    block = rng.standard_normal((n, r))
    if k:
        block[:, :k] = lead
    Q, _ = ortho_columns(block, weights)
    if k:
        Q[:, :k] = lead
    return Q


def random_state(rng, n_x, n_v, r, weights=None, lead=None, decay=None):
    X = random_frame(rng, n_x, r)
    V = random_frame(rng, n_v, r, weights, lead)
    S = rng.standard_normal((r, r))
    if decay is not None:
        S = S * decay ** np.arange(r)[None, :]
    return LowRankState(X, S, V)


def ortho_error(Q, weights=None):
    return np.max(np.abs(inner(Q, Q, weights) - np.eye(Q.shape[1])))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self):
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        details = "; ".join(f"{lbl} {d}".strip() for lbl, _, d in self.checks)
        return f"[{status}] criterion {self.number:>2}: {self.title} ({details})"

    def assert_passed(self):
        failed = [f"{lbl} {d}" for lbl, ok, d in self.checks if not ok]
        assert self.passed, "; ".join(failed) or "no checks recorded"


@pytest.fixture
def criterion():
    """Factory recording a numbered acceptance criterion for the summary."""

    def make(number, title):
        c = _Criterion(number, title)
        _ACCEPTANCE[number] = c
        return c

    return make


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n].line())
