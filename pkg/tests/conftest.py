import time

import pytest

from robvol.sim import mc_variance_study

# fixed before any acceptance run; not tuned
ACCEPTANCE_SEED = 2021


@pytest.fixture(scope="session")
def mc_studies():
    """Full-size variance studies (n=100, 2000 replications) shared across test files."""
    out = {}
    for dist in ("lognormal", "t"):
        t0 = time.perf_counter()
        res = mc_variance_study(dist, n=100, reps=2000, seed=ACCEPTANCE_SEED)
        out[dist] = (res, time.perf_counter() - t0)
    return out


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
