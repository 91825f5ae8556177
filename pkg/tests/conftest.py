import pytest

CRITERIA = {
    1: "propagator matches matrix-exponential oracle",
    2: "kernel bound constants",
    3: "linear decay rates",
    4: "nonlinear small-data stability",
    5: "L2 energy identity",
    6: "mean and divergence invariants",
    7: "Poincare inequality",
    8: "Diophantine certification",
    9: "RK4 self-convergence order",
    10: "Q and F functional bounds",
}

_RESULTS: dict = {}


@pytest.fixture
def record():
    """Store a criterion verdict; the terminal summary prints one line per criterion."""

    def _record(number: int, ok: bool, detail: str) -> None:
        _RESULTS[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name in CRITERIA.items():
        if number in _RESULTS:
            ok, detail = _RESULTS[number]
            verdict = "PASS" if ok else "FAIL"
        else:
            verdict, detail = "NOT RUN", "not collected in this session"
        terminalreporter.write_line(f"[{verdict}] criterion {number:2d} {name}: {detail}")
