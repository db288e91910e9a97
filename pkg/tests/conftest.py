import pytest

from heavykrr.kernel import FunctionExpansion, KernelSpec, MarginalSpec

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome; returns ``ok`` so tests can assert on it."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rbf():
    return KernelSpec()


@pytest.fixture
def normal():
    return MarginalSpec()


@pytest.fixture
def target_fstar():
    # target of the replication experiment; center vector read as (-4, -2, 0, 3, 7)
    return FunctionExpansion([-4.0, -2.0, 0.0, 3.0, 7.0], [2.0, -1.0, -3.0, 1.0, 2.0])
