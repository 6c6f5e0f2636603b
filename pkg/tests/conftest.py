import pytest

from circpoll.dists import SystemParams, make_batch_dist, make_service_dist


def _config_a() -> SystemParams:
    return SystemParams(
        0.5, 1.0, make_batch_dist({"kind": "deterministic", "k": 1}), make_service_dist({"kind": "exponential", "rate": 1.0})
    )


def _config_b() -> SystemParams:
    return SystemParams(
        0.2, 1.0, make_batch_dist({"kind": "deterministic", "k": 2}), make_service_dist({"kind": "deterministic", "b": 0.5})
    )


@pytest.fixture
def config_a() -> SystemParams:
    """lambda = 0.5, unit batches, exp(1) service, alpha = 1."""
    return _config_a()


@pytest.fixture
def config_b() -> SystemParams:
    """lambda = 0.2, pairs, deterministic 0.5 service, alpha = 1."""
    return _config_b()


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    def _report(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
