import pytest

from fluxpiston.model import EngineParams


@pytest.fixture
def fig2_params():
    return EngineParams(kappa_H=10.0, Delta0=-10.0, g=1.0, E_c=1e-5, E_J=400.0,
                        n_H=10.0, n_C=1.0, alpha=1.0)


@pytest.fixture
def fig3_params():
    return EngineParams(kappa_H=10.0, Delta0=-4.0, g=4.0, E_c=1e-5, E_J=400.0,
                        n_H=100.0, n_C=1.0, alpha=1.0)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    def order(line):
        label = line.split("criterion ")[1].split(":")[0]
        digits = "".join(ch for ch in label if ch.isdigit())
        return int(digits), label

    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines, key=order):
            terminalreporter.write_line(line)
