import pytest

from diamond_gdof.core import McConfig, NetworkParams


@pytest.fixture
def example_params():
    """T=3, gamma=(4,1,2,3): the worked comparison instance."""
    return NetworkParams(3, 4, 1, 2, 3)


@pytest.fixture
def small_mc():
    return McConfig(samples=200_000, seed=11, chunk=1 << 15)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one summary line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
