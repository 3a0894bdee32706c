import pytest

from greybox_narx.dataio import PrbsConfig, default_plant, reference_pool, split, synthetic_series

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def pool61():
    return reference_pool()


@pytest.fixture(scope="session")
def default_bundle():
    series = synthetic_series(default_plant(), PrbsConfig(), noise_seed=0)
    return split(series, 100)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
