import pytest

from metrograph.dataio import load_dataset, sample_paths


@pytest.fixture(scope="session")
def sample_files():
    return sample_paths()


@pytest.fixture(scope="session")
def sample(sample_files):
    return load_dataset(sample_files["stations"], sample_files["edges"], sample_files["flows"])


@pytest.fixture(scope="session")
def sample_graph(sample):
    return sample.graph


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
