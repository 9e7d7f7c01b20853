import json

import pytest

from ioss_cert.config import bundled_path, load_spec, spec_from_dict
from ioss_cert.graph import build_graph


@pytest.fixture(scope="session")
def demo_dict():
    return json.loads(bundled_path("sec5.json").read_text())


@pytest.fixture(scope="session")
def demo(demo_dict):
    return spec_from_dict(demo_dict)


@pytest.fixture(scope="session")
def gd(demo):
    return build_graph(demo)


@pytest.fixture
def variant(demo_dict):
    """Copy of the three-mode example with edits applied by the caller."""
    import copy

    def make(edit):
        d = copy.deepcopy(demo_dict)
        edit(d)
        return spec_from_dict(d)

    return make


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
