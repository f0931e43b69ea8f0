import sys

import numpy as np
import pytest

from motionlab import samples
from motionlab.scene import load_scene


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "REPORT_LINES", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_link():
    return samples.two_link_planar()


@pytest.fixture(scope="session")
def three_link():
    return samples.three_link_planar()


@pytest.fixture(scope="session")
def six_dof():
    return samples.six_dof_arm()


@pytest.fixture()
def corridor_scene(two_link):
    return load_scene(samples.scene_path("blocked_corridor"), two_link)


@pytest.fixture()
def table_scene(six_dof):
    return load_scene(samples.scene_path("table"), six_dof)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
