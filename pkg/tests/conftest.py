import warnings

import pytest

from mrs_prophet.profiles import ScheduleClampWarning


@pytest.fixture(autouse=True)
def _quiet_clamp():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScheduleClampWarning)
        yield



def pytest_terminal_summary(terminalreporter):
    lines = [v for key in ("passed", "failed") for rep in terminalreporter.stats.get(key, [])
             if rep.when == "call" for name, v in rep.user_properties if name == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
