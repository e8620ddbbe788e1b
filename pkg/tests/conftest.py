import re
from collections import defaultdict

_outcomes: dict[int, list[bool]] = defaultdict(list)
_titles: dict[int, str] = {}

TITLES = {
    1: "channel count",
    2: "petal count and separation",
    3: "conjugation identity",
    4: "immediate basins have no holes",
    5: "immediate basins are unbounded",
    6: "exhaustion converges",
    7: "virtual basins have no holes",
    8: "absorbing half plane",
    9: "curve extension fuzz",
    10: "jets and worker-independent rasters",
}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.when == "call" or report.failed:
        _outcomes[k].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_outcomes):
        ok = all(_outcomes[k])
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {TITLES.get(k, '')}")
