import pytest

ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call":
        ACCEPTANCE_RESULTS[name] = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    elif rep.skipped:
        ACCEPTANCE_RESULTS[name] = "SKIP"
    elif rep.failed:
        ACCEPTANCE_RESULTS[name] = "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: float(n.split(" ")[0])):
        terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[name]:4}  {name}")
