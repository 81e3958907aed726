"""Collects per-criterion results from the acceptance suite and prints one line each."""

_criteria: dict = {}
_nodes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            key = (mark.args[0], mark.args[1])
            _nodes[item.nodeid] = key
            _criteria.setdefault(key, [])


def pytest_runtest_logreport(report):
    key = _nodes.get(report.nodeid)
    if key is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria[key].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), results in sorted(_criteria.items()):
        ok = bool(results) and all(outcome == "passed" for _, outcome in results)
        failed = [name for name, outcome in results if outcome != "passed"]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        if failed:
            line += f"  (failing: {', '.join(failed)})"
        terminalreporter.write_line(line)
