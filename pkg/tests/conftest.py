import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")
    config.stash[_RESULTS] = {}


class CriterionReport:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.line = None

    def record(self, passed, detail):
        self.line = f"criterion {self.number:2d} {self.title}: {'PASS' if passed else 'FAIL'} ({detail})"
        print(self.line)
        return passed


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    report = CriterionReport(*marker.args)
    yield report
    if report.line is None:
        report.line = f"criterion {report.number:2d} {report.title}: FAIL (errored before reporting)"
    request.config.stash[_RESULTS][report.number] = report.line


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
