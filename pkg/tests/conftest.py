import numpy as np
import pytest

_ACCEPTANCE = {}


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_hermitian(rng, n, scale=1.0):
    a = random_complex(rng, (n, n), scale)
    return (a + a.conj().T) / 2


def random_hpd(rng, n, floor=0.5):
    c = random_complex(rng, (n, n), 1.0 / np.sqrt(n))
    return c.conj().T @ c + floor * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


_NODES = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and report.outcome == "passed":
        return
    number = _NODES.get(report.nodeid)
    if number is not None:
        _ACCEPTANCE[number]["outcomes"].append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None and mark.args:
            number, title = mark.args[:2]
            _NODES[item.nodeid] = number
            _ACCEPTANCE.setdefault(number, {"title": title, "outcomes": []})


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        outcomes = entry["outcomes"]
        if not outcomes:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        elif "failed" in outcomes:
            verdict = "FAIL"
        else:
            verdict = "SKIP"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {entry['title']}")
