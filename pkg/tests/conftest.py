import pytest
import torch

from patternlm.codec import fit_norm_stats
from patternlm.datagen import build_vocabulary, generate_sample

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def vocab():
    return build_vocabulary()


@pytest.fixture(scope="session")
def samples():
    return [generate_sample(7, i) for i in range(200)]


@pytest.fixture(scope="session")
def stats(samples):
    return fit_norm_stats([s.pattern for s in samples])


_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    detail = dict(report.user_properties).get("detail", "")
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {outcome}  {detail}")
