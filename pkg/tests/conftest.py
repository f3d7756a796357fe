import sys
from pathlib import Path

import numpy as np
import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

IRIS = TESTS / "data" / "iris.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def iris_path():
    return IRIS


@pytest.fixture(scope="session")
def iris():
    from meetg.data import load_csv

    return load_csv(IRIS)


def blobs(rng, n_per_class, centers, sigma=0.3):
    """Gaussian blobs around `centers`; returns (x, labels)."""
    centers = np.asarray(centers, dtype=float)
    x = np.concatenate([c + sigma * rng.standard_normal((n_per_class, centers.shape[1])) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n_per_class)
    return x, labels


# -- acceptance summary -------------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _acceptance.append((props["criterion"], props.get("title", report.nodeid), report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, outcome, detail in sorted(_acceptance):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {num:>2}. {title}" + (f"  ({detail})" if detail else ""))
