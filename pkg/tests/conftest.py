import time

import numpy as np
import pytest

from loclab import harness

MATRIX_PATHS = 10_000
MATRIX_SEED = 0


@pytest.fixture(scope="session")
def default_matrix():
    """Default model matrix at 1e4 paths, simulated once and shared.

    Record times cover both the default schedule and the E F times, so the
    Gronwall checks read the same paths.
    """
    cfg = harness.HarnessConfig(n_paths=MATRIX_PATHS, seed=MATRIX_SEED)
    start = time.perf_counter()
    harness.prefetch(cfg.models, set(cfg.times) | set(cfg.ef_times), cfg.h, cfg.n_paths, cfg.seed)
    cfg.simulation_seconds = time.perf_counter() - start
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# -- acceptance summary ---------------------------------------------------------
# Acceptance tests tag themselves with record_property("criterion", label); the
# outcome of each is echoed as one line at the end of the run.

_CRITERIA = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[props["criterion"]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[0])):
        verdict = "PASS" if _CRITERIA[label] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {label}: {verdict}")
