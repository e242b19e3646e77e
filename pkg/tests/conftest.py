import os
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from carousel_eval.data import DataSplit, InteractionMatrix

ML100K = Path(os.environ.get("CAROUSEL_ML100K", "/root/data/ml-100k"))
ML10M = Path(os.environ.get("CAROUSEL_ML10M", "/root/data/ml-10M100K"))

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        details = [v for k, v in item.user_properties if k == "detail"]
        if report.skipped and isinstance(report.longrepr, tuple):
            details.append(report.longrepr[2])
        # a criterion split across several tests fails if any part fails
        if _criteria.get(number, ("PASS",))[0] != "FAIL":
            _criteria[number] = (status, text, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, text, detail = _criteria[number]
        line = f"[{status}] criterion {number}: {text}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)


def matrix(dense, user_ids=None, item_ids=None) -> InteractionMatrix:
    dense = np.asarray(dense, dtype=np.float64)
    n_users, n_items = dense.shape
    X = sp.csr_matrix(dense)
    X.sort_indices()
    return InteractionMatrix(
        X,
        np.arange(n_users) if user_ids is None else np.asarray(user_ids),
        np.arange(n_items) if item_ids is None else np.asarray(item_ids),
    )


def make_split(train, validation=None, test=None, seed=0) -> DataSplit:
    train = np.asarray(train, dtype=np.float64)
    zeros = np.zeros_like(train)
    return DataSplit(
        matrix(train),
        matrix(zeros if validation is None else validation),
        matrix(zeros if test is None else test),
        seed=seed,
    )


@pytest.fixture
def toy_split() -> DataSplit:
    rng = np.random.default_rng(3)
    dense = (rng.random((30, 12)) < 0.35) * rng.integers(1, 6, (30, 12))
    label = rng.random(dense.shape)
    train = np.where(label < 0.7, dense, 0)
    test = np.where(label >= 0.7, dense, 0)
    return make_split(train, test=test)


@pytest.fixture(scope="session")
def ml100k_dir() -> Path:
    if not (ML100K / "u.data").is_file():
        pytest.skip(f"MovieLens 100k not found at {ML100K} (set CAROUSEL_ML100K)")
    return ML100K
