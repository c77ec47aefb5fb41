import numpy as np
import pytest

from vmprox.data_io import serialize_libsvm
from vmprox.model import Regularizer, SmoothPart
from vmprox.synthetic import make_logistic_data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_problem():
    ds = make_logistic_data(300, 6, seed=4, flip=0.05)
    return SmoothPart(ds, 1e-2), Regularizer(l1=1e-3)


@pytest.fixture
def libsvm_file(tmp_path):
    ds = make_logistic_data(400, 8, seed=3, flip=0.05)
    path = tmp_path / "syn.txt"
    path.write_bytes(serialize_libsvm(ds))
    return path


def pytest_terminal_summary(terminalreporter):
    import re

    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(re.match(r'C(\d+)', k).group(1)), k)):
        terminalreporter.write_line(RESULTS[key])
