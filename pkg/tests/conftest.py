import numpy as np
import pytest

from repeater_budget.utils import console as ui
from repeater_budget.utils.logger import set_quiet


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.delenv("REPEATER_BUDGET_LOG", raising=False)
    monkeypatch.delenv("REPEATER_BUDGET_THREADS", raising=False)
    ui.configure(threads=1, seed=0, quiet=True)
    set_quiet(True)
    yield
    ui.configure(threads=None, seed=0, quiet=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
