import pytest

from debtswap import apply_swap, paper_fixture


@pytest.fixture
def fixture():
    return paper_fixture


@pytest.fixture
def swapped():
    def make(name):
        fx = paper_fixture(name)
        return fx, apply_swap(fx.network, fx.operation)
    return make
