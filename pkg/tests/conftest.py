import pytest

from qchab import xs13
from qchab.froblift import FrobeniusEngine

# cup-product pairing of the packaged basis, primitive triple first;
# frozen from tests/oracles/oracle_curve.py
CUP_GRAM = [
    [0, 0, 0, -1, 0, 0],
    [0, 0, 0, 0, -1, 0],
    [0, 0, 0, 0, 0, -1],
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
]

PRECISION = 5
GUARD = 6


@pytest.fixture(scope="session")
def frob_cache(tmp_path_factory):
    return str(tmp_path_factory.mktemp("frobenius-cache"))


def _build(chart, cache_dir):
    fix = xs13.load_fixture(chart)
    return fix, FrobeniusEngine(
        fix.curve, list(fix.omega), list(fix.third), fix.base_point,
        fix.prime, PRECISION, guard=GUARD, gram=CUP_GRAM,
        cache_dir=cache_dir)


@pytest.fixture(scope="session")
def chart1(frob_cache):
    return _build(1, frob_cache)


@pytest.fixture(scope="session")
def chart2(frob_cache):
    return _build(2, frob_cache)
