import numpy as np
import pytest

from frl.constants import FracParams
from frl.operator import DomainGeometry


@pytest.fixture(scope="session")
def p75():
    return FracParams.make(1, 0.75)


@pytest.fixture(scope="session")
def interval():
    return DomainGeometry()


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))
