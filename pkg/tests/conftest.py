import math

import numpy as np
import pytest


def taylor_erf(x, terms=50):
    """Independent erf: Maclaurin series with a fixed number of terms."""
    total = 0.0
    for k in range(terms):
        total += (-1) ** k * x ** (2 * k + 1) / (math.factorial(k) * (2 * k + 1))
    return 2.0 / math.sqrt(math.pi) * total


def series_erfi(x, terms=400):
    total = 0.0
    term = x
    for k in range(terms):
        total += term / (2 * k + 1)
        term *= x * x / (k + 1)
    return 2.0 / math.sqrt(math.pi) * total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
