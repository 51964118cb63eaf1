import math

import numpy as np
import pytest

from mfwidth.synth import CascadeSpec, gen_binomial_cascade


def naive_detrended_variance(y, order):
    """Least squares by explicit sums, orders 0 and 1 only."""
    y = [float(v) for v in y]
    s = len(y)
    if order == 0:
        mean = math.fsum(y) / s
        return math.fsum((v - mean) ** 2 for v in y) / s
    xs = range(s)
    sx = math.fsum(xs)
    sy = math.fsum(y)
    sxx = math.fsum(i * i for i in xs)
    sxy = math.fsum(i * v for i, v in zip(xs, y))
    slope = (s * sxy - sx * sy) / (s * sxx - sx * sx)
    icpt = (sy - slope * sx) / s
    return math.fsum((v - (icpt + slope * i)) ** 2 for i, v in zip(xs, y)) / s


@pytest.fixture(scope="session")
def cascade():
    return gen_binomial_cascade(CascadeSpec(levels=16, multiplier=0.75))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Call with (ok, detail); the line is echoed in the terminal summary."""
    def record(ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
