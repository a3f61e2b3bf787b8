import functools

import numpy as np
import pytest

from lindblad_riemann import lindblad, splitting


@functools.lru_cache(maxsize=None)
def exact_reference(model, tau, sites=4):
    ref = splitting.exact_superop(model, tau, sites)
    ref.setflags(write=False)
    return ref


@functools.lru_cache(maxsize=None)
def local_generator(model):
    return lindblad.local_dissipator(lindblad.jump_operators(model))


def random_isometry(rng, n, p):
    Q, R = np.linalg.qr(rng.standard_normal((n, p)))
    return Q * np.sign(np.diag(R))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
