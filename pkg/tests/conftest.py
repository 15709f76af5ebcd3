import numpy as np
import pytest

from complim import assemble, build_basis, nullspace_basis


@pytest.fixture(scope="session")
def spec2():
    return build_basis(2, 2)


@pytest.fixture(scope="session")
def ops2(spec2):
    return assemble(spec2)


@pytest.fixture(scope="session")
def spec4():
    return build_basis(4, 4)


@pytest.fixture(scope="session")
def ops4(spec4):
    return assemble(spec4)


@pytest.fixture(scope="session")
def kernel4(ops4):
    return nullspace_basis(ops4)


@pytest.fixture(scope="session")
def spec8():
    return build_basis(8, 8)


@pytest.fixture(scope="session")
def ops8(spec8):
    return assemble(spec8)


@pytest.fixture(scope="session")
def kernel8(ops8):
    return nullspace_basis(ops8)


def gauss_grid(order):
    """Independent tensor Gauss-Legendre rule on [0,1]^2 for test oracles."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    return x, w


def quad2d(fn, order=40):
    """Tensor quadrature of fn(x, y) over the unit square (oracle path)."""
    x, w = gauss_grid(order)
    vals = fn(x[:, None], x[None, :])
    return float(np.einsum("a,ab,b->", w, vals, w))
