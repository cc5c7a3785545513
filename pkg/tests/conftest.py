import numpy as np
import pytest

from mimocs.geometry import ArrayGeometry, random_geometry, wavelength_from_frequency

LAM = wavelength_from_frequency(8.62e9)


@pytest.fixture
def lam():
    return LAM


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def disk_geometry(n_tx=30, n_rx=1, radius_wl=100, seed=0):
    return random_geometry(n_tx, n_rx, LAM, radius_wl * LAM, np.random.default_rng(seed))


def origin_rx_geometry(n_tx=30, radius_wl=100, seed=0):
    """Random transmit array with one receive antenna at the origin."""
    g = disk_geometry(n_tx, 1, radius_wl, seed)
    return ArrayGeometry(g.tx_positions, np.zeros((1, 2)), LAM)


def random_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def cvxpy_dantzig(theta, r, mu):
    """Reference optimum of the complex Dantzig selector from a generic conic solver."""
    import cvxpy as cp
    s = cp.Variable(theta.shape[1], complex=True)
    gram = theta.conj().T @ theta
    corr = theta.conj().T @ r
    prob = cp.Problem(cp.Minimize(cp.sum(cp.abs(s))), [cp.abs(corr - gram @ s) <= mu])
    prob.solve(solver=cp.CLARABEL)
    return s.value, prob.value


def random_instance(rng, N, M):
    theta = random_complex(rng, M, N)
    r = random_complex(rng, M)
    return theta, r
