"""Classical adaptive estimators over the angle grid: Capon, APES and GLRT.

All three start from the virtual-array matched filter ::

    g(a) = Z conj(X) conj(v(a)) / Mt

which, for orthonormal waveforms, collapses a target at ``a`` to
``s * a_r(a)`` (``a_r`` is the receive steering vector), and from the
sample covariance ``R = Z Z^H / L`` of the receive snapshots.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import steering_vector


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass
class SpectrumEstimate:
    grid: object
    values: np.ndarray
    method: str
    flags: dict = field(default_factory=dict)

    @property
    def magnitude(self):
        return np.abs(self.values)


def matched_filter_virtual(Z, X, grid, geometry):
    """Per-angle matched-filter outputs, shape (N_r, N)."""
    Z = np.atleast_2d(np.asarray(Z))
    X = np.asarray(getattr(X, "samples", X))
    if Z.shape[1] != X.shape[0]:
        raise ValueError("snapshot counts of Z and X differ")
    V = steering_vector(geometry, "tx", grid.angles)
    return Z @ X.conj() @ V.conj() / X.shape[1]


def default_loading(R):
    return 1e-6 * np.trace(R).real / R.shape[0]


def _prepare(Z, X, geometry, grid, loading):
    Z = np.atleast_2d(np.asarray(Z))
    n_active, L = Z.shape
    if L < 1:
        raise ValueError("need at least one snapshot")
    g = matched_filter_virtual(Z, X, grid, geometry)
    A = steering_vector(geometry, "rx", grid.angles)[:n_active]
    R = Z @ Z.conj().T / L
    delta = default_loading(R) if loading is None else loading
    if delta < 0:
        raise ValueError("diagonal loading must be non-negative")
    return Z, g, A, R + delta * np.eye(n_active), delta


def _inverse(R, what):
    if np.linalg.cond(R) > 1e13:
        raise SingularCovarianceError(
            f"{what} is singular; use a positive diagonal loading")
    return np.linalg.inv(R)


def _quad(a, Ri, b):
    """Column-wise a^H Ri b."""
    return np.sum(a.conj() * (Ri @ b), axis=0)


def capon_spectrum(Z, X, geometry, grid, loading=None):
    """beta(a) = a_r^H R^-1 g / (a_r^H R^-1 a_r)."""
    Z, g, A, R, delta = _prepare(Z, X, geometry, grid, loading)
    if not np.any(Z):
        return SpectrumEstimate(grid, np.zeros(len(grid), complex), "capon")
    Ri = _inverse(R, "sample covariance")
    beta = _quad(A, Ri, g) / _quad(A, Ri, A)
    return SpectrumEstimate(grid, beta, "capon", {"loading": delta})


def apes_spectrum(Z, X, geometry, grid, loading=None):
    """Capon with the per-angle residual covariance Q(a) = R - (Mt/L) g g^H.

    Q(a) is the sample covariance left after removing the least-squares fit
    of the waveform ``X v(a)`` from the snapshots.  With one receive antenna
    the estimate degenerates to the matched filter and ``flags['degenerate']``
    is set.
    """
    Z, g, A, R, delta = _prepare(Z, X, geometry, grid, loading)
    n_active, L = Z.shape
    n_tx = np.asarray(getattr(X, "samples", X)).shape[1]
    if not np.any(Z):
        return SpectrumEstimate(grid, np.zeros(len(grid), complex), "apes",
                                {"degenerate": n_active == 1})
    beta = np.empty(len(grid), dtype=complex)
    for n in range(len(grid)):
        gn = g[:, n:n + 1]
        Q = R - (n_tx / L) * (gn @ gn.conj().T)
        Qi = _inverse(Q, "residual covariance")
        a = A[:, n:n + 1]
        beta[n] = (_quad(a, Qi, gn) / _quad(a, Qi, a))[0]
    return SpectrumEstimate(grid, beta, "apes",
                            {"loading": delta, "degenerate": n_active == 1})


def glrt_statistic(Z, X, geometry, grid, loading=None):
    """rho(a) = |a_r^H R^-1 g|^2 / ((a_r^H R^-1 a_r)(g^H R^-1 g)), in [0, 1].

    The normalized coherence between the matched-filter output and the
    receive steering vector in the R^-1 metric.  With a single receive
    antenna every nonzero ``g`` is trivially proportional to ``a_r`` and the
    statistic is identically one; ``flags['degenerate']`` marks that case.
    """
    Z, g, A, R, delta = _prepare(Z, X, geometry, grid, loading)
    n_active = Z.shape[0]
    if not np.any(Z):
        return SpectrumEstimate(grid, np.zeros(len(grid)), "glrt",
                                {"degenerate": n_active == 1})
    Ri = _inverse(R, "sample covariance")
    num = np.abs(_quad(A, Ri, g)) ** 2
    den = _quad(A, Ri, A).real * _quad(g, Ri, g).real
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(den > 0, num / den, 0.0)
    rho = np.clip(rho, 0.0, 1.0)
    if n_active == 1:
        rho = np.where(den > 0, 1.0, 0.0)
    return SpectrumEstimate(grid, rho, "glrt",
                            {"loading": delta, "degenerate": n_active == 1})
