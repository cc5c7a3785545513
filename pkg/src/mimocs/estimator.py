"""Compressive-sensing DOA recovery over an angle grid.

The receive antenna ``l`` sees ``z_l = Psi_l s + noise`` where the columns of
``Psi_l`` are noiseless single-target responses at each grid angle.  Each
antenna compresses its snapshots with a random measurement matrix, the
compressed outputs are stacked into ``r = Theta s``, and the sparse spectrum
``s`` is recovered with the Dantzig selector ::

    minimize  sum_n |s_n|   subject to  max_n |(Theta^H (r - Theta s))_n| <= mu

solved as a second-order cone program (complex moduli become cone
constraints after splitting each complex scalar into a real 2-vector).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import steering_vector
from .socp import ConeSolverError, solve_socp

log = logging.getLogger(__name__)

# entries of a recovered spectrum below this fraction of its peak are set to zero
PRUNE_TOL = 1e-6


class DantzigError(RuntimeError):
    """Dantzig-selector solve did not converge.

    Attributes:
        best: best complex iterate seen (or None).
        residuals: dict of the residuals at that iterate.
    """

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals or {}


@dataclass(frozen=True)
class AngleGrid:
    """Strictly increasing candidate azimuths.  ``angles`` in radians."""

    degrees: np.ndarray

    def __post_init__(self):
        deg = np.asarray(self.degrees, dtype=float).ravel()
        if deg.size < 2:
            raise ValueError("an angle grid needs at least two angles")
        if np.any(np.diff(deg) <= 0):
            raise ValueError("grid angles must be strictly increasing")
        deg.setflags(write=False)
        object.__setattr__(self, "degrees", deg)

    @property
    def angles(self):
        return np.deg2rad(self.degrees)

    def __len__(self):
        return self.degrees.size

    def index_of(self, azimuth_deg, tol=1e-7):
        """Grid index of an angle in degrees, or None when it is off the grid."""
        k = int(np.argmin(np.abs(self.degrees - azimuth_deg)))
        return k if abs(self.degrees[k] - azimuth_deg) <= tol else None

    def same_as(self, other):
        return len(self) == len(other) and np.allclose(self.degrees, other.degrees,
                                                       rtol=0, atol=1e-12)


@dataclass
class SparseSpectrum:
    values: np.ndarray
    grid: AngleGrid = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.grid is not None and len(self.grid) != self.values.size:
            raise ValueError("spectrum length does not match its grid")

    @property
    def magnitude(self):
        return np.abs(self.values)

    def support(self, rel_tol=1e-3):
        """Indices whose modulus exceeds ``rel_tol`` times the peak modulus."""
        mag = self.magnitude
        if mag.max(initial=0.0) == 0:
            return np.array([], dtype=int)
        return np.flatnonzero(mag > rel_tol * mag.max())


@dataclass(frozen=True)
class BasisMatrix:
    matrix: np.ndarray
    antenna: int
    grid: AngleGrid


@dataclass(frozen=True)
class MeasurementMatrix:
    """Random compression applied at one receive antenna.

    ``phi`` is the drawn Gaussian matrix with orthonormal rows (M x L for the
    plain kind, M x Mt for the matched kind).  ``effective`` is the M x L
    operator applied to the snapshots: ``phi`` itself, or ``phi @ X^H``.
    """

    kind: str
    phi: np.ndarray
    effective: np.ndarray

    @property
    def M(self):
        return self.phi.shape[0]


@dataclass(frozen=True)
class SensingOperator:
    theta: np.ndarray
    measurements: tuple
    bases: tuple

    @property
    def n_active(self):
        return len(self.bases)

    @property
    def grid(self):
        return self.bases[0].grid


def build_angle_grid(start_deg, stop_deg, step_deg):
    """Uniform grid from ``start_deg`` to ``stop_deg`` inclusive."""
    if not step_deg > 0:
        raise ValueError("grid step must be positive")
    if not start_deg < stop_deg:
        raise ValueError("grid start must be below grid stop")
    n = int(round((stop_deg - start_deg) / step_deg)) + 1
    deg = start_deg + step_deg * np.arange(n)
    # strip float noise such as -4.800000000000001
    deg = np.round(deg, 10)
    if abs(deg[-1] - stop_deg) < 1e-9:
        deg[-1] = stop_deg
    return AngleGrid(deg)


def build_basis(geometry, X, grid, antenna):
    """Dictionary of antenna ``antenna``: column n is exp(j k eta_l(a_n)) X v(a_n)."""
    if not 0 <= antenna < geometry.n_rx:
        raise IndexError(f"receive antenna {antenna} out of range")
    X = np.asarray(getattr(X, "samples", X))
    V = steering_vector(geometry, "tx", grid.angles)
    rx_phase = steering_vector(geometry, "rx", grid.angles)[antenna]
    return BasisMatrix((X @ V) * rx_phase[None, :], antenna, grid)


def _orthonormal_rows(A):
    q, r = np.linalg.qr(A.conj().T)
    d = np.diagonal(r)
    return (q * (d / np.abs(d))[None, :]).conj().T


def draw_measurement(kind, M, L, n_tx, X, rng):
    """Draw one complex Gaussian measurement matrix with orthonormal rows."""
    if M < 1:
        raise ValueError("need at least one measurement")
    if kind == "plain":
        cols = L
        if M > L:
            raise ValueError(f"plain measurement needs M <= L (M={M}, L={L})")
    elif kind == "matched":
        cols = n_tx
        if M > n_tx:
            raise ValueError(f"matched measurement needs M <= Mt (M={M}, Mt={n_tx})")
    else:
        raise ValueError(f"unknown measurement kind {kind!r}")
    raw = (rng.standard_normal((M, cols)) + 1j * rng.standard_normal((M, cols))) / np.sqrt(2)
    phi = _orthonormal_rows(raw)
    if kind == "plain":
        return MeasurementMatrix(kind, phi, phi)
    X = np.asarray(getattr(X, "samples", X))
    if X.shape != (L, n_tx):
        raise ValueError("waveform matrix must be L x Mt for the matched kind")
    return MeasurementMatrix(kind, phi, phi @ X.conj().T)


def build_sensing_operator(pairs, observations):
    """Stack Phi_l Psi_l row blocks into Theta and Phi_l z_l into r."""
    if not pairs:
        raise ValueError("need at least one (measurement, basis) pair")
    if len(pairs) != len(observations):
        raise ValueError("one observation per (measurement, basis) pair")
    grid = pairs[0][1].grid
    blocks, outputs = [], []
    for (meas, basis), z in zip(pairs, observations):
        if not basis.grid.same_as(grid):
            raise ValueError("all antennas must share one angle grid")
        blocks.append(meas.effective @ basis.matrix)
        outputs.append(meas.effective @ np.asarray(z))
    op = SensingOperator(np.vstack(blocks), tuple(p[0] for p in pairs),
                         tuple(p[1] for p in pairs))
    return op, np.concatenate(outputs)


def select_threshold(N, sigma2, t=1.0, log_base=np.e):
    """Threshold mu = (1 + 1/t) sqrt(2 log(N) sigma2)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if N < 2 or sigma2 < 0:
        raise ValueError("need N >= 2 and sigma2 >= 0")
    return (1 + 1 / t) * np.sqrt(2 * np.log(N) / np.log(log_base) * sigma2)


def _lifted_program(gram, corr, mu, norm):
    """Real cone program for the complex Dantzig selector.

    Variables are [t, Re s, Im s]; ``t`` bounds |s_n| (complex norm, one
    3-cone per entry) or |Re s_n|, |Im s_n| separately (split norm, 2-cones).
    """
    N = corr.size
    A, B = gram.real, gram.imag
    I = np.eye(N)
    Z = np.zeros((N, N))
    if norm == "complex":
        # cones n < N: (t_n, a_n, b_n);  cones N + n: (mu, Re res_n, Im res_n)
        q, nt = 3, N
        G1 = -np.stack([np.hstack([I, Z, Z]), np.hstack([Z, I, Z]),
                        np.hstack([Z, Z, I])], axis=1)
        G2 = np.stack([np.zeros((N, 3 * N)), np.hstack([Z, A, -B]),
                       np.hstack([Z, B, A])], axis=1)
        h1 = np.zeros((N, 3))
        h2 = np.column_stack([np.full(N, mu), corr.real, corr.imag])
    elif norm == "split":
        q, nt = 2, 2 * N
        ZZ = np.zeros((N, 2 * N))
        G1 = -np.concatenate([
            np.stack([np.hstack([I, Z, Z, Z]), np.hstack([Z, Z, I, Z])], axis=1),
            np.stack([np.hstack([Z, I, Z, Z]), np.hstack([Z, Z, Z, I])], axis=1)])
        G2 = np.concatenate([
            np.stack([np.zeros((N, 4 * N)), np.hstack([ZZ, A, -B])], axis=1),
            np.stack([np.zeros((N, 4 * N)), np.hstack([ZZ, B, A])], axis=1)])
        h1 = np.zeros((2 * N, 2))
        h2 = np.concatenate([np.column_stack([np.full(N, mu), corr.real]),
                             np.column_stack([np.full(N, mu), corr.imag])])
    else:
        raise ValueError(f"norm must be 'complex' or 'split', got {norm!r}")
    G = np.concatenate([G1, G2]).reshape(-1, nt + 2 * N)
    h = np.concatenate([h1, h2]).ravel()
    c = np.r_[np.ones(nt), np.zeros(2 * N)]
    return c, G, h, q, nt


def dantzig_residual(theta, r, s):
    """max_n |(Theta^H (r - Theta s))_n|."""
    theta = getattr(theta, "theta", theta)
    return float(np.max(np.abs(theta.conj().T @ (r - theta @ s))))


def solve_dantzig(theta, r, mu, norm="complex", equilibrate=False, max_iter=200,
                  prune_tol=PRUNE_TOL, grid=None):
    """Recover the sparse spectrum with the Dantzig selector.

    Args:
        theta: :class:`SensingOperator` or a raw complex matrix.
        r: stacked compressed observations.
        mu: bound on the correlated residual, >= 0.
        norm: ``"complex"`` (moduli) or ``"split"`` (real and imaginary parts
            treated as separate coordinates; an LP).
        equilibrate: solve for ``u = s / w`` with ``w`` the inverse column
            norms of Theta; the optimum is unchanged, only the conditioning.
        max_iter: interior-point iteration budget.
        prune_tol: entries below this fraction of the peak are zeroed, kept
            only if the pruned point stays feasible.

    Returns:
        SparseSpectrum whose ``info`` holds iterations, duality gap, the
        achieved residual and the feasibility tolerance.

    Raises:
        DantzigError: the cone solver did not converge.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    if grid is None:
        grid = getattr(theta, "grid", None)
    T = np.asarray(getattr(theta, "theta", theta), dtype=complex)
    r = np.asarray(r, dtype=complex)
    N = T.shape[1]
    corr = T.conj().T @ r
    scale = float(np.max(np.abs(corr), initial=0.0))
    feas_tol = 1e-6 * (1 + scale)
    info = dict(mu=float(mu), feasibility_tolerance=feas_tol, norm=norm)

    if scale <= mu:
        # zero is feasible and has the smallest possible l1 norm
        info.update(iterations=0, gap=0.0, residual=scale, objective=0.0)
        return SparseSpectrum(np.zeros(N, dtype=complex), grid, info)

    weights = np.ones(N)
    if equilibrate:
        # substitute s = w * u: same program, better-conditioned columns
        weights = 1 / np.linalg.norm(T, axis=0)
    gram = T.conj().T @ (T * weights[None, :])
    c, G, h, q, nt = _lifted_program(gram, corr / scale, mu / scale, norm)
    c[:nt] *= np.tile(weights, nt // N)
    try:
        sol = solve_socp(c, G, h, q, max_iter=max_iter)
    except ConeSolverError as exc:
        best = None
        if exc.x is not None:
            best = scale * weights * (exc.x[nt:nt + N] + 1j * exc.x[nt + N:])
        raise DantzigError(f"Dantzig selector did not converge: {exc}", best,
                           exc.residuals) from exc

    x = sol.x
    s = scale * weights * (x[nt:nt + N] + 1j * x[nt + N:])
    peak = np.max(np.abs(s), initial=0.0)
    if prune_tol and peak > 0:
        pruned = np.where(np.abs(s) > prune_tol * peak, s, 0)
        if dantzig_residual(T, r, pruned) <= mu + feas_tol:
            s = pruned
    info.update(iterations=sol.iterations, gap=sol.gap * scale,
                relative_gap=sol.relative_gap, residual=dantzig_residual(T, r, s),
                objective=float(np.sum(np.abs(s))))
    if info["residual"] > mu + feas_tol:
        log.warning("Dantzig solution violates its constraint by %.3g",
                    info["residual"] - mu)
    return SparseSpectrum(s, grid, info)


def find_peaks(magnitude, rel_threshold=0.0):
    """Local maxima of ``magnitude`` above ``rel_threshold`` times its maximum.

    On a plateau only the leftmost sample counts, so ties go to the smaller
    angle index.  Returned indices are sorted by decreasing magnitude (then
    increasing index).
    """
    m = np.asarray(magnitude, dtype=float)
    top = m.max(initial=0.0)
    if top <= 0:
        return np.array([], dtype=int)
    left = np.r_[-np.inf, m[:-1]]
    right = np.r_[m[1:], -np.inf]
    is_peak = (m > left) & (m >= right) & (m > rel_threshold * top)
    idx = np.flatnonzero(is_peak)
    order = np.lexsort((idx, -m[idx]))
    return idx[order]


def refine_grid(spectrum, grid, window_deg, fine_step_deg, rel_threshold=0.1):
    """Fine grids around each detected peak of a previous estimate, merged.

    Args:
        spectrum: previous estimate (SparseSpectrum or complex array).
        grid: AngleGrid the estimate lives on.
        window_deg: half-width of the fine grid around each peak.
        fine_step_deg: spacing of the fine grid.
        rel_threshold: peaks must exceed this fraction of the largest modulus.
    """
    values = np.asarray(getattr(spectrum, "values", spectrum))
    if not (window_deg > 0 and fine_step_deg > 0 and fine_step_deg < window_deg):
        raise ValueError("need 0 < fine step < window")
    mag = np.abs(values)
    if not np.any(mag > 0):
        raise ValueError("cannot refine an all-zero spectrum")
    peaks = find_peaks(mag, rel_threshold)
    pieces = []
    for k in sorted(peaks):
        centre = grid.degrees[k]
        pieces.append(build_angle_grid(centre - window_deg, centre + window_deg,
                                       fine_step_deg).degrees)
    merged = np.unique(np.round(np.concatenate(pieces), 9))
    return AngleGrid(merged)
