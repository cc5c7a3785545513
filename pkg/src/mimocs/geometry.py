"""Array geometry, steering vectors, probing waveforms and received-signal synthesis.

Angles are radians throughout this module.  Complex amplitudes follow the
far-field narrowband model: a target at range ``d`` and azimuth ``theta``
contributes ``exp(-j 2pi/lam (2 d - eta_l(theta))) * beta * X @ v(theta)``
to the snapshot vector of receive antenna ``l``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# targets closer than this multiple of the array radius trigger a warning
FAR_FIELD_FACTOR = 100.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar transmit/receive antenna positions in meters."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    wavelength: float

    def __post_init__(self):
        tx = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        rx = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        if tx.shape[1] != 2 or rx.shape[1] != 2:
            raise ValueError("positions must be (count, 2) arrays of (x, y)")
        if len(tx) < 1 or len(rx) < 1:
            raise ValueError("need at least one transmit and one receive antenna")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise ValueError("antenna positions must be finite")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        tx.setflags(write=False)
        rx.setflags(write=False)
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    @property
    def n_tx(self):
        return len(self.tx_positions)

    @property
    def n_rx(self):
        return len(self.rx_positions)

    @property
    def radius(self):
        """Largest distance of any antenna from the origin."""
        allpos = np.vstack([self.tx_positions, self.rx_positions])
        return float(np.max(np.hypot(allpos[:, 0], allpos[:, 1])))


@dataclass(frozen=True)
class Target:
    range: float
    azimuth: float
    beta: complex = 1.0

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("target range must be positive")
        if not -np.pi < self.azimuth <= np.pi:
            raise ValueError("target azimuth must lie in (-pi, pi]")
        object.__setattr__(self, "beta", complex(self.beta))

    def grid_amplitude(self, wavelength):
        """Sparse-spectrum entry for this target: exp(-j 4pi d / lam) * beta."""
        return np.exp(-1j * 4 * np.pi * self.range / wavelength) * self.beta


@dataclass(frozen=True)
class Jammer:
    range: float
    azimuth: float
    beta: complex
    waveform: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.waveform, dtype=complex).ravel()
        if abs(np.linalg.norm(b) - 1.0) > 1e-12:
            raise ValueError("jammer waveform must have unit norm")
        if not self.range > 0:
            raise ValueError("jammer range must be positive")
        b.setflags(write=False)
        object.__setattr__(self, "waveform", b)
        object.__setattr__(self, "beta", complex(self.beta))


@dataclass(frozen=True)
class WaveformMatrix:
    """L x Mt transmit samples; row n is the vector x(n) sent at snapshot n."""

    samples: np.ndarray
    orthonormal: bool = True

    @property
    def snapshot_count(self):
        return self.samples.shape[0]

    @property
    def n_tx(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    variance: float = 0.0

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError("noise variance must be non-negative")

    def draw(self, shape, rng):
        """Circularly symmetric complex Gaussian samples of total variance ``variance``."""
        if self.variance == 0:
            return np.zeros(shape, dtype=complex)
        scale = np.sqrt(self.variance / 2)
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ReceivedSignal:
    """Snapshots of every receive antenna, one row per antenna (M_r x L)."""

    snapshots: np.ndarray
    noise_variance: float
    off_grid: tuple = ()

    def antenna(self, l):
        return self.snapshots[l]


def wavelength_from_frequency(carrier_hz):
    return SPEED_OF_LIGHT / carrier_hz


def random_geometry(n_tx, n_rx, wavelength, radius, rng, shared=False):
    """Drop antennas uniformly on a disk of ``radius`` meters around the origin.

    With ``shared=True`` the receive antennas reuse the first ``n_rx``
    transmit positions (requires ``n_rx <= n_tx``).
    """
    if radius <= 0:
        raise ValueError("disk radius must be positive")

    def disk(count):
        rho = radius * np.sqrt(rng.uniform(size=count))
        phi = rng.uniform(0, 2 * np.pi, size=count)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])

    tx = disk(n_tx)
    if shared:
        if n_rx > n_tx:
            raise ValueError("shared positions need n_rx <= n_tx")
        rx = tx[:n_rx].copy()
    else:
        rx = disk(n_rx)
    return ArrayGeometry(tx, rx, wavelength)


def project_aperture(position, azimuth):
    """Path-length advance of an antenna at ``position`` toward ``azimuth``."""
    x, y = position
    return x * np.cos(azimuth) + y * np.sin(azimuth)


def steering_vector(geometry, side, azimuth):
    """Per-antenna phase signature exp(j 2pi/lam * eta_i(azimuth)).

    ``azimuth`` may be a scalar (returns a vector) or an array of angles
    (returns one column per angle).
    """
    if side == "tx":
        pos = geometry.tx_positions
    elif side == "rx":
        pos = geometry.rx_positions
    else:
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")
    az = np.asarray(azimuth, dtype=float)
    eta = np.multiply.outer(pos[:, 0], np.cos(az)) + np.multiply.outer(pos[:, 1], np.sin(az))
    return np.exp(2j * np.pi / geometry.wavelength * eta)


def generate_waveforms(n_tx, snapshots, rng, orthonormalize=True):
    """Draw i.i.d. QPSK symbols {+-1 +-j}/sqrt(2L) and orthonormalize the columns.

    The QR factor is sign-normalized (positive diagonal of R) so the result is
    a deterministic function of the draw.
    """
    if n_tx < 1:
        raise ValueError("need at least one transmit antenna")
    if snapshots < n_tx:
        raise ValueError(f"L={snapshots} < Mt={n_tx}: orthonormal columns impossible")
    bits = rng.integers(0, 2, size=(2, snapshots, n_tx))
    raw = ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) / np.sqrt(2 * snapshots)
    if not orthonormalize:
        return WaveformMatrix(raw, orthonormal=False)
    q, r = np.linalg.qr(raw)
    phase = np.diagonal(r) / np.abs(np.diagonal(r))
    return WaveformMatrix(q * phase[None, :], orthonormal=True)


def draw_jammer_waveform(snapshots, rng):
    """Unit-norm complex Gaussian jammer waveform of length L."""
    b = rng.standard_normal(snapshots) + 1j * rng.standard_normal(snapshots)
    return b / np.linalg.norm(b)


def target_terms(geometry, X, targets):
    """Noiseless per-antenna contributions of all targets, shape (M_r, L)."""
    lam = geometry.wavelength
    z = np.zeros((geometry.n_rx, X.shape[0]), dtype=complex)
    for tgt in targets:
        v = steering_vector(geometry, "tx", tgt.azimuth)
        a_r = steering_vector(geometry, "rx", tgt.azimuth)
        z += np.outer(tgt.grid_amplitude(lam) * a_r, X @ v)
    return z


def jammer_term(geometry, jammer):
    """Jammer contribution at every receive antenna, shape (M_r, L)."""
    lam = geometry.wavelength
    a_r = steering_vector(geometry, "rx", jammer.azimuth)
    gain = np.exp(-2j * np.pi / lam * jammer.range) * jammer.beta * a_r
    return np.outer(gain, jammer.waveform)


def signal_power(geometry, X, targets):
    """Mean per-sample power of the noiseless target echo over snapshots and antennas."""
    z = target_terms(geometry, np.asarray(getattr(X, "samples", X)), targets)
    return float(np.mean(np.abs(z) ** 2))


def snr_to_sigma(targets, geometry, X, snr_db):
    """Noise variance giving ``snr_db`` relative to the mean received target power."""
    if not targets:
        raise ValueError("SNR is undefined without targets")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    p_sig = signal_power(geometry, X, targets)
    if p_sig <= 0:
        raise ValueError("SNR is undefined for a zero-signal scene")
    return p_sig / 10 ** (snr_db / 10)


def off_grid_targets(targets, grid_angles, tol=1e-9):
    """Indices of targets whose azimuth does not coincide with a grid angle."""
    grid_angles = np.asarray(grid_angles)
    flagged = []
    for k, tgt in enumerate(targets):
        if np.min(np.abs(grid_angles - tgt.azimuth)) > tol:
            flagged.append(k)
    return tuple(flagged)


def synthesize_received(geometry, X, targets=(), jammer=None, noise=None, rng=None,
                        grid_angles=None):
    """Build the snapshot matrix Z (M_r x L) for targets, an optional jammer and noise.

    ``X`` may be a :class:`WaveformMatrix` or a raw L x Mt array.  Noise needs
    ``rng`` whenever its variance is positive.  Targets off ``grid_angles``
    are allowed and reported in ``off_grid``.
    """
    X = np.asarray(getattr(X, "samples", X))
    L = X.shape[0]
    if X.shape[1] != geometry.n_tx:
        raise ValueError("waveform columns must match the transmit antenna count")
    for tgt in targets:
        if tgt.range < FAR_FIELD_FACTOR * geometry.radius:
            warnings.warn(f"target at {tgt.range} m violates the far-field assumption "
                          f"for array radius {geometry.radius:.3g} m", stacklevel=2)
    z = target_terms(geometry, X, targets)
    if jammer is not None:
        if jammer.waveform.shape[0] != L:
            raise ValueError("jammer waveform length must equal L")
        z += jammer_term(geometry, jammer)
    noise = noise or NoiseModel(0.0)
    if noise.variance > 0:
        if rng is None:
            raise ValueError("an RNG stream is required for noisy synthesis")
        z += noise.draw(z.shape, rng)
    flagged = off_grid_targets(targets, grid_angles) if grid_angles is not None else ()
    return ReceivedSignal(z, noise.variance, flagged)
