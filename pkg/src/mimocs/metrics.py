"""Peak-to-ripple ratio and signal-to-jammer ratio analysis."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import draw_measurement
from .geometry import (Jammer, target_terms, draw_jammer_waveform, generate_waveforms,
                       jammer_term, steering_vector)
from .rng import Purpose, stream


def prr(spectrum, target_indices):
    """Energy at the target bins over the energy everywhere else.

    Returns ``inf`` when the spectrum has no ripple at all.
    """
    mag = np.abs(np.asarray(spectrum, dtype=complex if np.iscomplexobj(spectrum) else float))
    idx = np.unique(np.asarray(list(target_indices), dtype=int))
    if idx.size == 0:
        raise ValueError("target index set is empty")
    if idx.min() < 0 or idx.max() >= mag.size:
        raise IndexError("target index out of range")
    power = mag ** 2
    peak = power[idx].sum()
    mask = np.ones(mag.size, bool)
    mask[idx] = False
    ripple = power[mask].sum()
    if ripple == 0:
        if peak == 0:
            raise ValueError("PRR of an all-zero spectrum is undefined")
        return np.inf
    return float(peak / ripple)


def to_db(ratio):
    if ratio == np.inf:
        return np.inf
    if ratio <= 0:
        return -np.inf
    return 10 * np.log10(ratio)


def theoretical_sjr(n_tx, L, target_betas, jammer_beta, kind):
    """Closed-form SJR: Mt sum|b_k|^2/|b|^2 (plain) or L sum|b_k|^2/|b|^2 (matched)."""
    jp = abs(jammer_beta) ** 2
    if jp == 0:
        raise ValueError("jammer amplitude must be nonzero")
    sp = float(np.sum(np.abs(np.asarray(target_betas, dtype=complex)) ** 2))
    if kind == "plain":
        return n_tx * sp / jp
    if kind == "matched":
        return L * sp / jp
    raise ValueError(f"unknown measurement kind {kind!r}")


@dataclass
class SjrReport:
    kind: str
    trials: int
    p_s: float
    p_j: float
    p_s_stderr: float
    p_j_stderr: float
    sjr_empirical: float
    sjr_theoretical: float
    c1: float
    c2: float
    c1_stderr: float
    c2_stderr: float

    @property
    def error_db(self):
        return to_db(self.sjr_empirical) - to_db(self.sjr_theoretical)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _sjr_trial(args):
    geometry, targets, jammer_spec, L, M, kind, seed, trial, n_active = args
    n_tx = geometry.n_tx
    X = generate_waveforms(n_tx, L, stream(seed, Purpose.WAVEFORM, trial)).samples
    b = draw_jammer_waveform(L, stream(seed, Purpose.JAMMER, trial))
    jam = Jammer(jammer_spec[0], jammer_spec[1], jammer_spec[2], b)
    z_sig = target_terms(geometry, X, targets)
    z_jam = jammer_term(geometry, jam)
    lam = geometry.wavelength
    # X v(theta_k) with the full per-antenna phase folded in per antenna below
    XV = X @ steering_vector(geometry, "tx", [t.azimuth for t in targets])
    ps = pj = c1 = c2 = 0.0
    for l in range(n_active):
        meas = draw_measurement(kind, M, L, n_tx, X, stream(seed, Purpose.MEASUREMENT, trial, l))
        F = meas.effective
        ps += np.linalg.norm(F @ z_sig[l]) ** 2
        pj += np.linalg.norm(F @ z_jam[l]) ** 2
        FXV = F @ XV
        R = FXV.conj().T @ FXV
        coef = np.array([t.grid_amplitude(lam) * steering_vector(geometry, "rx", t.azimuth)[l]
                         for t in targets])
        weighted = np.outer(coef.conj(), coef) * R
        diag = np.real(np.trace(weighted))
        c1 += diag
        c2 += np.real(weighted.sum()) - diag
    return ps / n_active, pj / n_active, c1 / n_active, c2 / n_active


def empirical_sjr(geometry, targets, jammer_range, jammer_azimuth, jammer_beta, L, M,
                  kind, trials, seed, n_active=None, workers=1):
    """Monte-Carlo signal and jammer power after compression.

    Geometry stays fixed; every trial redraws the waveforms, the jammer
    waveform and the measurement matrices from streams keyed by the trial
    index, so ``workers > 1`` gives results identical to ``workers == 1``.
    Powers are averaged over the active receive antennas and the trials.
    ``c1``/``c2`` split the desirable power into its self and cross terms.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if abs(jammer_beta) == 0:
        raise ValueError("jammer amplitude must be nonzero")
    if not targets:
        raise ValueError("need at least one target")
    n_active = geometry.n_rx if n_active is None else n_active
    jam = (jammer_range, jammer_azimuth, complex(jammer_beta))
    jobs = [(geometry, tuple(targets), jam, L, M, kind, seed, t, n_active)
            for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sjr_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        rows = [_sjr_trial(j) for j in jobs]
    data = np.array(rows)
    mean = data.mean(axis=0)
    se = data.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(4)
    p_s, p_j, c1, c2 = mean
    return SjrReport(kind=kind, trials=trials, p_s=p_s, p_j=p_j,
                     p_s_stderr=se[0], p_j_stderr=se[1],
                     sjr_empirical=p_s / p_j if p_j > 0 else np.inf,
                     sjr_theoretical=theoretical_sjr(geometry.n_tx, L,
                                                     [t.beta for t in targets],
                                                     jammer_beta, kind),
                     c1=c1, c2=c2, c1_stderr=se[2], c2_stderr=se[3])
