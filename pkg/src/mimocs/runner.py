"""Experiment orchestration and CSV / gnuplot data output."""

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .estimator import (DantzigError, build_basis, build_sensing_operator, draw_measurement,
                        find_peaks, refine_grid, select_threshold, solve_dantzig)
from .geometry import (ArrayGeometry, Jammer, NoiseModel, draw_jammer_waveform,
                       generate_waveforms, random_geometry, snr_to_sigma, synthesize_received)
from .metrics import empirical_sjr, prr, to_db
from .rng import Purpose, stream
from .scenario import ScenarioError

log = logging.getLogger(__name__)

METHODS = ("cs", "capon", "apes", "glrt")
SWEEP_AXES = ("L", "M", "N_r", "snr_db")

SPECTRUM_COLUMNS = ("method", "angle_deg", "magnitude", "phase_rad",
                    "seed", "config_hash", "M", "L", "N_r")
PRR_COLUMNS = ("method", "prr", "prr_db", "peaks_deg", "seed", "config_hash", "M", "L", "N_r")
SWEEP_COLUMNS = ("axis", "value", "method", "trial", "prr", "prr_db",
                 "seed", "config_hash", "M", "L", "N_r")
SUMMARY_COLUMNS = ("axis", "value", "method", "trials", "mean_prr_db", "stderr_prr_db",
                   "seed", "config_hash", "M", "L", "N_r")


class RunError(RuntimeError):
    """A method failed mid-run; ``partial`` holds what was computed before it."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class MethodOutput:
    degrees: np.ndarray
    values: np.ndarray
    prr: float
    peaks_deg: tuple
    info: dict = field(default_factory=dict)

    @property
    def magnitude(self):
        return np.abs(self.values)


@dataclass
class RunResult:
    name: str
    seed: int
    trial: int
    config_hash: str
    M: int
    L: int
    N_r: int
    sigma2: float
    mu: float
    outputs: dict
    target_indices: tuple
    off_grid: tuple
    support_recovered: object = None
    wall_time: float = 0.0

    @property
    def provenance(self):
        return dict(seed=self.seed, config_hash=self.config_hash, M=self.M, L=self.L,
                    N_r=self.N_r)


def build_geometry(scn, trial=0):
    if scn.tx_positions:
        return ArrayGeometry(np.array(scn.tx_positions), np.array(scn.rx_positions),
                             scn.wavelength)
    lam = scn.wavelength
    return random_geometry(scn.n_tx, scn.n_rx, lam, scn.radius_wavelengths * lam,
                           stream(scn.seed, Purpose.GEOMETRY, trial), scn.shared_positions)


def _target_indices(grid, targets_deg):
    return tuple(sorted({int(np.argmin(np.abs(grid.degrees - a))) for a in targets_deg}))


def _cs_pass(scn, geometry, X, Z, grid, meas, mu):
    pairs = [(meas[l], build_basis(geometry, X, grid, l)) for l in range(scn.active_rx)]
    op, r = build_sensing_operator(pairs, [Z[l] for l in range(scn.active_rx)])
    opts = scn.solver
    return solve_dantzig(op, r, mu, norm=opts["norm"], equilibrate=opts["equilibrate"],
                         max_iter=opts["max_iter"])


def _method_output(grid, values, targets_deg, n_targets, info=None):
    idx = _target_indices(grid, targets_deg)
    mag = np.abs(values)
    try:
        ratio = prr(mag, idx) if idx else np.nan
    except ValueError:
        ratio = np.nan
    peaks = find_peaks(mag)[:max(n_targets, 1)]
    return MethodOutput(grid.degrees, np.asarray(values), ratio,
                        tuple(float(grid.degrees[k]) for k in peaks), info or {})


def run_scenario(scn, methods=METHODS, trial=0):
    """Synthesize one scene and run every requested estimator on it.

    CS sees ``M`` compressed samples per active antenna; the baselines see
    all ``L`` snapshots of the same antennas.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    start = time.perf_counter()
    seed = scn.seed
    geometry = build_geometry(scn, trial)
    L, M, Nr = scn.snapshots, scn.measurements, scn.active_rx
    X = generate_waveforms(scn.n_tx, L, stream(seed, Purpose.WAVEFORM, trial),
                           orthonormalize=scn.orthonormalize)
    targets = scn.target_objects()
    grid = scn.grid
    jammer = None
    if scn.jammer is not None:
        b = draw_jammer_waveform(L, stream(seed, Purpose.JAMMER, trial))
        jammer = Jammer(scn.jammer.range_m, float(np.deg2rad(scn.jammer.azimuth_deg)),
                        scn.jammer.beta, b)
    sigma2 = 0.0 if scn.snr_db is None else snr_to_sigma(targets, geometry, X, scn.snr_db)
    log.debug("trial %d: sigma^2 = %.6g", trial, sigma2)
    received = synthesize_received(geometry, X, targets, jammer, NoiseModel(sigma2),
                                   stream(seed, Purpose.NOISE, trial), grid.angles)
    Z = received.snapshots
    mu = scn.solver["mu"]
    if mu is None:
        mu = select_threshold(len(grid), sigma2, scn.solver["t"], scn.solver["log_base"])
    targets_deg = [t.azimuth_deg for t in scn.targets]
    K = len(targets_deg)

    result = RunResult(scn.name, seed, trial, scn.config_hash(), M, L, Nr, sigma2, float(mu),
                       {}, _target_indices(grid, targets_deg), received.off_grid)
    try:
        if "cs" in methods:
            meas = []
            for l in range(Nr):
                key = 0 if scn.solver["shared_measurement"] else l
                meas.append(draw_measurement(scn.kind, M, L, scn.n_tx, X,
                                             stream(seed, Purpose.MEASUREMENT, trial, key)))
            est = _cs_pass(scn, geometry, X, Z, grid, meas, mu)
            if scn.refine is not None:
                result.outputs["cs_coarse"] = _method_output(grid, est.values, targets_deg, K,
                                                             est.info)
                fine = refine_grid(est, grid, scn.refine["window_deg"], scn.refine["step_deg"],
                                   scn.refine["threshold"])
                est = _cs_pass(scn, geometry, X, Z, fine, meas, mu)
                result.outputs["cs"] = _method_output(fine, est.values, targets_deg, K,
                                                      est.info)
            else:
                result.outputs["cs"] = _method_output(grid, est.values, targets_deg, K,
                                                      est.info)
            if not received.off_grid and K:
                support = set(est.support().tolist())
                true = set(_target_indices(est.grid, targets_deg))
                result.support_recovered = support == true
        for name in ("capon", "apes", "glrt"):
            if name in methods:
                fn = getattr(baselines, "glrt_statistic" if name == "glrt"
                             else f"{name}_spectrum")
                spec = fn(Z[:Nr], X, geometry, grid, scn.loading)
                result.outputs[name] = _method_output(grid, spec.values, targets_deg, K,
                                                      spec.flags)
    except DantzigError as exc:
        result.wall_time = time.perf_counter() - start
        raise RunError(str(exc), result) from exc
    result.wall_time = time.perf_counter() - start
    return result


def _fmt(x):
    if isinstance(x, float):
        return repr(x) if np.isfinite(x) else ("inf" if x > 0 else ("-inf" if x < 0 else "nan"))
    return x


def spectra_rows(result):
    prov = result.provenance
    for method, out in result.outputs.items():
        for ang, val in zip(out.degrees, out.values):
            yield dict(method=method, angle_deg=float(ang), magnitude=float(abs(val)),
                       phase_rad=float(np.angle(val)), **prov)


def prr_rows(result):
    prov = result.provenance
    for method, out in result.outputs.items():
        yield dict(method=method, prr=float(out.prr), prr_db=float(to_db(out.prr)),
                   peaks_deg=" ".join(f"{p:g}" for p in out.peaks_deg), **prov)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in columns})
    Path(path).write_text(buf.getvalue())


def write_spectrum_dat(path, result):
    """gnuplot data: one index block per method (``plot 'f' index i``)."""
    lines = [f"# {result.name} seed={result.seed} config={result.config_hash} "
             f"M={result.M} L={result.L} N_r={result.N_r}"]
    for i, (method, out) in enumerate(result.outputs.items()):
        if i:
            lines += ["", ""]
        lines.append(f"# index {i}: {method}  angle_deg magnitude")
        lines += [f"{a:.6f} {m:.10e}" for a, m in zip(out.degrees, out.magnitude)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_run(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "spectra.csv", SPECTRUM_COLUMNS, spectra_rows(result))
    write_csv(out / "prr.csv", PRR_COLUMNS, prr_rows(result))
    write_spectrum_dat(out / "spectra.dat", result)
    return out


def _axis_override(scn, axis, value):
    key = {"L": "snapshots", "M": "measurements", "N_r": "active_rx", "snr_db": "snr_db"}[axis]
    if axis != "snr_db":
        if float(value) != int(value):
            raise ScenarioError(f"{axis} must be an integer", key)
        value = int(value)
    return scn.replace(**{key: value})


def _sweep_job(args):
    scn, methods, trial = args
    res = run_scenario(scn, methods, trial)
    return {m: out.prr for m, out in res.outputs.items()}


def sweep(scn, axis, values, trials, methods=METHODS, workers=1):
    """Mean PRR per (axis value, method) over independent trials.

    Trial ``t`` uses the random streams keyed by ``t`` (geometry included),
    so trial 0 reproduces :func:`run_scenario` and every trial is identical
    however the work is distributed over ``workers`` processes.

    Returns:
        (rows, summary, skipped): per-trial rows, aggregated rows, and
        ``(value, reason)`` pairs for axis values that violate the scenario's
        dimension rules.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    if not values:
        raise ValueError("need at least one axis value")
    if trials < 1:
        raise ValueError("need at least one trial")
    jobs, variants, skipped = [], [], []
    for value in values:
        try:
            variant = _axis_override(scn, axis, value)
        except ScenarioError as exc:
            skipped.append((value, str(exc)))
            continue
        variants.append((value, variant))
        jobs += [(variant, tuple(methods), t) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    rows, summary = [], []
    it = iter(results)
    for value, variant in variants:
        prov = dict(seed=variant.seed, config_hash=scn.config_hash(), M=variant.measurements,
                    L=variant.snapshots, N_r=variant.active_rx)
        per_method = {}
        for t in range(trials):
            for method, ratio in next(it).items():
                db = float(to_db(ratio))
                per_method.setdefault(method, []).append(db)
                rows.append(dict(axis=axis, value=value, method=method, trial=t,
                                 prr=float(ratio), prr_db=db, **prov))
        for method, dbs in per_method.items():
            arr = np.array(dbs)
            mean = float(arr.mean())
            se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 and \
                np.all(np.isfinite(arr)) else 0.0
            summary.append(dict(axis=axis, value=value, method=method, trials=trials,
                                mean_prr_db=mean, stderr_prr_db=se, **prov))
    for value, reason in skipped:
        log.warning("skipped %s=%s: %s", axis, value, reason)
    return rows, summary, skipped


def write_sweep(rows, summary, skipped, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    write_csv(out / "sweep_summary.csv", SUMMARY_COLUMNS, summary)
    skip_rows = [dict(value=v, reason=r) for v, r in skipped]
    write_csv(out / "skipped.csv", ("value", "reason"), skip_rows)
    methods = list(dict.fromkeys(r["method"] for r in summary))
    values = list(dict.fromkeys(r["value"] for r in summary))
    table = {(r["value"], r["method"]): r for r in summary}
    lines = ["# " + " ".join(["value"] + [f"{m}_mean_db {m}_stderr_db" for m in methods])]
    for v in values:
        cells = [str(v)]
        for m in methods:
            r = table.get((v, m))
            cells += [f"{r['mean_prr_db']:.6f}", f"{r['stderr_prr_db']:.6f}"] if r else ["?", "?"]
        lines.append(" ".join(cells))
    (out / "sweep.dat").write_text("\n".join(lines) + "\n")
    return out


def run_sjr(scn, kind, trials, workers=1):
    """Empirical vs closed-form SJR for the scenario's targets and jammer."""
    if scn.jammer is None:
        raise ScenarioError("the SJR experiment needs a jammer", "jammer")
    if not scn.targets:
        raise ScenarioError("the SJR experiment needs targets", "targets")
    scn_kind = scn.replace(kind=kind)
    geometry = build_geometry(scn_kind, 0)
    return empirical_sjr(geometry, scn_kind.target_objects(), scn.jammer.range_m,
                         float(np.deg2rad(scn.jammer.azimuth_deg)), scn.jammer.beta,
                         scn.snapshots, scn.measurements, kind, trials, scn.seed,
                         n_active=scn.active_rx, workers=workers)
