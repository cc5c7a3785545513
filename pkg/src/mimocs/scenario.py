"""Experiment description: parsing, validation and defaults.

A scenario is a JSON document.  Angles are degrees, frequency Hz, ranges
meters, amplitudes linear (a number or a ``[re, im]`` pair).  Unknown keys
are rejected.  Defaults for omitted optional fields:

======================  =======================================
carrier_hz              8.62e9
array.radius_wavelengths  50
array.shared_positions  false
active_rx               array.n_rx
jammer                  none
snr_db                  none (noiseless)
solver.mu               none (threshold rule from sigma^2)
solver.t                1.0
solver.kind             "matched"
solver.norm             "complex"
solver.equilibrate      false
solver.shared_measurement  false
solver.max_iter         200
solver.log_base         "e"
waveforms.orthonormalize  true
baselines.loading       none (1e-6 trace(R)/N_r)
refine                  none
sweep                   none (CLI must then give --axis/--values)
trials                  50
======================  =======================================
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .estimator import build_angle_grid
from .geometry import Target, wavelength_from_frequency


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


_TOP = {"name", "carrier_hz", "array", "snapshots", "measurements", "active_rx", "grid",
        "targets", "jammer", "snr_db", "solver", "waveforms", "baselines", "refine",
        "trials", "seed", "description", "sweep"}
_ARRAY = {"n_tx", "n_rx", "radius_wavelengths", "shared_positions", "tx_positions",
          "rx_positions"}
_GRID = {"start_deg", "stop_deg", "step_deg"}
_EMITTER = {"range_m", "azimuth_deg", "beta"}
_SOLVER = {"mu", "t", "kind", "norm", "equilibrate", "shared_measurement", "max_iter",
           "log_base"}
_WAVEFORMS = {"orthonormalize"}
_BASELINES = {"loading"}
_REFINE = {"window_deg", "step_deg", "threshold"}
_SWEEP = {"axis", "values"}

_SOLVER_DEFAULTS = {"mu": None, "t": 1.0, "kind": "matched", "norm": "complex",
                    "equilibrate": False, "shared_measurement": False, "max_iter": 200,
                    "log_base": "e"}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be an object", where)
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(f"unknown key {extra[0]!r} in {where or 'scenario'}",
                            f"{where}.{extra[0]}" if where else extra[0])


def _complex(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ScenarioError(f"{where} must be a number or [re, im]", where)


def _positive(value, where, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or not value > 0:
        raise ScenarioError(f"{where} must be a positive {'integer' if integer else 'number'}",
                            where)
    return value


@dataclass(frozen=True)
class Emitter:
    range_m: float
    azimuth_deg: float
    beta: complex


@dataclass(frozen=True)
class Scenario:
    name: str
    carrier_hz: float
    n_tx: int
    n_rx: int
    radius_wavelengths: float
    shared_positions: bool
    tx_positions: tuple
    rx_positions: tuple
    snapshots: int
    measurements: int
    active_rx: int
    grid_spec: tuple
    targets: tuple
    jammer: Emitter
    snr_db: float
    solver: dict
    orthonormalize: bool
    loading: float
    refine: dict
    sweep: dict
    trials: int
    seed: int
    raw: dict = field(repr=False, compare=False, default=None)

    @property
    def wavelength(self):
        return wavelength_from_frequency(self.carrier_hz)

    @property
    def grid(self):
        return build_angle_grid(*self.grid_spec)

    @property
    def kind(self):
        return self.solver["kind"]

    def target_objects(self):
        return [Target(t.range_m, float(np.deg2rad(t.azimuth_deg)), t.beta)
                for t in self.targets]

    def config_hash(self):
        """Short digest of the configuration, independent of the seed."""
        doc = copy.deepcopy(self.raw)
        doc.pop("seed", None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def replace(self, **changes):
        """Copy with top-level config entries replaced, re-validated."""
        doc = copy.deepcopy(self.raw)
        doc["seed"] = self.seed
        for key, value in changes.items():
            if key in _SOLVER:
                doc.setdefault("solver", {})[key] = value
            else:
                doc[key] = value
        return scenario_from_dict(doc)


def scenario_from_dict(doc, seed=None):
    """Validate a parsed config document and apply defaults."""
    _check_keys(doc, _TOP, "")
    raw = copy.deepcopy(doc)
    if seed is not None:
        raw["seed"] = seed
    if "seed" not in raw or raw["seed"] is None:
        raise ScenarioError("a master seed is required", "seed")
    seed = raw["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed must be a non-negative integer", "seed")

    carrier = _positive(doc.get("carrier_hz", 8.62e9), "carrier_hz")

    arr = doc.get("array")
    if arr is None:
        raise ScenarioError("missing array description", "array")
    _check_keys(arr, _ARRAY, "array")
    tx_pos = rx_pos = ()
    if "tx_positions" in arr or "rx_positions" in arr:
        try:
            tx_pos = tuple(tuple(float(c) for c in p) for p in arr["tx_positions"])
            rx_pos = tuple(tuple(float(c) for c in p) for p in arr["rx_positions"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("explicit positions need tx_positions and rx_positions "
                                "as lists of [x, y]", "array.tx_positions")
        if any(len(p) != 2 for p in tx_pos + rx_pos) or not tx_pos or not rx_pos:
            raise ScenarioError("positions must be non-empty lists of [x, y]",
                                "array.tx_positions")
        n_tx, n_rx = len(tx_pos), len(rx_pos)
    else:
        n_tx = _positive(arr.get("n_tx"), "array.n_tx", integer=True)
        n_rx = _positive(arr.get("n_rx"), "array.n_rx", integer=True)
    radius = _positive(arr.get("radius_wavelengths", 50), "array.radius_wavelengths")
    shared = bool(arr.get("shared_positions", False))
    if shared and n_rx > n_tx:
        raise ScenarioError("shared_positions needs n_rx <= n_tx", "array.shared_positions")

    L = _positive(doc.get("snapshots"), "snapshots", integer=True)
    M = _positive(doc.get("measurements"), "measurements", integer=True)
    n_active = _positive(doc.get("active_rx", n_rx), "active_rx", integer=True)
    if n_active > n_rx:
        raise ScenarioError(f"active_rx={n_active} exceeds n_rx={n_rx}", "active_rx")
    if L < n_tx:
        raise ScenarioError(f"snapshots={L} must be >= n_tx={n_tx}", "snapshots")

    solver = dict(_SOLVER_DEFAULTS)
    sdoc = doc.get("solver", {})
    _check_keys(sdoc, _SOLVER, "solver")
    solver.update(sdoc)
    if solver["kind"] not in ("plain", "matched"):
        raise ScenarioError("solver.kind must be 'plain' or 'matched'", "solver.kind")
    if solver["norm"] not in ("complex", "split"):
        raise ScenarioError("solver.norm must be 'complex' or 'split'", "solver.norm")
    if solver["mu"] is not None and not (isinstance(solver["mu"], (int, float))
                                         and solver["mu"] >= 0):
        raise ScenarioError("solver.mu must be a non-negative number", "solver.mu")
    _positive(solver["t"], "solver.t")
    _positive(solver["max_iter"], "solver.max_iter", integer=True)
    if solver["log_base"] == "e":
        solver["log_base"] = float(np.e)
    else:
        _positive(solver["log_base"], "solver.log_base")
    if solver["kind"] == "plain" and M > L:
        raise ScenarioError(f"measurements={M} exceeds snapshots={L} for the plain kind",
                            "measurements")
    if solver["kind"] == "matched" and M > n_tx:
        raise ScenarioError(f"measurements={M} exceeds n_tx={n_tx} for the matched kind",
                            "measurements")

    gdoc = doc.get("grid")
    if gdoc is None:
        raise ScenarioError("missing grid", "grid")
    _check_keys(gdoc, _GRID, "grid")
    try:
        gspec = (float(gdoc["start_deg"]), float(gdoc["stop_deg"]), float(gdoc["step_deg"]))
        build_angle_grid(*gspec)
    except KeyError as exc:
        raise ScenarioError(f"grid is missing {exc.args[0]}", f"grid.{exc.args[0]}")
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid grid: {exc}", "grid")

    def emitter(e, where):
        _check_keys(e, _EMITTER, where)
        rng_m = _positive(e.get("range_m"), f"{where}.range_m")
        az = e.get("azimuth_deg")
        if isinstance(az, bool) or not isinstance(az, (int, float)) or not -180 < az <= 180:
            raise ScenarioError(f"{where}.azimuth_deg must lie in (-180, 180]",
                                f"{where}.azimuth_deg")
        return Emitter(float(rng_m), float(az), _complex(e.get("beta", 1.0), f"{where}.beta"))

    tdoc = doc.get("targets", [])
    if not isinstance(tdoc, list):
        raise ScenarioError("targets must be a list", "targets")
    targets = tuple(emitter(t, f"targets[{i}]") for i, t in enumerate(tdoc))
    jammer = None
    if doc.get("jammer") is not None:
        jammer = emitter(doc["jammer"], "jammer")
        if jammer.beta == 0:
            raise ScenarioError("jammer.beta must be nonzero (omit the jammer instead)",
                                "jammer.beta")

    snr = doc.get("snr_db")
    if snr is not None:
        if isinstance(snr, bool) or not isinstance(snr, (int, float)) or not np.isfinite(snr):
            raise ScenarioError("snr_db must be a finite number", "snr_db")
        if not targets:
            raise ScenarioError("snr_db needs at least one target", "snr_db")

    wdoc = doc.get("waveforms", {})
    _check_keys(wdoc, _WAVEFORMS, "waveforms")
    bdoc = doc.get("baselines", {})
    _check_keys(bdoc, _BASELINES, "baselines")
    loading = bdoc.get("loading")
    if loading is not None and not (isinstance(loading, (int, float)) and loading >= 0):
        raise ScenarioError("baselines.loading must be non-negative", "baselines.loading")

    refine = doc.get("refine")
    if refine is not None:
        _check_keys(refine, _REFINE, "refine")
        window = _positive(refine.get("window_deg"), "refine.window_deg")
        step = _positive(refine.get("step_deg"), "refine.step_deg")
        if step >= window:
            raise ScenarioError("refine.step_deg must be below refine.window_deg",
                                "refine.step_deg")
        refine = {"window_deg": float(window), "step_deg": float(step),
                  "threshold": float(refine.get("threshold", 0.1))}

    sweep = doc.get("sweep")
    if sweep is not None:
        _check_keys(sweep, _SWEEP, "sweep")
        if sweep.get("axis") not in ("L", "M", "N_r", "snr_db"):
            raise ScenarioError("sweep.axis must be one of L, M, N_r, snr_db", "sweep.axis")
        values = sweep.get("values")
        if not isinstance(values, list) or not values:
            raise ScenarioError("sweep.values must be a non-empty list", "sweep.values")
        sweep = {"axis": sweep["axis"], "values": list(values)}

    trials = _positive(doc.get("trials", 50), "trials", integer=True)

    return Scenario(
        name=str(doc.get("name", "scenario")), carrier_hz=float(carrier), n_tx=n_tx,
        n_rx=n_rx, radius_wavelengths=float(radius), shared_positions=shared,
        tx_positions=tx_pos, rx_positions=rx_pos, snapshots=L, measurements=M,
        active_rx=n_active, grid_spec=gspec, targets=targets, jammer=jammer,
        snr_db=None if snr is None else float(snr), solver=solver,
        orthonormalize=bool(wdoc.get("orthonormalize", True)), loading=loading,
        refine=refine, sweep=sweep, trials=trials, seed=seed, raw=raw)


def load_scenario(path, seed=None):
    """Read and validate a scenario file; ``seed`` overrides the file's seed."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}", "path")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", None, exc.lineno)
    return scenario_from_dict(doc, seed=seed)
