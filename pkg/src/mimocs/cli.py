"""Command-line entry point: ``mimocs simulate|sweep|sjr``.

Errors are reported as a single JSON object on stderr with a nonzero exit
status (2 for invalid input, 1 for numerical failures).
"""

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

from .estimator import DantzigError
from .metrics import to_db
from .runner import (METHODS, SWEEP_AXES, RunError, run_scenario, run_sjr, sweep, write_run,
                     write_sweep)
from .scenario import ScenarioError, load_scenario

log = logging.getLogger("mimocs")

SHIPPED = ("paper-fig1a", "paper-fig1b", "paper-fig2", "paper-sjr")


def shipped_config(name):
    """Path of a config bundled with the package."""
    return Path(str(resources.files("mimocs") / "configs" / f"{name}.json"))


def _resolve(config):
    path = Path(config)
    if not path.exists() and config in SHIPPED:
        return shipped_config(config)
    return path


def _methods(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be a subset of {','.join(METHODS)}")
    return names


def _values(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        num = float(item)
        out.append(int(num) if num.is_integer() and "." not in item else num)
    if not out:
        raise argparse.ArgumentTypeError("need at least one value")
    return out


def _seed(text):
    value = int(text)
    if value < 0 or value >= 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="mimocs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one scene, all requested estimators")
    p.add_argument("--config", required=True,
                   help="scenario file or shipped name (" + ", ".join(SHIPPED) + ")")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--methods", type=_methods, default=list(METHODS))

    p = sub.add_parser("sweep", help="mean PRR over trials along one parameter axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=_values)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--methods", type=_methods, default=list(METHODS))
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sjr", help="empirical vs closed-form signal-to-jammer ratio")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--kind", choices=("plain", "matched"), required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _error(kind, message, status, **extra):
    record = {"error": kind, "message": message}
    record.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(record), file=sys.stderr)
    return status


def _json_number(x):
    # JSON has no inf/nan literals
    return float(x) if math.isfinite(x) else str(x)


def _summary(result):
    return {
        "name": result.name, "seed": result.seed, "config_hash": result.config_hash,
        "M": result.M, "L": result.L, "N_r": result.N_r, "sigma2": result.sigma2,
        "mu": result.mu, "support_recovered": result.support_recovered,
        "off_grid_targets": list(result.off_grid), "wall_time_s": result.wall_time,
        "prr_db": {m: _json_number(to_db(o.prr)) for m, o in result.outputs.items()},
        "peaks_deg": {m: list(o.peaks_deg) for m, o in result.outputs.items()},
    }


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scn = load_scenario(_resolve(args.config), seed=args.seed)
        if args.command == "simulate":
            result = run_scenario(scn, args.methods)
            out = write_run(result, args.out)
            (out / "run.json").write_text(json.dumps(_summary(result), indent=2) + "\n")
            print(json.dumps(_summary(result)))
        elif args.command == "sweep":
            axis = args.axis or (scn.sweep or {}).get("axis")
            values = args.values or (scn.sweep or {}).get("values")
            if axis is None or not values:
                raise ScenarioError("sweep needs --axis and --values (or a sweep block)",
                                    "sweep")
            trials = args.trials or scn.trials
            rows, summary, skipped = sweep(scn, axis, values, trials, args.methods,
                                           workers=args.workers)
            write_sweep(rows, summary, skipped, args.out)
            print(json.dumps({"axis": axis, "values": values, "trials": trials,
                              "seed": scn.seed, "config_hash": scn.config_hash(),
                              "M": scn.measurements, "L": scn.snapshots,
                              "N_r": scn.active_rx, "skipped": [v for v, _ in skipped],
                              "summary": summary}, default=str))
        else:
            report = run_sjr(scn, args.kind, args.trials, workers=args.workers)
            record = report.as_dict()
            record.update(error_db=report.error_db, seed=scn.seed,
                          config_hash=scn.config_hash(), M=scn.measurements,
                          L=scn.snapshots, N_r=scn.active_rx)
            print(json.dumps(record))
    except ScenarioError as exc:
        return _error("ScenarioError", str(exc), 2, field=exc.field, line=exc.line)
    except (RunError, DantzigError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    except ValueError as exc:
        return _error("ValueError", str(exc), 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
