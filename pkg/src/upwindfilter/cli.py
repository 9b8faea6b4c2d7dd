"""Command-line entry point ``upwindfilter``.

Exit codes: 0 when every assertion and margin passes, 1 when one fails,
2 for configuration errors.  Each invocation prints one JSON summary line.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from .config import ConfigError, config_from_dict, parse_config
from .evolve import BlowUpError, StepBoundError
from . import scenarios

log = logging.getLogger("upwindfilter")

SWEEPS = ("zero_filter_sweep", "filter_stability_sweep")

# used by ``resolvent-check`` when no config is given
_RESOLVENT_DEFAULT = {
    "name": "resolvent-default",
    "flux": {"name": "advection", "params": {"speed": 1.0}, "form": "operator"},
    "filter": {"name": "exponential", "alpha": 0.015625},
    "grid": {"dim": 1, "N": 1024, "length": 1.0},
    "integrator": {"scheme": "ssp_rk3", "t_end": 0.1},
    "initial": {"kind": "sine", "amp": 0.5},
    "scenario": {"kind": "resolvent_check", "alpha": 0.1, "Ns": [128, 256, 512]},
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="upwindfilter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required, help="YAML experiment file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None, help="worker threads for the operator")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="run the scenario named in the config"))
    common(sub.add_parser("sweep", help="run a zero_filter_sweep or filter_stability_sweep config"))
    common(sub.add_parser("operator-check", help="dump apply vs apply_raw discrepancies"))
    common(sub.add_parser("resolvent-check", help="exponential resolvent identities vs h"), False)
    an = sub.add_parser("analyze", help="recompute margins from a stored trajectory")
    an.add_argument("--trajectory", type=Path, required=True, help="directory with trajectory.json")
    an.add_argument("--out", type=Path, default=None)
    an.add_argument("--threads", type=int, default=None)
    an.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args, default=None):
    if args.config is None:
        cfg = config_from_dict(default)
    else:
        cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.initial["seed"] = None
    return cfg


def _dispatch(args) -> scenarios.ScenarioResult:
    if args.command == "analyze":
        out = args.out or args.trajectory
        out.mkdir(parents=True, exist_ok=True)
        return scenarios.analyze_trajectory(args.trajectory, out)
    if args.command == "resolvent-check":
        cfg = _load(args, _RESOLVENT_DEFAULT)
        cfg.scenario["kind"] = "resolvent_check"
    else:
        cfg = _load(args)
    out = args.out or Path(cfg.output["dir"])
    if args.command == "sweep" and cfg.scenario["kind"] not in SWEEPS:
        raise ConfigError(f"scenario.kind: 'sweep' needs one of {', '.join(SWEEPS)}")
    if args.command == "operator-check":
        out.mkdir(parents=True, exist_ok=True)
        return scenarios.operator_check(cfg, out)
    return scenarios.run_scenario(cfg, out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 2
        os.environ["UPWINDFILTER_THREADS"] = str(args.threads)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = _dispatch(args)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            print(json.dumps({"command": args.command, "passed": False, "error": str(exc)}))
            return 2
        except (BlowUpError, StepBoundError) as exc:
            print(f"assertion failed: {exc}", file=sys.stderr)
            print(json.dumps({"command": args.command, "passed": False, "error": str(exc)}))
            return 1
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    summary = result.summary()
    summary["command"] = args.command
    print(json.dumps(summary, default=float))
    for f in result.failures:
        print(f"assertion failed: {f}", file=sys.stderr)
    return 0 if result.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
