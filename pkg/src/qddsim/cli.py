"""Command-line front end: ``qddsim run | presets | closure | workspace``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import closure
from .config import ConfigError
from .contact import ContactPoint
from .scenarios import (config_to_dict, get_preset, list_presets, load_config,
                        run_scenario)
from .sim import HandGeometry
from .transmission import FingerGeometry, sample_workspace

EXIT_FAIL = 1
EXIT_USAGE = 2


def _report(result, out=None):
    out = out or sys.stdout
    s = result.summary
    status = "PASS" if result.success else "FAIL"
    line = f"{status} {result.config.name}"
    if not result.success:
        line += f": {result.reason}"
    print(line, file=out)
    print(f"  summary: {result.files.get('summary', '')}", file=out)
    if "rms_error_m" in s:
        print(f"  rms_error_m: {s['rms_error_m']:.6g}", file=out)


def _run_named(args):
    name, out_dir, seed = args
    res = run_scenario(get_preset(name), out_dir, seed)
    return name, res.success, res.reason, res.files.get("summary", "")


def cmd_run(ns) -> int:
    if ns.all:
        names = [n for n, _ in list_presets()]
        jobs = [(n, ns.out_dir, ns.seed) for n in names]
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_run_named, jobs))
        failed = 0
        for name, ok, reason, path in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}" + ("" if ok else f": {reason}"))
            failed += not ok
        print(f"{len(results) - failed}/{len(results)} scenarios passed")
        return 0 if failed == 0 else EXIT_FAIL
    if ns.config and ns.preset:
        print("error: give either --config or --preset, not both", file=sys.stderr)
        return EXIT_USAGE
    if ns.config:
        cfg = load_config(ns.config)
    elif ns.preset:
        cfg = get_preset(ns.preset)
    else:
        print("error: one of --config, --preset or --all is required", file=sys.stderr)
        return EXIT_USAGE
    result = run_scenario(cfg, ns.out_dir, ns.seed)
    _report(result)
    return result.exit_code


def cmd_presets(ns) -> int:
    if ns.show:
        print(json.dumps(config_to_dict(get_preset(ns.show)), indent=2))
        return 0
    for name, desc in list_presets():
        print(f"{name:22s} {desc}")
    return 0


def _grasp_contacts(data):
    if not isinstance(data, dict):
        raise ValueError("grasp file must hold a JSON object")
    unknown = set(data) - {"name", "object", "contacts"}
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r}")
    raw = data.get("contacts")
    if not isinstance(raw, list) or not raw:
        raise ValueError("'contacts' must be a non-empty list")
    out = []
    for k, c in enumerate(raw):
        if not isinstance(c, dict) or set(c) - {"position", "normal", "mu", "tag"}:
            raise ValueError(f"contacts[{k}]: expected keys position, normal, mu")
        try:
            pos = [float(v) for v in c["position"]]
            n = np.array([float(v) for v in c["normal"]])
            mu = float(c.get("mu", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"contacts[{k}]: {exc}") from None
        if len(pos) != 2 or n.shape != (2,) or not np.all(np.isfinite(np.r_[pos, n, mu])):
            raise ValueError(f"contacts[{k}]: position and normal must be finite 2-vectors")
        norm = float(np.hypot(*n))
        if norm == 0.0:
            raise ValueError(f"contacts[{k}]: zero normal")
        try:
            out.append(ContactPoint(tuple(pos), tuple(n / norm), mu))
        except ValueError as exc:
            raise ValueError(f"contacts[{k}]: {exc}") from None
    return out


def _fmt_vec(v):
    return "[" + ", ".join(f"{x:.12g}" for x in v) + "]"


def cmd_closure(ns) -> int:
    try:
        with open(ns.grasp) as fh:
            contacts = _grasp_contacts(json.load(fh))
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {ns.grasp}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    form = closure.form_closure(contacts)
    force = closure.force_closure(contacts)
    force_ok = force.closed
    if len(contacts) == 2:
        force_ok = closure.force_closure_2contact(*contacts)
    print(f"form_closure: {'true' if form.closed else 'false'}")
    if form.closed:
        print(f"form_closure_lambda: {_fmt_vec(form.certificate)}")
    print(f"force_closure: {'true' if force_ok else 'false'}")
    if force_ok and force.certificate is not None:
        print(f"force_closure_lambda: {_fmt_vec(force.certificate)}")
    return 0


def cmd_workspace(ns) -> int:
    if ns.config:
        plant = load_config(ns.config).plant
        geom, hand = plant.geometry(), plant.hand()
    else:
        geom, hand = FingerGeometry(), HandGeometry()
    if ns.l1 is not None or ns.l2 is not None:
        geom = FingerGeometry(ns.l1 or geom.l1, ns.l2 or geom.l2, geom.theta1_limits,
                              geom.theta2_limits)
    if ns.finger_spacing is not None:
        hand = HandGeometry(finger_spacing=ns.finger_spacing)
    if ns.grid < 2:
        print("error: --grid must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    pts = sample_workspace(geom, ns.grid)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["finger", "x_m", "y_m"])
    for i in range(2):
        for p in pts:
            x, y = hand.finger_to_hand(i, p)
            w.writerow([i, repr(float(x)), repr(float(y))])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qddsim", description="Two-finger QDD hand simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its trace and summary")
    r.add_argument("--config", help="scenario JSON file")
    r.add_argument("--preset", help="built-in scenario name")
    r.add_argument("--all", action="store_true", help="run every built-in scenario")
    r.add_argument("--jobs", type=int, default=None, help="parallel workers for --all")
    r.add_argument("--out-dir", help="output directory (overrides QDDSIM_OUT and config)")
    r.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    r.set_defaults(fn=cmd_run)

    ps = sub.add_parser("presets", help="list or show built-in scenarios")
    ps.add_argument("--list", action="store_true", help="list preset names (default)")
    ps.add_argument("--show", metavar="NAME", help="print a preset as a JSON config")
    ps.set_defaults(fn=cmd_presets)

    c = sub.add_parser("closure", help="form- and force-closure verdicts for a grasp file")
    c.add_argument("--grasp", required=True, help="grasp JSON file")
    c.set_defaults(fn=cmd_closure)

    w = sub.add_parser("workspace", help="CSV of both fingertips' sampled workspaces")
    w.add_argument("--grid", type=int, default=50, help="samples per joint (>= 2)")
    w.add_argument("--config", help="take geometry from a scenario file")
    w.add_argument("--l1", type=float)
    w.add_argument("--l2", type=float)
    w.add_argument("--finger-spacing", type=float)
    w.set_defaults(fn=cmd_workspace)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.fn(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
