"""Batch command line: run, shrinker, blowup, verify, render.

Configuration comes from flags plus an optional JSON config file; flags
win.  Errors exit nonzero with a machine-readable JSON object on
stderr.  SPOONFLOW_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import blowup as blowup_mod
from . import diagnostics, runio
from .flow import FlowConfig, run
from .generators import GENERATORS, GeometryInfeasible, generate_initial
from .geometry import segments_intersect_scan
from .network import SpoonNetwork, check_containment
from .render import render_frames
from .shrinker import shoot_brakke_spoon, spoon_gaussian_density

log = logging.getLogger("spoonflow")

AREA_RATE = 5.0 * math.pi / 3.0


def _setup_logging():
    level = os.environ.get("SPOONFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(code: str, message: str, exit_code: int = 1) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return exit_code


def _merged_config(args, keys):
    """Config-file values overridden by explicitly passed flags."""
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(json.loads(Path(args.config).read_text()))
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _build_parser():
    p = argparse.ArgumentParser(prog="spoonflow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="evolve a network and write monitors + snapshots")
    runp.add_argument("--generator", choices=sorted(GENERATORS))
    runp.add_argument("--input", help="path to a network JSON file")
    runp.add_argument("--r", type=float, default=None)
    runp.add_argument("--a", type=float, default=None)
    runp.add_argument("--b", type=float, default=None)
    runp.add_argument("--lobe", type=float, default=None)
    runp.add_argument("--neck", type=float, default=None)
    runp.add_argument("--handle", type=float, default=None)
    runp.add_argument("--domain-radius", type=float, default=None)
    runp.add_argument("--n-loop", type=int, default=None)
    runp.add_argument("--n-handle", type=int, default=None)
    runp.add_argument("--cfl", type=float, default=None)
    runp.add_argument("--t-max", type=float, default=None)
    runp.add_argument("--monitor-every", type=int, default=None)
    runp.add_argument("--regrid-every", type=int, default=None)
    runp.add_argument("--density-center", type=str, default=None, metavar="X,Y")
    runp.add_argument("--no-embeddedness", action="store_true",
                      help="skip the E column (faster)")
    runp.add_argument("--config", type=str, default=None, help="JSON config file")
    runp.add_argument("--out", required=True)

    shr = sub.add_parser("shrinker", help="shoot the self-shrinking spoon profile")
    shr.add_argument("--ds", type=float, default=1e-3)
    shr.add_argument("--tolerance", type=float, default=1e-12)
    shr.add_argument("--halfline-length", type=float, default=None)
    shr.add_argument("--out", required=True)

    blw = sub.add_parser("blowup", help="rescale a finished run and classify the limit")
    blw.add_argument("rundir")
    blw.add_argument("--frak-t-min", type=float, default=None)
    blw.add_argument("--frak-t-max", type=float, default=None)
    blw.add_argument("--frak-t-step", type=float, default=0.1)
    blw.add_argument("--out", default=None, help="defaults to the run directory")

    ver = sub.add_parser("verify", help="re-check the invariants of a run directory")
    ver.add_argument("rundir")

    ren = sub.add_parser("render", help="write SVG frames of the snapshots")
    ren.add_argument("rundir")
    ren.add_argument("--out", default=None, help="defaults to rundir/frames")
    return p


def _cmd_run(args) -> int:
    gen_keys = ("r", "a", "b", "lobe", "neck", "handle", "domain_radius",
                "n_loop", "n_handle")
    flow_keys = ("n_loop", "n_handle", "cfl", "t_max", "monitor_every", "regrid_every")
    cfg = _merged_config(args, gen_keys + flow_keys + ("generator", "input", "density_center"))

    if cfg.get("generator") and cfg.get("input"):
        return _fail("usage", "pass either --generator or --input, not both", 2)
    if cfg.get("input"):
        net = SpoonNetwork.from_json(json.loads(Path(cfg["input"]).read_text()))
        n_loop = net.loop.n - 1
        n_handle = net.handle.n
    elif cfg.get("generator"):
        gparams = {k: cfg[k] for k in gen_keys if k in cfg}
        net = generate_initial(cfg["generator"], gparams)
        n_loop = net.loop.n - 1
        n_handle = net.handle.n
    else:
        return _fail("usage", "one of --generator or --input is required", 2)

    fc = FlowConfig(
        n_loop=n_loop,
        n_handle=n_handle,
        cfl=cfg.get("cfl", 0.2),
        t_max=cfg.get("t_max", math.inf),
        monitor_every=cfg.get("monitor_every", 100),
        regrid_every=cfg.get("regrid_every", 200),
    )
    log.info("running flow: %s", fc)
    result = run(net, fc)

    center = None
    if cfg.get("density_center"):
        center = np.array([float(v) for v in str(cfg["density_center"]).split(",")])
    density_T = 3.0 * result.initial_area / (5.0 * math.pi)
    records = diagnostics.monitor_series(
        result.snapshots, density_center=center, density_T=density_T,
        compute_E=not getattr(args, "no_embeddedness", False),
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runio.write_monitors_csv(out / "monitors.csv", records)
    runio.write_snapshots_jsonl(out / "snapshots.jsonl", result.snapshots)
    runio.write_stop_json(out / "stop.json", result.stop)
    log.info("stop: %s at t=%.6f", result.stop.kind, result.stop.t)
    print(f"{result.stop.kind} t={result.stop.t!r} -> {out}")
    return 0


def _cmd_shrinker(args) -> int:
    profile = shoot_brakke_spoon(tolerance=args.tolerance, ds=args.ds)
    density = spoon_gaussian_density(profile)
    net = profile.to_network(halfline_length=args.halfline_length, n_loop=512)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runio.write_profile_json(out / "spoon_profile.json", profile, density, net)
    print(
        f"junction_distance={profile.junction_distance!r} density={density!r} "
        f"residual_max={profile.residual_max:.2e} -> {out / 'spoon_profile.json'}"
    )
    return 0


def _cmd_blowup(args) -> int:
    rundir = Path(args.rundir)
    snapshots = runio.read_snapshots_jsonl(rundir / "snapshots.jsonl")
    stop = runio.read_stop_json(rundir / "stop.json")

    class _Result:
        pass

    result = _Result()
    result.snapshots = snapshots
    result.stop = stop
    x0, T_est = blowup_mod.estimate_singularity(result)
    profile = shoot_brakke_spoon()

    ft_last = -0.5 * math.log(max(T_est - snapshots[-1][0], 1e-300))
    ft_hi = args.frak_t_max if args.frak_t_max is not None else ft_last - 0.05
    ft_lo = args.frak_t_min if args.frak_t_min is not None else ft_hi - 2.4
    grid = np.arange(ft_lo, ft_hi + 1e-9, args.frak_t_step)
    rescaled = blowup_mod.rescale_trajectory(snapshots, x0, T_est, grid)
    report = blowup_mod.classify_limit(rescaled, profile)
    report.x0 = x0
    report.T_est = T_est

    out = Path(args.out) if args.out else rundir
    out.mkdir(parents=True, exist_ok=True)
    runio.write_blowup_report(out / "blowup_report.json", report)
    print(f"{report.limit_class} final_distance={report.distance_series[-1]!r} -> {out}")
    return 0


def _cmd_verify(args) -> int:
    rundir = Path(args.rundir)
    records = runio.read_monitors_csv(rundir / "monitors.csv")
    snapshots = runio.read_snapshots_jsonl(rundir / "snapshots.jsonl")
    stop = runio.read_stop_json(rundir / "stop.json")

    t = np.array([r.t for r in records])
    A = np.array([r.A for r in records])
    turning = np.array([r.turning_loop for r in records])
    k2 = np.array([r.k2_loop for r in records])
    L1 = np.array([r.L1 for r in records])

    checks = []
    lo, hi = np.quantile(t, [0.2, 0.8])
    mid = (t >= lo) & (t <= hi)
    slope = np.polyfit(t[mid], A[mid], 1)[0] if mid.sum() >= 3 else math.nan
    checks.append(("area_slope_-5pi/3_2pct", abs(slope + AREA_RATE) <= 0.02 * AREA_RATE,
                   f"slope={slope:.6f}"))
    turn_err = np.max(np.abs(np.abs(turning) - AREA_RATE)) / AREA_RATE
    checks.append(("turning_5pi/3_1pct", bool(turn_err <= 0.01), f"max rel err={turn_err:.2e}"))
    holder = k2 >= 0.99 * 25.0 * math.pi**2 / (9.0 * L1)
    checks.append(("holder_bound", bool(holder.all()), f"{int(holder.sum())}/{len(holder)} times"))
    emb = all(not segments_intersect_scan(net.all_edges()) for _, net in snapshots)
    checks.append(("embedded_at_all_times", emb, f"{len(snapshots)} snapshots"))
    cont = all(check_containment(net) for _, net in snapshots)
    checks.append(("contained_at_all_times", cont, ""))
    if stop.kind == "AreaVanishing":
        T_bound = 3.0 * A[0] / (5.0 * math.pi)
        checks.append(("stop_time_bound", stop.t <= 1.05 * T_bound,
                       f"t={stop.t:.6f} bound={T_bound:.6f}"))

    width = max(len(c[0]) for c in checks)
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}")
    return 0 if ok else 1


def _cmd_render(args) -> int:
    rundir = Path(args.rundir)
    snapshots = runio.read_snapshots_jsonl(rundir / "snapshots.jsonl")
    out = Path(args.out) if args.out else rundir / "frames"
    n = render_frames(snapshots, out)
    print(f"{n} frames -> {out}")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "shrinker": _cmd_shrinker,
        "blowup": _cmd_blowup,
        "verify": _cmd_verify,
        "render": _cmd_render,
    }
    try:
        return handlers[args.command](args)
    except GeometryInfeasible as exc:
        return _fail("geometry_infeasible", str(exc))
    except FileNotFoundError as exc:
        return _fail("missing_file", str(exc))
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        log.exception("command failed")
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
