"""``tumbletrack`` command line: run, compare, selftest.

Exit codes: 0 success, 1 selftest failure, 2 config error, 3 filter divergence.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .pipeline import ScenarioConfig, compute_metrics, load_preset, preset_names, run_scenario, write_track_csv
from .plyio import write_ply

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3

log = logging.getLogger("tumbletrack")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def load_config(args):
    """Config from ``--config`` (file path or bundled preset name) plus overrides."""
    src = args.config
    path = Path(src)
    if path.is_file():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{src}: invalid JSON ({exc})") from exc
        cfg = ScenarioConfig.from_dict(data)
    elif src in preset_names():
        cfg = load_preset(src)
    else:
        raise ConfigError(f"config file not found: {src}")
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    return cfg.validate()


def _run_one(cfg, out, write_scans):
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    on_scan = None
    if write_scans:
        scan_dir = out / "scans"
        scan_dir.mkdir(exist_ok=True)

        def on_scan(k, frame):
            if frame.valid:
                p = scan_dir / f"scan_{k:05d}.ply"
                write_ply(p, frame.cloud, comment=f"t = {frame.t!r}")
                artifacts.append(str(p))

    rec = run_scenario(cfg, on_scan=on_scan)
    track = out / "track.csv"
    write_track_csv(rec, track)
    metrics = compute_metrics(rec)
    return rec, metrics, [str(track)] + artifacts


def cmd_run(args):
    cfg = load_config(args)
    out = Path(args.out)
    rec, metrics, artifacts = _run_one(cfg, out, args.write_scans)
    status = EXIT_DIVERGED if rec.diverged else EXIT_OK
    summary_path = out / "summary.json"
    manifest = {"config_path": args.config, "out_dir": str(out), "seed": cfg.seed,
                "artifacts": artifacts + [str(summary_path)], "exit_status": status}
    _dump({"version": __version__, "config": cfg.to_dict(), "metrics": metrics, "manifest": manifest},
          summary_path)
    print(json.dumps(metrics, indent=2, default=_json_default))
    if rec.diverged:
        print(f"filter diverged at t = {rec.diverged_at} s: {rec.divergence_reason}", file=sys.stderr)
    return status


COMPARE_ROWS = [
    ("failed", "failed"),
    ("failure_time", "failure time [s]"),
    ("rot_error_max_deg", "max rot error [deg]"),
    ("rot_error_mean_deg", "mean rot error [deg]"),
    ("trans_error_max_m", "max trans error [m]"),
    ("trans_error_mean_m", "mean trans error [m]"),
    ("fit_first", "fit, first frame"),
    ("fit_max", "fit, max"),
    ("p_convergence_time", "p converged at [s]"),
    ("rho_convergence_time", "rho converged at [s]"),
    ("omega_convergence_time", "omega converged at [s]"),
    ("diverged", "diverged"),
]


def _cell(v):
    if v is None:
        return "-"
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def format_comparison(m_cl, m_ol):
    width = max(len(label) for _, label in COMPARE_ROWS)
    lines = [f"{'metric':<{width}}  {'CL EKF':>12}  {'OL EKF':>12}"]
    for key, label in COMPARE_ROWS:
        lines.append(f"{label:<{width}}  {_cell(m_cl.get(key)):>12}  {_cell(m_ol.get(key)):>12}")
    return "\n".join(lines)


def cmd_compare(args):
    cfg = load_config(args)
    out = Path(args.out)
    results = {}
    for mode in ("cl", "ol"):
        cfg_m = ScenarioConfig.from_dict({**cfg.to_dict(), "mode": mode})
        rec, metrics, artifacts = _run_one(cfg_m, out / mode, args.write_scans)
        results[mode] = (rec, metrics)
    table = format_comparison(results["cl"][1], results["ol"][1])
    print(table)
    _dump({"version": __version__, "config": cfg.to_dict(),
           "metrics": {m: r[1] for m, r in results.items()}}, out / "summary.json")
    return EXIT_DIVERGED if any(r[0].diverged for r in results.values()) else EXIT_OK


def cmd_selftest(args):
    from .selftest import run_all
    ok = run_all(verbose=True)
    return EXIT_OK if ok else EXIT_SELFTEST


def build_parser():
    ap = argparse.ArgumentParser(prog="tumbletrack", description=(
        "Pose tracking of a tumbling target from synthetic point-cloud scans "
        "(ICP + multiplicative EKF)."))
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--config", required=True,
                       help=f"scenario JSON file, or a bundled preset: {', '.join(preset_names())}")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--write-scans", action="store_true", help="also write scans/*.ply")

    p_run = sub.add_parser("run", help="run one scenario")
    scenario_args(p_run)
    p_run.add_argument("--mode", choices=("cl", "ol"), default=None, help="override the config mode")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run a scenario closed- and open-loop, print both")
    scenario_args(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_st = sub.add_parser("selftest", help="run the built-in numerical checks")
    p_st.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
