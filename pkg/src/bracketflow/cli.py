"""Command-line entry point ``bracketflow``.

Exit codes: 0 on success, 2 when a flow hits a finite extinction time,
1 on any other error (a JSON error report goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from . import catalog
from .bracket_space import Bracket, scale_bracket
from .curvature import Classification, classify, ricci_mod
from .errors import BadConfig, BlowUp, BracketflowError, FlatBracket, ZeroBracket
from .flows import (
    FlowTrajectory,
    blow_down,
    bracket_flow,
    collapse_diagnostic,
    monotonicity,
    sample_times,
)
from .stratification import StratumLabel, beta_from_nilradical, gauge_to_Vnn, stratum_label

SCHEMA = "bracketflow/1"
log = logging.getLogger("bracketflow")

DEFAULTS: dict[str, Any] = {
    "input": None,
    "variant": "gauged",
    "t_end": 10.0,
    "samples": 201,
    "spacing": "log",
    "rtol": 1e-9,
    "atol": 1e-12,
    "tol_grad": 1e-10,
    "tol_classify": 1e-8,
    "seed": 0,
    "output_dir": "bracketflow_out",
    "jobs": 1,
    "scale": 100.0,
    "method": "both",
    "tag": None,
}


def _setup_logging() -> None:
    level = os.environ.get("BRACKETFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy to python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--input", default=S, help="catalog name or path to a bracket JSON file")
    common.add_argument("--config", default=None, help="JSON file with option values")
    common.add_argument("--output-dir", dest="output_dir", default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--tol-grad", dest="tol_grad", type=float, default=S)
    common.add_argument("--tol-classify", dest="tol_classify", type=float, default=S)
    flowopts = argparse.ArgumentParser(add_help=False)
    flowopts.add_argument("--t-end", dest="t_end", type=float, default=S)
    flowopts.add_argument("--samples", type=int, default=S)
    flowopts.add_argument("--spacing", choices=["linear", "log"], default=S)
    flowopts.add_argument("--rtol", type=float, default=S)
    flowopts.add_argument("--atol", type=float, default=S)

    p = argparse.ArgumentParser(prog="bracketflow", description="Ricci flow of homogeneous spaces in bracket form.")
    sub = p.add_subparsers(dest="command", required=True)
    f = sub.add_parser("flow", parents=[common, flowopts], help="integrate a bracket flow")
    f.add_argument("--variant", choices=["plain", "unimodular", "gauged"], default=S)
    sub.add_parser("stratum", parents=[common], help="stratum label").add_argument(
        "--method", choices=["gradient", "nilradical", "both"], default=S
    )
    sub.add_parser("soliton-check", parents=[common], help="classify the background metric")
    sub.add_parser("lyapunov", parents=[common, flowopts], help="beta-volume Lyapunov function along the gauged flow")
    b = sub.add_parser("blowdown", parents=[common, flowopts], help="parabolic blow-down and collapse diagnostic")
    b.add_argument("--scale", type=float, default=S, help="blow-down factor s")
    c = sub.add_parser("catalog", parents=[common], help="list or sweep catalog entries")
    c.add_argument("--jobs", type=int, default=S)
    c.add_argument("--tag", default=S)
    c.add_argument("--sweep", action="store_true", help="compute stratum labels for every entry")
    return p


def _options(ns: argparse.Namespace) -> dict[str, Any]:
    opts = dict(DEFAULTS)
    if ns.config:
        try:
            conf = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read config {ns.config!r}: {exc}") from exc
        if not isinstance(conf, dict):
            raise BadConfig("config must be a JSON object")
        for k, v in conf.items():
            key = k.replace("-", "_")
            if key not in DEFAULTS:
                raise BadConfig(f"unknown config key {k!r}")
            opts[key] = v
    for k, v in vars(ns).items():
        if k in DEFAULTS:
            opts[k] = v
    opts["command"] = ns.command
    opts["sweep"] = getattr(ns, "sweep", False)
    if opts["command"] != "catalog" and not opts["input"]:
        raise BadConfig("--input is required")
    for key in ("t_end", "rtol", "atol", "tol_grad", "tol_classify", "scale"):
        if not float(opts[key]) > 0:
            raise BadConfig(f"{key} must be positive")
    if int(opts["samples"]) < 2:
        raise BadConfig("samples must be at least 2")
    return opts


def _label(mu: Bracket, opts: dict) -> StratumLabel | None:
    try:
        return stratum_label(mu, tol_grad=opts["tol_grad"])
    except (ZeroBracket, FlatBracket):
        return None


def _classify_final(mu: Bracket, label: StratumLabel | None, opts: dict) -> Classification | None:
    if label is None:
        rm = ricci_mod(mu, check=False)
        nr = float(np.linalg.norm(rm))
        return Classification("Flat", nr) if nr < opts["tol_classify"] else None
    _, nu = gauge_to_Vnn(mu, label, seed=opts["seed"])
    return classify(nu, label, tol=opts["tol_classify"], check=False)


def _base(opts: dict, entry: catalog.CatalogEntry | None) -> dict:
    cfg = {k: opts[k] for k in sorted(DEFAULTS) if k not in ("input", "output_dir")}
    return {
        "schema": SCHEMA,
        "command": opts["command"],
        "status": "ok",
        "input": opts["input"],
        "config": cfg,
        "bracket": None if entry is None else entry.bracket.to_dict(),
        "files": {},
    }


def _run_flow(opts: dict, entry: catalog.CatalogEntry, out: Path, variant: str) -> tuple[dict, int]:
    mu0 = entry.bracket
    times = sample_times(opts["t_end"], int(opts["samples"]), opts["spacing"])
    label = _label(mu0, opts)
    if variant == "gauged" and label is None:
        variant = "unimodular"
        log.warning("flat or zero bracket: running the unimodular flow instead of the gauged one")
    traj = bracket_flow(
        mu0,
        variant,
        times=times,
        label=label if variant == "gauged" else None,
        rtol=opts["rtol"],
        atol=opts["atol"],
        on_blowup="return",
    )
    summary = _base(opts, entry)
    summary["config"]["variant"] = variant
    summary["beta"] = None if label is None else label.to_dict()
    summary["frame"] = traj.frame
    csv_path = out / "trajectory.csv"
    traj.to_csv(csv_path)
    summary["files"]["trajectory"] = csv_path.name
    d = traj.diagnostics()
    summary["monotonicity"] = monotonicity(traj, tol=max(1e-10, 10 * float(opts["rtol"])))
    if variant == "gauged":
        summary["estimates"] = {
            "pairing_min": _nanmin(d["pairing_beta_plus"]),
            "gap_min": _nanmin(d["gap"]),
        }
    else:
        summary["estimates"] = None
    summary["final"] = {"t": float(traj.times[-1]), "bracket": traj.final.to_dict()}
    code = 0
    if traj.status == "blowup":
        summary["status"] = "blowup"
        summary["classification"] = None
        summary["extinction"] = {
            "time": float(traj.times[-1]),
            "scal_mod": float(d["scal_mod"][-1]),
            "message": traj.message,
        }
        code = 2
    else:
        summary["extinction"] = None
        t = float(traj.times[-1])
        resc = scale_bracket(traj.final, math.sqrt(t))
        summary["classification"] = _classification_dict(_classify_final(resc, label, opts))
    return summary, code, traj


def _classification_dict(cl: Classification | None):
    return None if cl is None else cl.to_dict()


def _nanmin(a: np.ndarray) -> float | None:
    a = np.asarray(a, dtype=float)
    a = a[~np.isnan(a)]
    return float(a.min()) if a.size else None


def cmd_flow(opts: dict, out: Path) -> int:
    entry = catalog.resolve(opts["input"])
    summary, code, _ = _run_flow(opts, entry, out, opts["variant"])
    _write_json(out / "summary.json", summary)
    return code


def cmd_lyapunov(opts: dict, out: Path) -> int:
    entry = catalog.resolve(opts["input"])
    summary, code, traj = _run_flow(opts, entry, out, "gauged")
    d = traj.diagnostics()
    summary["lyapunov"] = {"F": d["F_beta"], "v_beta": d["v_beta"], "t": d["t"]}
    _write_json(out / "summary.json", summary)
    return code


def cmd_blowdown(opts: dict, out: Path) -> int:
    entry = catalog.resolve(opts["input"])
    s = float(opts["scale"])
    local = dict(opts)
    local["t_end"] = s * float(opts["t_end"])
    summary, code, traj = _run_flow(local, entry, out, "gauged")
    summary["config"]["t_end"] = opts["t_end"]
    if code == 0:
        bd = blow_down(traj, s)
        ts, resc = traj.rescaled()
        summary["collapse"] = collapse_diagnostic(resc, ts).to_dict()
        summary["collapse"]["times"] = ts
        bd_csv = out / "blowdown.csv"
        bd.to_csv(bd_csv)
        summary["files"]["blowdown"] = bd_csv.name
    _write_json(out / "summary.json", summary)
    return code


def cmd_stratum(opts: dict, out: Path) -> int:
    entry = catalog.resolve(opts["input"])
    summary = _base(opts, entry)
    mu = entry.bracket
    method = opts["method"]
    label = None
    if method in ("gradient", "both"):
        label = stratum_label(mu, tol_grad=opts["tol_grad"])
    if method in ("nilradical", "both"):
        lab_n = beta_from_nilradical(mu, tol_grad=opts["tol_grad"])
        if label is None:
            label = lab_n
        else:
            summary["nilradical_check"] = {
                "beta": lab_n.to_dict(),
                "max_difference": float(np.max(np.abs(lab_n.raw - label.raw))),
            }
    summary["beta"] = label.to_dict()
    _write_json(out / "summary.json", summary)
    return 0


def cmd_soliton_check(opts: dict, out: Path) -> int:
    entry = catalog.resolve(opts["input"])
    summary = _base(opts, entry)
    mu = entry.bracket
    label = _label(mu, opts)
    summary["beta"] = None if label is None else label.to_dict()
    if label is not None:
        k, nu = gauge_to_Vnn(mu, label, seed=opts["seed"])
        summary["frame"] = k
        cl = classify(nu, label, tol=opts["tol_classify"])
    else:
        cl = _classify_final(mu, None, opts)
    summary["classification"] = _classification_dict(cl)
    _write_json(out / "summary.json", summary)
    return 0


def _sweep_one(args: tuple[str, float]) -> dict:
    name, tol = args
    e = catalog.get(name)
    row: dict[str, Any] = {"name": name, "tags": sorted(e.tags)}
    try:
        row["beta"] = stratum_label(e.bracket, tol_grad=tol).to_dict()
    except (ZeroBracket, FlatBracket) as exc:
        row["beta"] = None
        row["note"] = type(exc).__name__
    return row


def cmd_catalog(opts: dict, out: Path) -> int:
    summary = _base(opts, None)
    names = [e.name for e in catalog.entries(opts["tag"])]
    if opts["sweep"]:
        jobs = max(1, int(opts["jobs"]))
        work = [(n, float(opts["tol_grad"])) for n in names]
        if jobs == 1:
            rows = [_sweep_one(w) for w in work]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                rows = list(ex.map(_sweep_one, work))
    else:
        rows = [catalog.get(n).to_dict() for n in names]
    summary["entries"] = rows
    _write_json(out / "summary.json", summary)
    for r in rows:
        print(r["name"])
    return 0


COMMANDS = {
    "flow": cmd_flow,
    "stratum": cmd_stratum,
    "soliton-check": cmd_soliton_check,
    "lyapunov": cmd_lyapunov,
    "blowdown": cmd_blowdown,
    "catalog": cmd_catalog,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _parser()
    ns = parser.parse_args(argv)
    out = None
    try:
        opts = _options(ns)
        out = Path(opts["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[ns.command](opts, out)
        if code == 0:
            print(json.dumps({"status": "ok", "summary": str(out / "summary.json")}))
        else:
            print(json.dumps({"status": "blowup", "summary": str(out / "summary.json")}))
        return code
    except BlowUp as exc:
        report = {"schema": SCHEMA, "status": "blowup", "error": {"type": "BlowUp", "message": str(exc)}}
        print(json.dumps(report), file=sys.stderr)
        return 2
    except (BracketflowError, OSError) as exc:
        report = {
            "schema": SCHEMA,
            "command": ns.command,
            "status": "error",
            "input": getattr(ns, "input", None),
            "config": {},
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }
        print(json.dumps(report), file=sys.stderr)
        if out is not None and out.is_dir():
            _write_json(out / "summary.json", report)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
