"""Command-line front end.

Exit codes: 0 success, 2 parameter error, 3 infeasible geometry,
4 statistics error.  Every run emits a manifest: to ``--manifest`` when
given, else ``<out-dir>/manifest.json`` when ``--out-dir`` is given, else
to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .environment import GridSpec, environment_to_bytes, generate_environment
from .ensembles import backward_ensemble, forward_ensemble, normalize_ensemble
from .errors import InfeasibleError, LPPError, ParameterError, StatisticsError
from .estimators import (DISJOINT_RARITY, REGULARITY_AUDIT, ExperimentConfig, fit_table,
                         run_experiment)
from .events import EventSpec, evaluate_batch, events_to_csv
from .lpp import LEFTMOST, TIE_RULES, multi_geodesic
from .scaled import CompatibleTriple, multi_polymer_weight, n23, polymer, snap_point
from .selftest import run_selftest

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_INFEASIBLE = 3
EXIT_STATISTICS = 4
MANIFEST_VERSION = "lppsim-manifest 1"

# statistic fitted by ``exponent`` for each experiment kind
FIT_STATISTIC = {
    "transversal_fluctuation": "sd_deviation",
    "weight_sd": "sd_energy",
    "weight_difference": "mean_sup_difference",
    "disjoint_rarity": None,
    "near_poly_rarity": "P(NearPoly)",
    "dev_reg_tail": "P(not PolyDevReg)",
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    tool_version: str
    argv: list
    config: dict | None = None
    config_text: str | None = None
    started: str = field(default_factory=_now)
    finished: str | None = None
    exit_code: int | None = None
    points: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def record(self, path: str, data: bytes):
        self.outputs.append({"path": path, "sha256": hashlib.sha256(data).hexdigest(),
                             "bytes": len(data)})

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["version"] = MANIFEST_VERSION
        return json.dumps(d, sort_keys=True)


class _Output:
    """Writes named outputs to files under ``out_dir`` or to stdout."""

    def __init__(self, out_dir: str | None, manifest: RunManifest):
        self.dir = Path(out_dir) if out_dir else None
        self.manifest = manifest
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str | bytes):
        data = text.encode() if isinstance(text, str) else text
        if self.dir:
            path = self.dir / name
            path.write_bytes(data)
            self.manifest.record(str(path), data)
        else:
            if isinstance(text, bytes):
                raise ParameterError(f"{name} is binary; pass --out-dir")
            sys.stdout.write(text)
            if not text.endswith("\n"):
                sys.stdout.write("\n")
            self.manifest.record("-", data)


# ---------------------------------------------------------------------------
# argument helpers


def _floats(s: str) -> list:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated numbers, got {s!r}") from exc


def _point(s: str) -> tuple:
    v = _floats(s)
    if len(v) != 2:
        raise ParameterError(f"expected x,t, got {s!r}")
    return v[0], v[1]


def _load_json(path: str) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path} is not valid JSON: {exc}") from exc


def _env_for(seed: int, n: int, t1: float, t2: float, xs, ys, delta: float, margin: float):
    tr = CompatibleTriple(n, t1, t2)
    c = 2.0 * n23(n)
    lo = min(tr.i + c * min(xs), tr.j + c * min(ys)) - margin
    hi = max(tr.i + c * max(xs), tr.j + c * max(ys)) + margin
    grid = GridSpec.covering(lo, hi, delta, pad=1)
    return tr, generate_environment(seed, tr.i, tr.j, grid)


def _staircase_dict(env, s) -> dict:
    return {"x": float(env.grid.position(s.x)), "i": s.i, "y": float(env.grid.position(s.y)),
            "j": s.j, "jumps": [float(env.grid.position(g)) for g in s.jumps]}


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args, out: _Output):
    grid = GridSpec.covering(args.lo, args.hi, args.delta)
    env = generate_environment(args.seed, args.line_min, args.line_max, grid)
    if args.out_dir:
        out.emit(args.name, environment_to_bytes(env))
    else:
        d = {"seed": env.seed, "line_min": env.line_min, "line_max": env.line_max,
             "x0": grid.x0, "delta": grid.delta, "num_cells": grid.num_cells,
             "anchor_index": grid.anchor_index,
             "digest": hashlib.sha256(environment_to_bytes(env)).hexdigest()}
        out.emit("sample.json", json.dumps(d, sort_keys=True))


def cmd_geodesic(args, out: _Output):
    (x, t1), (y, t2) = _point(args.start), _point(args.end)
    tr, env = _env_for(args.seed, args.n, t1, t2, [x], [y], args.delta, args.margin)
    z = polymer(env, tr, x, y, args.tie)
    d = {"version": __version__, "seed": args.seed, "n": args.n, "delta": args.delta,
         "from": [x, t1], "to": [y, t2], "tie_rule": args.tie, "weight": z.weight,
         "snapped_from": z.start(env), "snapped_to": z.end(env),
         "staircase": _staircase_dict(env, z.staircase)}
    out.emit("geodesic.json", json.dumps(d, sort_keys=True))


def cmd_multi(args, out: _Output):
    xs, ys = _floats(args.xs), _floats(args.ys)
    if len(xs) != len(ys):
        raise ParameterError("--xs and --ys need the same length")
    k = len(xs)
    tr, env = _env_for(args.seed, args.n, args.t1, args.t2, xs, ys, args.delta, args.margin)
    w = multi_polymer_weight(env, tr, k, xs, ys)
    gxs = [snap_point(env, args.n, v, args.t1)[0] for v in xs]
    gys = [snap_point(env, args.n, v, args.t2)[0] for v in ys]
    ms = multi_geodesic(env, gxs, gys, tr.i, tr.j, args.tie)
    d = {"version": __version__, "seed": args.seed, "n": args.n, "delta": args.delta, "k": k,
         "xs": xs, "ys": ys, "t1": args.t1, "t2": args.t2, "tie_rule": args.tie, "weight": w,
         "paths": [_staircase_dict(env, s) for s in ms.paths]}
    out.emit("multi.json", json.dumps(d, sort_keys=True))


def cmd_ensemble(args, out: _Output):
    samples = _floats(args.samples)
    if not samples:
        raise ParameterError("--samples is empty")
    if args.direction == "forward":
        tr, env = _env_for(args.seed, args.n, args.t1, args.t2, [args.root], samples, args.delta,
                           args.margin)
        ens = forward_ensemble(env, tr, args.root, args.k_max, samples)
    else:
        tr, env = _env_for(args.seed, args.n, args.t1, args.t2, samples, [args.root], args.delta,
                           args.margin)
        ens = backward_ensemble(env, tr, args.root, args.k_max, samples)
    if args.normalize:
        ens = normalize_ensemble(ens)
    out.emit("ensemble.csv", ens.to_csv())


_EVENT_KEYS = {"delta", "seeds", "events"}


def _event_spec(d: dict) -> EventSpec:
    d = dict(d)
    for key in ("I", "J", "tuple_"):
        if key in d and d[key] is not None:
            d[key] = tuple(d[key])
    if "K" in d:
        d["K"] = tuple(tuple(_interval_piece(p)) for p in d["K"])
    try:
        return EventSpec(**d)
    except TypeError as exc:
        raise ParameterError(f"bad event spec {d}: {exc}") from exc


def _interval_piece(p) -> tuple:
    if len(p) != 4:
        raise ParameterError("K pieces are [lo, hi, lo_closed, hi_closed]")
    lo, hi = (math.inf if v == "inf" else -math.inf if v == "-inf" else float(v) for v in p[:2])
    return lo, hi, bool(p[2]), bool(p[3])


def cmd_events(args, out: _Output):
    cfg, text = _load_json(args.config)
    out.manifest.config, out.manifest.config_text = cfg, text
    unknown = set(cfg) - _EVENT_KEYS
    if unknown:
        raise ParameterError(f"unknown config keys {sorted(unknown)}")
    specs = [_event_spec(e) for e in cfg.get("events", [])]
    seeds = [int(s) for s in cfg.get("seeds", [])]
    if not specs or not seeds:
        raise ParameterError("events config needs nonempty events and seeds")
    rows = evaluate_batch(specs, seeds, float(cfg.get("delta", 0.25)))
    out.emit("events.csv", events_to_csv(rows))


def _experiment(args, out: _Output) -> tuple:
    cfg_dict, text = _load_json(args.config)
    out.manifest.config, out.manifest.config_text = cfg_dict, text
    cfg = ExperimentConfig.from_dict(cfg_dict)
    if args.threads is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "threads": args.threads})
    table = run_experiment(cfg)
    out.manifest.points = [{"n": r.n, "param": r.param, "value": r.value, "tol": r.tol,
                            "status": r.status} for r in table.rows]
    return cfg, table


def cmd_exponent(args, out: _Output):
    cfg, table = _experiment(args, out)
    out.emit("table.csv", table.to_csv())
    if cfg.kind == REGULARITY_AUDIT:
        raise ParameterError("use the audit subcommand for regularity audits")
    stat = FIT_STATISTIC[cfg.kind]
    if cfg.kind == DISJOINT_RARITY:
        stat = f"P(count>={cfg.k})"
    tol = cfg.tolerances[0] if cfg.kind == DISJOINT_RARITY else None
    fit = fit_table(table, stat, tol)
    out.emit("fit.json", fit.to_json())


def cmd_audit(args, out: _Output):
    cfg, table = _experiment(args, out)
    if cfg.kind != REGULARITY_AUDIT:
        raise ParameterError("audit configs need kind regularity_audit")
    out.emit("table.csv", table.to_csv())
    reports = {str(n): json.loads(rep.to_json()) for n, rep in table.reports.items()}
    out.emit("report.json", json.dumps(reports, indent=2, sort_keys=True))


def cmd_selftest(args, out: _Output):
    results = run_selftest()
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results]
    out.emit("selftest.txt", "\n".join(lines) + "\n")
    if not all(r.passed for r in results):
        raise _SelftestFailed()


class _SelftestFailed(Exception):
    pass


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lppsim", description="Brownian last passage percolation toolkit")
    p.add_argument("--version", action="version", version=f"lppsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeded=True):
        sp.add_argument("--out-dir", default=None, help="write outputs here instead of stdout")
        sp.add_argument("--manifest", default=None, help="manifest path")
        if seeded:
            sp.add_argument("--seed", type=int, required=True)
            sp.add_argument("--delta", type=float, default=0.25, help="grid spacing")
        return sp

    sp = common(sub.add_parser("sample", help="generate and dump an environment"))
    sp.add_argument("--line-min", type=int, required=True)
    sp.add_argument("--line-max", type=int, required=True)
    sp.add_argument("--lo", type=float, required=True, help="leftmost unscaled position")
    sp.add_argument("--hi", type=float, required=True, help="rightmost unscaled position")
    sp.add_argument("--name", default="environment.bin")
    sp.set_defaults(func=cmd_sample)

    for name, func in (("geodesic", cmd_geodesic), ("multi", cmd_multi)):
        sp = common(sub.add_parser(name, help=f"{name} between explicit scaled endpoints"))
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--tie", choices=TIE_RULES, default=LEFTMOST)
        sp.add_argument("--margin", type=float, default=2.0, help="extra unscaled grid margin")
        if name == "geodesic":
            sp.add_argument("--from", dest="start", required=True, help="x,t")
            sp.add_argument("--to", dest="end", required=True, help="y,t")
        else:
            sp.add_argument("--xs", required=True, help="comma-separated starts")
            sp.add_argument("--ys", required=True, help="comma-separated ends")
            sp.add_argument("--t1", type=float, default=0.0)
            sp.add_argument("--t2", type=float, default=1.0)
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("ensemble", help="forward or backward line ensemble as CSV"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--t1", type=float, default=0.0)
    sp.add_argument("--t2", type=float, default=1.0)
    sp.add_argument("--root", type=float, default=0.0)
    sp.add_argument("--k-max", type=int, default=2)
    sp.add_argument("--samples", required=True, help="comma-separated scaled positions")
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    sp.add_argument("--normalize", action="store_true")
    sp.add_argument("--margin", type=float, default=2.0)
    sp.set_defaults(func=cmd_ensemble)

    sp = common(sub.add_parser("events", help="evaluate an event batch from JSON"), seeded=False)
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_events)

    for name, func in (("exponent", cmd_exponent), ("audit", cmd_audit)):
        sp = common(sub.add_parser(name, help=f"run an experiment config ({name})"), seeded=False)
        sp.add_argument("--config", required=True)
        sp.add_argument("--threads", type=int, default=None)
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("selftest", help="run the oracle suite"), seeded=False)
    sp.set_defaults(func=cmd_selftest)
    return p


def _write_manifest(args, manifest: RunManifest):
    text = manifest.to_json()
    path = getattr(args, "manifest", None)
    if path is None and getattr(args, "out_dir", None):
        path = str(Path(args.out_dir) / "manifest.json")
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    else:
        sys.stderr.write(text + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    manifest = RunManifest(__version__, argv)
    code = EXIT_OK
    try:
        args.func(args, _Output(args.out_dir, manifest))
    except _SelftestFailed:
        code = 1
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    except StatisticsError as exc:
        print(f"statistics error: {exc}", file=sys.stderr)
        code = EXIT_STATISTICS
    except (ParameterError, LPPError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        code = EXIT_PARAMETER
    manifest.finished = _now()
    manifest.exit_code = code
    _write_manifest(args, manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
