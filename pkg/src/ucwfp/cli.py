"""Command-line experiment runner.

    ucwfp run <config>                 one experiment; writes trace.csv, summary.json, verdicts.json
    ucwfp suite <dir>                  every *.json config in a directory; writes suite.json
    ucwfp axioms <space-config>        randomized axiom and modulus checks
    ucwfp verify-map <space> <map>     Lipschitz-sequence and S-operator checks

Config arguments are file paths or inline JSON. ``//`` and ``/* */`` comments
are allowed. Output goes to ``$UCWFP_OUT`` when set, else to the config's
``output`` entry, else to ``./out``.

Exit codes: 0 success, 1 configuration error, 2 monitor failure,
3 budget exhausted (row limit or deadline).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from ucwfp import kernels
from ucwfp.diagnostics import MONITORS, MonitorSet, check_trajectory, hard_failures, online_hooks, verdict_table
from ucwfp.geometry import ConfigError, UCWError, check_axioms, check_midpoint_drop, check_modulus
from ucwfp.iteration import ComparePolicy, MonitorFailure, StopRule, extract_pk, run
from ucwfp.mappings import make_map, verify_asymptotic_bound
from ucwfp.soperator import GENERAL, SOperator, check_s_properties
from ucwfp.spaces import make_space

EXIT_OK, EXIT_CONFIG, EXIT_MONITOR, EXIT_BUDGET = 0, 1, 2, 3

_COMMENTS = re.compile(r'("(?:\\.|[^"\\])*")|//[^\n]*|/\*.*?\*/', re.S)
CONFIG_KEYS = {"name", "space", "map", "start", "sMode", "stop", "monitors", "output", "seed",
               "history", "compare", "inject", "description"}


def strip_comments(text: str) -> str:
    return _COMMENTS.sub(lambda m: m.group(1) or "", text)


def load_json(arg: str):
    """Parse ``arg`` as inline JSON when it looks like an object, else read it as a file."""
    text = arg if arg.lstrip().startswith(("{", "[")) else None
    if text is None:
        try:
            text = Path(arg).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {arg}: {exc.strerror}") from None
    try:
        return json.loads(strip_comments(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {arg if text is not arg else 'inline config'}: {exc}") from None


def _schema(name: str) -> dict:
    return json.loads(resources.files("ucwfp").joinpath("schemas", f"{name}.schema.json").read_text())


def validate(obj, name: str):
    jsonschema.validate(obj, _schema(name))
    return obj


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _g(v) -> str:
    return "" if v is None else format(v, ".17g")


def _finite(v):
    return None if v is None or v != v or v in (float("inf"), float("-inf")) else v


def _error(kind: str, message: str, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


# --------------------------------------------------------------------------
# experiments


class Experiment:
    """A parsed and validated experiment config."""

    def __init__(self, cfg: dict, source: str = "<inline>"):
        if not isinstance(cfg, dict):
            raise ConfigError("experiment config must be a JSON object")
        extra = set(cfg) - CONFIG_KEYS
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        for key in ("space", "map"):
            if key not in cfg:
                raise ConfigError(f"config is missing {key!r}")
        self.cfg = cfg
        self.name = str(cfg.get("name") or Path(source).stem or "experiment")
        self.space = make_space(cfg["space"])
        self.map = make_map(self.space, cfg["map"])
        self.seed = int(cfg.get("seed", 0))
        mode = cfg.get("sMode", GENERAL)
        self.op = SOperator(self.map, mode=mode)
        try:
            self.stop = StopRule.from_json(cfg.get("stop"))
        except TypeError as exc:
            raise ConfigError(f"bad stop rule: {exc}") from None
        self.rtol = self.stop.resolved_residual_tol(self.space.b)
        self.start = self._start(cfg.get("start", {"seed": self.seed}))
        mon = dict(cfg.get("monitors") or {})
        unknown = set(mon) - {"enabled", "tol", "online", "grid"}
        if unknown:
            raise ConfigError(f"unknown monitor keys {sorted(unknown)}")
        tol = mon.get("tol", 1e-10)
        try:
            self.monitors = MonitorSet(
                fixed_points=tuple(self.map.fixed_points),
                enabled=tuple(mon.get("enabled", MONITORS)),
                tol=dict(tol) if isinstance(tol, dict) else {},
                default_tol=float(tol) if not isinstance(tol, dict) else 1e-10,
                residual_tol=self.rtol,
                grid=tuple(mon["grid"]) if "grid" in mon else None)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad monitors section: {exc}") from None
        self.online = bool(mon.get("online", True))
        history = cfg.get("history", "full")
        if history not in ("full", "stream"):
            raise ConfigError(f"history must be 'full' or 'stream', got {history!r}")
        self.keep_s = history == "full"
        band = (cfg.get("compare") or {}).get("band")
        self.compare = ComparePolicy(None if band is None else float(band))
        self.inject = cfg.get("inject")
        if self.inject is not None and (not isinstance(self.inject, dict) or "row" not in self.inject):
            raise ConfigError("inject needs at least a 'row'")

    def _start(self, spec):
        if spec == "fixed":
            fps = self.map.fixed_points
            if not fps:
                raise ConfigError("start 'fixed' needs a map with a known fixed point")
            return fps[0]
        if isinstance(spec, dict) and set(spec) == {"seed"}:
            return self.space.sample_point(int(spec["seed"]))
        return self.space.from_json(spec)

    def output_dir(self, override: str | None = None) -> Path:
        env = os.environ.get("UCWFP_OUT")
        if override:
            return Path(override)
        if env:
            return Path(env) / self.name
        return Path(self.cfg.get("output") or Path("out") / self.name)


def _inject(exp: Experiment, traj):
    spec = exp.inject
    j = int(spec["row"])
    if not 1 <= j <= len(traj.rows):
        return None
    space = exp.space
    y = traj.rows[j - 1].y
    target = space.from_json(spec["toward"]) if "toward" in spec else exp.start
    dist = space.metric(y, target)
    if dist == 0.0:
        return None
    amount = float(spec.get("amount", 0.1))
    traj.replace_y(j, space.combine(y, target, min(1.0, amount / dist)))
    return {"row": j, "amount": min(amount, dist)}


def trace_csv(exp: Experiment, traj) -> str:
    _space, d = exp.space, exp.space.metric
    fps = exp.monitors.fixed_points
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "m", "case", "d_y_prev", "residual"] + [f"d_p{i}" for i in range(len(fps))] + ["near_ties"])
    prev = None
    for r in traj.rows:
        w.writerow([r.j, r.m, r.tag, "" if prev is None else _g(d(r.y, prev)), _g(r.residual)]
                   + [_g(d(r.y, p)) for p in fps] + [r.near_ties])
        prev = r.y
    return buf.getvalue()


def run_experiment(exp: Experiment, out: Path | None = None, quiet: bool = False) -> tuple[int, dict]:
    out = out or exp.output_dir()
    hooks = online_hooks(exp.space, exp.monitors) if exp.online else []
    online_failure = None
    try:
        traj = run(exp.op, exp.start, exp.stop, hooks, exp.compare, exp.keep_s)
    except MonitorFailure as exc:
        traj, online_failure = exc.trajectory, exc.verdict
    injected = _inject(exp, traj) if exp.inject else None
    verdicts = check_trajectory(traj, exp.monitors, exp.op)
    if online_failure is not None and all(v.passed for v in verdicts if v.name == online_failure.name):
        verdicts.append(online_failure)
    failed = hard_failures(verdicts)
    if failed:
        code = EXIT_MONITOR
    elif traj.stop_reason in ("maxRows", "deadline"):
        code = EXIT_BUDGET
    else:
        code = EXIT_OK
    ext = extract_pk(traj)
    space = exp.space
    last = traj.last
    summary = {
        "scenario": exp.name,
        "space": space.config(),
        "map": exp.map.config(),
        "sMode": exp.op.mode,
        "stop": exp.stop.to_json(space.b),
        "stopReason": traj.stop_reason,
        "rows": len(traj.rows),
        "start": space.to_json(exp.start),
        "finalY": space.to_json(last.y),
        "finalResidual": _finite(last.residual),
        "fixedPointDistances": [space.metric(last.y, p) for p in exp.monitors.fixed_points],
        "pk": [{"k": k, "p": p, "provisional": ext.is_provisional(k)} for k, p in enumerate(ext.pk, start=1)],
        "certified": ext.certified,
        "provisionalTailCount": ext.provisional,
        "caseCounts": {c: sum(1 for r in traj.rows if r.case == c) for c in ("init", "I", "II")},
        "nearTies": sum(r.near_ties for r in traj.rows),
        "lastDecision": exp.op.last_decision.to_json() if exp.op.last_decision else None,
        "hardMonitorsPassed": not failed,
        "failedMonitors": [v.name for v in failed],
        "injected": injected,
        "backend": kernels.BACKEND,
        "exitCode": code,
    }
    vjson = {"scenario": exp.name, "verdicts": [_clean(v.to_json()) for v in verdicts]}
    _write(out / "trace.csv", trace_csv(exp, traj))
    _write(out / "summary.json", _dump(validate(_clean(summary), "summary")))
    _write(out / "verdicts.json", _dump(validate(vjson, "verdicts")))
    if not quiet:
        print(f"{exp.name}: {traj.stop_reason} after {len(traj.rows)} rows, exit {code}")
        print(verdict_table(verdicts))
    return code, summary


def _clean(obj):
    """Replace non-finite floats so the output stays strict JSON."""
    if isinstance(obj, float):
        return _finite(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _combine_codes(codes) -> int:
    codes = set(codes)
    for c in (EXIT_MONITOR, EXIT_BUDGET, EXIT_CONFIG):
        if c in codes:
            return c
    return EXIT_OK


def load_experiment(arg: str) -> Experiment:
    try:
        inline = arg.lstrip().startswith(("{", "["))
        return Experiment(load_json(arg), "inline" if inline else arg)
    except ConfigError:
        raise
    except (UCWError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def cmd_run(args) -> int:
    try:
        exp = load_experiment(args.config)
    except ConfigError as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    try:
        code, _ = run_experiment(exp, Path(args.out) if args.out else None, args.quiet)
    except UCWError as exc:
        # a map or S-operator contract broke mid-run
        _error("contract", str(exc), scenario=exp.name)
        return EXIT_MONITOR
    return code


def run_suite(directory: Path, out: Path | None = None, quiet: bool = False) -> tuple[int, dict]:
    if not directory.is_dir():
        raise ConfigError(f"{directory} is not a directory")
    base = out or Path(os.environ.get("UCWFP_OUT") or "out")
    report = {}
    for path in sorted(directory.glob("*.json")):
        name = path.stem
        try:
            exp = load_experiment(str(path))
        except ConfigError as exc:
            _error("config", str(exc), scenario=name)
            report[name] = {"exitCode": EXIT_CONFIG, "error": str(exc)}
            continue
        try:
            code, s = run_experiment(exp, base / exp.name, quiet=True)
        except UCWError as exc:
            _error("contract", str(exc), scenario=name)
            report[name] = {"exitCode": EXIT_MONITOR, "error": str(exc)}
            continue
        report[name] = {"exitCode": code, "stopReason": s["stopReason"], "rows": s["rows"],
                        "finalResidual": s["finalResidual"], "failedMonitors": s["failedMonitors"]}
        if not quiet:
            print(f"{name:<28} exit {code}  {s['stopReason']:<9} rows {s['rows']:>6}  residual {_g(s['finalResidual'])}")
    agg = {"scenarios": report, "exitCode": _combine_codes(r["exitCode"] for r in report.values())}
    _write(base / "suite.json", _dump(validate(agg, "suite")))
    return agg["exitCode"], agg


def cmd_suite(args) -> int:
    try:
        code, _ = run_suite(Path(args.directory), Path(args.out) if args.out else None, args.quiet)
    except ConfigError as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    return code


def cmd_axioms(args) -> int:
    try:
        space = make_space(load_json(args.space))
    except (ConfigError, TypeError, ValueError) as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    rep = check_axioms(space, args.trials, args.seed)
    drop = check_midpoint_drop(space, args.trials, args.seed)
    mod = check_modulus(space.modulus, min(args.trials, 1000), args.seed)
    body = rep.to_json()
    body["midpointDrop"] = drop.to_json()
    body["modulus"] = mod
    body["passed"] = rep.passed and drop.max_violation <= rep.tol and max(mod.values()) <= 1e-12
    print(_dump(validate(_clean(body), "axioms")), end="")
    return EXIT_OK if body["passed"] else EXIT_MONITOR


def cmd_verify_map(args) -> int:
    try:
        space = make_space(load_json(args.space))
        tmap = make_map(space, load_json(args.map))
    except (ConfigError, TypeError, ValueError) as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    rep = verify_asymptotic_bound(tmap, space, args.horizon, args.trials, args.seed)
    srep = check_s_properties(SOperator(tmap), args.trials, args.seed)
    body = rep.to_json()
    body["sOperator"] = srep.to_json()
    body["passed"] = rep.passed and srep.passed
    print(_dump(validate(_clean(body), "map_report")), end="")
    return EXIT_OK if body["passed"] else EXIT_MONITOR


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not monitor failures
    def error(self, message):
        self.print_usage(sys.stderr)
        _error("usage", message)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ucwfp", description="Fixed-point row iteration with runtime invariant checks.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides UCWFP_OUT)")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("suite", help="run every config in a directory")
    s.add_argument("directory")
    s.add_argument("--out")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_suite)
    a = sub.add_parser("axioms", help="check the space axioms by sampling")
    a.add_argument("space")
    a.add_argument("--trials", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_axioms)
    v = sub.add_parser("verify-map", help="check a map's Lipschitz sequence and its S operator")
    v.add_argument("space")
    v.add_argument("map")
    v.add_argument("--horizon", type=int, default=20)
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify_map)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def scenarios_dir() -> Path:
    return Path(str(resources.files("ucwfp").joinpath("scenarios")))


if __name__ == "__main__":
    sys.exit(main())
