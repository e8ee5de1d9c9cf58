"""Command-line front end: run, validate, sweep, info.

Exit-code families: 0 success, 1 configuration problems (bad files,
violated scenario invariants), 2 numerical failures (instability,
non-convergence), 3 validation-check failures.  Progress and logs go to
stderr; data artifacts only to files, so stdout stays pipeable.

Artifacts are deterministic: reruns with identical inputs produce
byte-identical CSV/JSON, and every artifact embeds the scenario hash and
tool version.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .medium import (REFRACTIVE, ParseError, ScenarioError, load_scenario,
                     scenario_from_dict, truncation_radius)
from .wave import CFLError, NumericalError, cfl_limit
from .elliptic import ConvergenceError
from .indicator import (PipelineResult, run_elliptic_pipeline,
                        run_with_reference, rate_on_common_window)
from .validate import run_checks

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3


def scenario_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_series_csv(path: str, result: PipelineResult, sha: str) -> None:
    s = result.series
    usable = s.usable_mask()
    g = s.g()
    sh = s.s_half()
    with open(path, "w") as fh:
        fh.write(f"# scenario_hash={sha}\n")
        fh.write(f"# tool_version={__version__}\n")
        fh.write(f"# pipeline={result.pipeline} strategy={result.strategy}\n")
        fh.write("tau,sign,log_abs_I,g,s,floor_log,used_in_fit\n")
        for i, tau in enumerate(s.taus):
            v = s.values[i]
            la = _fmt(v.logmag) if v.sign != 0 else "-inf"
            gg = _fmt(g[i]) if v.sign != 0 else "-inf"
            ss = _fmt(sh[i]) if v.sign != 0 else "-inf"
            fl = _fmt(s.floor_logs[i]) if math.isfinite(s.floor_logs[i]) else "-inf"
            fh.write(f"{_fmt(tau)},{v.sign},{la},{gg},{ss},{fl},{int(bool(usable[i]))}\n")


def write_verdict_json(path: str, result: PipelineResult, sha: str) -> dict:
    doc = result.verdict.to_dict()
    doc.update({
        "pipeline": result.pipeline,
        "strategy": result.strategy,
        "scenario": result.scenario.name,
        "scenario_hash": sha,
        "tool_version": __version__,
        "mode": result.scenario.mode,
        "T": result.scenario.T,
        "m0": result.scenario.medium.m0,
        "M0": result.scenario.medium.M0,
        "dist_DB_true": result.scenario.dist_DB,
    })
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _summary_lines(result: PipelineResult) -> list:
    v = result.verdict
    lines = [
        f"pipeline {result.pipeline} ({result.strategy}) on scenario '{result.scenario.name}'",
        f"  class: {v.classification}",
    ]
    if v.rate_estimate is not None:
        lines.append(f"  rate estimate: {v.rate_estimate:+.4f} "
                     f"(plain linear fit {v.rate_linear:+.4f})")
    if v.distance_band is not None:
        lines.append(f"  distance band: [{v.distance_band[0]:.4f}, {v.distance_band[1]:.4f}]")
    if v.window is not None:
        lines.append(f"  fit window: tau in [{v.window[0]:.3f}, {v.window[1]:.3f}] "
                     f"({v.window[2]} points)")
    thr = v.diagnostics.get("T_threshold")
    if thr is not None:
        ok = "satisfied" if result.scenario.T > thr else "NOT satisfied"
        lines.append(f"  horizon check: T={result.scenario.T} vs threshold {thr:.3f} ({ok})")
    if "warning" in v.diagnostics:
        lines.append(f"  warning: {v.diagnostics['warning']}")
    return lines


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    sha = scenario_hash(args.scenario)
    os.makedirs(args.out, exist_ok=True)
    pipelines = ["elliptic", "reference"] if args.pipeline == "both" else [args.pipeline]
    summary = []
    try:
        results = []
        for p in pipelines:
            if p == "elliptic":
                r = run_elliptic_pipeline(scenario, strategy=args.strategy)
            else:
                r = run_with_reference(scenario)
            results.append(r)
            write_series_csv(os.path.join(args.out, f"series_{p}.csv"), r, sha)
            write_verdict_json(os.path.join(args.out, f"verdict_{p}.json"), r, sha)
            summary.extend(_summary_lines(r))
            print(f"[{p}] class={r.verdict.classification} rate={r.verdict.rate_estimate}",
                  file=sys.stderr)
        if len(results) == 2:
            agree = rate_on_common_window(results[0], results[1])
            with open(os.path.join(args.out, "pipeline_agreement.json"), "w") as fh:
                json.dump(agree, fh, indent=2, sort_keys=True)
                fh.write("\n")
            if agree["delta"] is not None:
                summary.append(f"pipeline rate agreement: |delta| = {agree['delta']:.4f} "
                               f"on tau in [{agree['tau_lo']:.2f}, {agree['tau_hi']:.2f}]")
    except (CFLError, NumericalError, ConvergenceError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(f"scenario_hash={sha} tool_version={__version__}\n")
        fh.write("\n".join(summary) + "\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        checks = run_checks(scenario, level=args.level)
    except (CFLError, NumericalError, ConvergenceError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    failed = [name for name, ok, _ in checks if not ok]
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"all {len(checks)} checks passed", file=sys.stderr)
    return EXIT_OK


_SWEEPABLE = ("T", "h", "k0", "obstacle_shift")


def _patch_scenario_doc(doc: dict, param: str, value: float) -> dict:
    import copy
    doc = copy.deepcopy(doc)
    if param == "T":
        doc["run"]["T"] = value
    elif param == "h":
        doc["medium"]["h"] = value
        if value != 0.0:
            doc["medium"]["h_sign"] = "positive" if value > 0 else "negative"
    elif param == "k0":
        a0 = doc["medium"].get("alpha0")
        if not (isinstance(a0, dict) and a0.get("kind") == "layered"):
            raise ParseError("k0 sweep requires a layered alpha0 profile")
        vals = list(a0["values"])
        vals[len(vals) // 2] = value
        a0["values"] = vals
    elif param == "obstacle_shift":
        obs = doc["medium"].get("obstacle")
        if not isinstance(obs, dict):
            raise ParseError("obstacle_shift sweep requires a nonempty obstacle")
        if obs["kind"] == "interval":
            obs["lo"] = obs["lo"] + value
            obs["hi"] = obs["hi"] + value
        elif obs["kind"] == "ball":
            c = list(np.atleast_1d(obs["center"]).astype(float))
            c[0] += value
            obs["center"] = c
        else:
            raise ParseError(f"obstacle_shift not supported for region kind {obs['kind']!r}")
    else:
        raise ParseError(f"sweep parameter must be one of {_SWEEPABLE}, got {param!r}")
    return doc


def _sweep_one(payload):
    doc, param, value, outdir, name = payload
    try:
        scenario = scenario_from_dict(doc, name=name)
        result = run_elliptic_pipeline(scenario)
        os.makedirs(outdir, exist_ok=True)
        sha = hashlib.sha256(
            json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]
        write_series_csv(os.path.join(outdir, "series_elliptic.csv"), result, sha)
        write_verdict_json(os.path.join(outdir, "verdict_elliptic.json"), result, sha)
        v = result.verdict
        band = v.distance_band or (None, None)
        return {"param": param, "value": value, "status": "ok",
                "class": v.classification, "rate": v.rate_estimate,
                "dist_lo": band[0], "dist_hi": band[1], "run_dir": outdir}
    except Exception as e:  # isolate per-run failures, batch continues
        return {"param": param, "value": value, "status": f"error: {e}",
                "class": None, "rate": None, "dist_lo": None, "dist_hi": None,
                "run_dir": outdir}


def cmd_sweep(args) -> int:
    try:
        import tomllib as toml  # pragma: no cover
    except ModuleNotFoundError:
        import tomli as toml
    try:
        with open(args.scenario, "rb") as fh:
            doc = toml.load(fh)
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if not values:
            raise ParseError("empty sweep value list")
        if args.param not in _SWEEPABLE:
            raise ParseError(f"sweep parameter must be one of {_SWEEPABLE}")
    except (OSError, toml.TOMLDecodeError, ValueError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    base = os.path.splitext(os.path.basename(args.scenario))[0]
    os.makedirs(args.out, exist_ok=True)
    payloads = []
    for v in values:
        try:
            patched = _patch_scenario_doc(doc, args.param, v)
        except ParseError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        rundir = os.path.join(args.out, f"{args.param}_{v:g}")
        payloads.append((patched, args.param, v, rundir, f"{base}[{args.param}={v:g}]"))
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    batch = os.path.join(args.out, "sweep.csv")
    with open(batch, "w") as fh:
        fh.write(f"# tool_version={__version__} scenario={base} param={args.param}\n")
        fh.write("param,value,status,class,rate,dist_lo,dist_hi,run_dir\n")
        for r in rows:
            cells = [r["param"], _fmt(r["value"]), str(r["status"]).replace(",", ";"),
                     str(r["class"]),
                     _fmt(r["rate"]) if r["rate"] is not None else "",
                     _fmt(r["dist_lo"]) if r["dist_lo"] is not None else "",
                     _fmt(r["dist_hi"]) if r["dist_hi"] is not None else "",
                     r["run_dir"]]
            fh.write(",".join(cells) + "\n")
    failures = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"{args.param}={r['value']:g}: {r['status']} class={r['class']} "
              f"rate={r['rate']}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} run(s) failed; see {batch}", file=sys.stderr)
    return EXIT_OK


def cmd_info(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    g = scenario.grid
    print(f"scenario          {scenario.name} ({scenario.mode}, {g.dimension}-d)")
    print(f"grid              extent {g.extent}, spacing {g.spacing:g}, "
          f"origin {tuple(round(o, 6) for o in g.origin)}")
    print(f"cells             {int(np.prod(g.extent))}")
    print(f"time horizon T    {scenario.T:g}  ({scenario.n_steps} steps of dt {scenario.dt:.6g})")
    print(f"CFL dt limit      {cfl_limit(scenario):.6g}")
    print(f"truncation radius {truncation_radius(scenario):g}")
    print(f"tau sweep         [{scenario.tau_sweep[0]:g}, {scenario.tau_sweep[-1]:g}] "
          f"({len(scenario.tau_sweep)} values)")
    if scenario.dist_DB is not None:
        factor = scenario.medium.M0 if scenario.mode == REFRACTIVE else 1.0
        thr = 2.0 * factor * scenario.dist_DB
        ok = "satisfied" if scenario.T > thr else "NOT satisfied"
        print(f"dist(D, B)        {scenario.dist_DB:g}")
        print(f"detection horizon 2*{'M0*' if scenario.mode == REFRACTIVE else ''}dist "
              f"= {thr:g}  ({ok})")
    else:
        print("obstacle          empty")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="wallprobe",
        description="Probe for hidden penetrable obstacles from one reflected wave: "
                    "simulate, sweep the transform rate, classify, and bound the distance.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: simulate, compare, classify")
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--pipeline", choices=["elliptic", "reference", "both"],
                   default="elliptic",
                   help="comparison field: computed (elliptic), measured "
                        "obstacle-free reference, or both")
    p.add_argument("--strategy", choices=["scattered", "difference"], default="scattered",
                   help="indicator evaluation strategy for the elliptic pipeline")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="run the self-check suite on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--level", choices=["fast", "full"], default="fast")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="re-run the pipeline across a parameter range")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True, help=f"one of {_SWEEPABLE}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("info", help="print derived quantities of a scenario")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_info)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
