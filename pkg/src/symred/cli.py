"""Command line: ``symred run``, ``symred builtin`` and ``symred verify-all``.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 numerical ambiguity (a rank decision fell inside its tolerance band).
"""
from __future__ import annotations

import argparse
import datetime
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .builtins import builtin_config, builtin_names
from .dynamics import HamiltonianSystem, check_noether, check_stratum_preservation, compare_full_vs_reduced, \
    cross_section_scenario, integrate_full
from .errors import AmbiguityError, ConfigError, PreconditionError
from .groups import FiniteMatrixGroup, Torus
from .invariants import degree_dimension_table, express_in_generators, generator_relations, molien_series
from .model import Model, load_model
from .strata import local_model_base_points, local_model_match, slice_model, stratification_report
from .verify import _jsonable, resolve_checks, run_checks

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_AMBIGUOUS = 0, 1, 2, 3


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("symred", "numpy", "scipy", "sympy", "jsonschema"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


# --------------------------------------------------------------------------
# tasks


def task_invariants(model: Model, task: dict, out: Path) -> dict:
    H = model.hilbert
    res = {
        "generators": H.to_json(),
        "poisson_matrix": model.poisson.to_json(),
        "relations": [r.to_text() for r in generator_relations(H)],
    }
    dmax = int(task.get("degree_table", 8))
    if isinstance(model.spec, (FiniteMatrixGroup, Torus)):
        res["degree_table"] = degree_dimension_table(H, dmax)
    if isinstance(model.spec, FiniteMatrixGroup):
        res["molien"] = molien_series(model.spec, dmax)
    if model.F.algebra_dim:
        res["norm_F_squared"] = express_in_generators(model.F.norm_squared(), H).to_text()
    return res


def task_strata(model: Model, task: dict, out: Path) -> dict:
    return stratification_report(model.strata, model.hilbert, model.F)


def _system(model: Model) -> HamiltonianSystem:
    if "system" not in model.cache:
        model.cache["system"] = HamiltonianSystem(model.spec, model.hamiltonian, model.space, F=model.F)
    return model.cache["system"]


def task_simulate(model: Model, task: dict, out: Path) -> dict:
    name = task.get("name", f"simulate{task['_index']}")
    T = float(task.get("T", 10.0))
    dt = float(task.get("dt", 1e-3))
    stride = int(task.get("csv_stride", 10))
    if "v0" in task:
        v0 = np.asarray(task["v0"], dtype=float)
    else:
        v0 = np.random.default_rng(model.seed).normal(size=model.spec.dim)
    sys_ = _system(model)
    if "cross_section" in task:
        rep = cross_section_scenario(sys_, task["cross_section"], v0, T, dt, circular=bool(task.get("circular", False)))
        res = {"cross_section": rep.to_json()}
        traj = integrate_full(sys_, v0, T, dt)
    elif task.get("reduced", False):
        tw = compare_full_vs_reduced(sys_, model.hilbert, model.poisson, v0, T, dt)
        tw.reduced.to_csv(out / f"trajectory_{name}_reduced.csv", stride)
        res = {"twin": tw.to_json(), "reduced_csv": f"trajectory_{name}_reduced.csv"}
        traj = tw.full
    else:
        traj = integrate_full(sys_, v0, T, dt)
        res = {}
    traj.to_csv(out / f"trajectory_{name}.csv", stride)
    res.update({
        "name": name,
        "csv": f"trajectory_{name}.csv",
        "steps": len(traj.times) - 1,
        "dt": traj.dt,
        "halvings": traj.halvings,
        "energy_drift": {"value": traj.energy_drift, "reported_constant": traj.energy_drift / (abs(traj.dt) ** 4 * T)},
        "noether_drift": {"value": check_noether(traj), "tolerance": model.tol("conservation", 1e-8)},
        "stratum_escape": {"value": check_stratum_preservation(traj, model.spec), "tolerance": model.tol("conservation", 1e-8)},
    })
    return res


def task_slice(model: Model, task: dict, out: Path) -> dict:
    count = int(task.get("samples", 20))
    strat = model.strata
    pts = local_model_base_points(model.spec, count, model.seed, strat)
    rows = []
    for i, x in enumerate(pts):
        sm = slice_model(x, model.spec, model.space)
        lm = local_model_match(x, model.spec, model.space, seed=model.seed + i, strat=strat)
        rows.append({"slice_dim": sm.W.dim, "slice_rep": sm.rep_json(), **lm.to_json()})
    return {"points": rows, "matched": sum(r["match"] for r in rows), "total": len(rows)}


def task_verify(model: Model, task: dict, out: Path) -> dict:
    results = run_checks(model, task.get("checks", "all"))
    return {
        "checks": [r.to_json() for r in results],
        "passed": all(r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
    }


TASKS = {
    "invariants": task_invariants,
    "strata": task_strata,
    "simulate": task_simulate,
    "slice": task_slice,
    "verify": task_verify,
}


def run_model(cfg: dict, output: Path, seed: int | None = None, tolerance_scale: float = 1.0) -> tuple[int, dict]:
    """Execute the tasks of ``cfg`` in order, write report.json and return (exit code, report)."""
    model = load_model(cfg, seed, tolerance_scale)
    for t in cfg["tasks"]:
        if t["type"] == "verify":
            try:
                resolve_checks(t.get("checks", "all"))
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
    output.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc)
    elapsed = {}
    results = []
    failed = []
    for i, t in enumerate(cfg["tasks"]):
        t0 = time.perf_counter()
        task = dict(t, _index=i)
        try:
            res = TASKS[t["type"]](model, task, output)
        except PreconditionError as exc:
            res = {"error": f"precondition: {exc}"}
            failed.append(f"task{i}:{t['type']}")
        if t["type"] == "verify" and not res["passed"]:
            failed += res["failed"]
        key = f"{i}:{t['type']}"
        elapsed[key] = round(time.perf_counter() - t0, 3)
        results.append({"index": i, "type": t["type"], "params": {k: v for k, v in t.items() if k != "type"},
                        "result": res})
    report = {
        "model": cfg,
        "seed": model.seed,
        "tolerance_scale": tolerance_scale,
        "results": results,
        "verification": {"passed": not failed, "failed": failed},
        "versions": _versions(),
        "timestamp": {"started": started.isoformat(), "elapsed_seconds": elapsed},
    }
    report = _jsonable(report)
    with open(output / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return (EXIT_VERIFY if failed else EXIT_OK), report


# --------------------------------------------------------------------------
# entry points


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.output or cfg.get("output_dir") or "symred_out")
    code, report = run_model(cfg, out, args.seed, args.tolerance_scale)
    _summary(cfg.get("name", args.config), report, out)
    return code


def _cmd_builtin(args) -> int:
    try:
        cfg = builtin_config(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(cfg, indent=2))
    return EXIT_OK


def _cmd_verify_all(args) -> int:
    root = Path(args.output or "symred_verify")
    code = EXIT_OK
    for name in builtin_names():
        cfg = builtin_config(name)
        c, report = run_model(cfg, root / name, args.seed, args.tolerance_scale)
        _summary(name, report, root / name)
        code = max(code, c)
    return code


def _summary(name: str, report: dict, out: Path) -> None:
    v = report["verification"]
    status = "ok" if v["passed"] else "FAILED: " + ", ".join(v["failed"])
    print(f"{name}: {len(report['results'])} tasks, {status} -> {out / 'report.json'}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symred", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the tasks of a JSON model config")
    r.add_argument("config")
    r.add_argument("--output", help="output directory (default: config output_dir or ./symred_out)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every check tolerance")
    r.set_defaults(func=_cmd_run)
    b = sub.add_parser("builtin", help="print a bundled model config")
    b.add_argument("name", help=", ".join(builtin_names()))
    b.set_defaults(func=_cmd_builtin)
    v = sub.add_parser("verify-all", help="run every builtin model with its verify suite")
    v.add_argument("--output", help="output root (default: ./symred_verify)")
    v.add_argument("--seed", type=int)
    v.add_argument("--tolerance-scale", type=float, default=1.0)
    v.set_defaults(func=_cmd_verify_all)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tolerance_scale", 1.0) <= 0:
        print("error: --tolerance-scale must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AmbiguityError as exc:
        print(f"numerical ambiguity: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS


if __name__ == "__main__":
    sys.exit(main())
