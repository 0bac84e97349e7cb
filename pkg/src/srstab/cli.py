"""Configuration-driven experiment runner.

Subcommands: ``run`` (execute a JSON-configured job and write CSV artifacts,
figures, gnuplot scripts, and a run report), ``plot`` (render or emit a
script for an existing artifact), ``list-systems``.  Exit codes: 0 all
checks pass, 1 check failure, 2 configuration error.  The environment
variable SRSTAB_OUT overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, acceptance, shooting
from .errors import ConfigurationError, SrstabError
from .feedback import (FeedbackField, decay_check,
                       integrate_closed_loop_batch, write_closed_loop_csv)
from .flow import energy_drift, integrate_extremal, path_energy_and_length, \
    write_trajectory_csv
from .frames import builtin_system, load_system
from .nonsmooth import (box_counting_dimension, estimate_cut_and_conjugate,
                        estimate_singular_set, write_locus_csv)
from .oracle import build_graph, write_value_grid_csv
from .plots import emit_plot_script, render

JOBS = ("geodesic", "value-grid", "loci", "feedback", "full-suite")
BUILTIN_NAMES = ("euclidean-2", "euclidean-3", "heisenberg", "martinet",
                 "martinet-modified")


def _resolve_system(spec):
    if isinstance(spec, str):
        try:
            return builtin_system(spec)
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"unknown system {spec!r}") from exc
    if isinstance(spec, dict):
        return load_system(spec)
    raise ConfigurationError("config key 'system' must be a name or an "
                             "inline definition")


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") \
            from exc
    if cfg.get("job") not in JOBS:
        raise ConfigurationError(
            f"config key 'job' must be one of {JOBS}, got {cfg.get('job')!r}")
    for key, val in cfg.get("tolerances", {}).items():
        if not (isinstance(val, (int, float)) and val > 0):
            raise ConfigurationError(f"tolerance {key!r} must be positive")
    return cfg


def _parallel_shoot(system, pts, jobs, **kw):
    """Chunked multi-start shooting over a thread pool (numpy drops the GIL
    in the dense kernels; closures in Frame rule out process pools)."""
    if jobs <= 1 or len(pts) < 2 * jobs:
        return shooting.shoot_batch(system, pts, **kw)
    chunks = np.array_split(np.arange(len(pts)), jobs)
    out = [None] * len(pts)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futs = [(idx, pool.submit(shooting.shoot_batch, system, pts[idx], **kw))
                for idx in chunks if len(idx)]
        for idx, fut in futs:
            for k, mset in zip(idx, fut.result()):
                out[k] = mset
    return out


# ---------------------------------------------------------------------------
# jobs
# ---------------------------------------------------------------------------


def _job_geodesic(cfg, system, out, seed, jobs):
    p0 = np.asarray(cfg.get("p0", []), dtype=float)
    if p0.shape != (system.frame.dim,):
        raise ConfigurationError("geodesic job needs 'p0' of the system "
                                 "dimension")
    T = float(cfg.get("T", 1.0))
    steps = int(cfg.get("steps", 1000))
    tol = cfg.get("tolerances", {}).get("energy", 1e-8)
    # the 2x validity margin matches the batched flow routines, so endpoints
    # slightly outside the nominal chart (the working neighborhood) still run
    e = integrate_extremal(system.frame, system.base, p0, T=T, steps=steps,
                           box_scale=2.0)
    csv_path = os.path.join(out, "trajectory.csv")
    write_trajectory_csv(csv_path, system.frame, e)
    render(csv_path, "trajectory")
    emit_plot_script(csv_path, "trajectory")
    drift = energy_drift(system.frame, e)
    _, length = path_energy_and_length(system.frame, e)
    checks = [
        {"name": "energy conservation", "measured": drift, "threshold": tol,
         "passed": drift <= tol, "provenance": "structural-identity"},
        {"name": "length identity", "measured":
            abs(length - np.sqrt(2.0 * e.energy0) * T),
         "threshold": 1e-6, "passed":
            abs(length - np.sqrt(2.0 * e.energy0) * T) <= 1e-6,
         "provenance": "structural-identity"},
    ]
    return checks, [csv_path]


def _grid_spec(cfg, system):
    grid = cfg.get("grid", {})
    h = float(grid.get("h", 0.1))
    if h <= 0:
        raise ConfigurationError("grid step 'h' must be positive")
    box = np.asarray(grid.get("box", [[-1.0, 1.0]] * system.frame.dim),
                     dtype=float)
    if box.shape != (system.frame.dim, 2):
        raise ConfigurationError("grid 'box' must be n pairs [lo, hi]")
    return h, box


def _job_value_grid(cfg, system, out, seed, jobs):
    h, box = _grid_spec(cfg, system)
    graph = build_graph(system, h, box)
    grid_csv = os.path.join(out, "value_grid.csv")
    write_value_grid_csv(grid_csv, graph, provenance="oracle")
    render(grid_csv, "value-grid")
    emit_plot_script(grid_csv, "value-grid")

    from .nonsmooth import _grid_points
    gpts = _grid_points(system, box, h)
    msets = _parallel_shoot(system, gpts, jobs, starts=6, seed=seed,
                            steps=120)
    sing = estimate_singular_set(system, box, h, grid=(gpts, msets))
    loci_csv = os.path.join(out, "singular_set.csv")
    write_locus_csv(loci_csv, [sing])
    if len(sing.points):
        render(loci_csv, "loci")
    emit_plot_script(loci_csv, "loci")

    frac = float(np.mean(np.isfinite(graph.distances())))
    checks = [
        {"name": "grid connectivity", "measured": frac, "threshold": 0.99,
         "passed": frac >= 0.99, "provenance": "calibrated-oracle"},
        {"name": "singular set detected", "measured": float(len(sing.points)),
         "threshold": 1.0, "passed": len(sing.points) >= 1,
         "provenance": "simulation"},
    ]
    return checks, [grid_csv, loci_csv]


def _job_loci(cfg, system, out, seed, jobs):
    h, box = _grid_spec(cfg, system)
    from .nonsmooth import _grid_points
    gpts = _grid_points(system, box, h)
    msets = _parallel_shoot(system, gpts, jobs, starts=6, seed=seed,
                            steps=120)
    grid = (gpts, msets)
    cut, conj, included = estimate_cut_and_conjugate(system, box, h,
                                                     grid=grid)
    sing = estimate_singular_set(system, box, h, grid=grid)
    loci_csv = os.path.join(out, "loci.csv")
    write_locus_csv(loci_csv, [sing, cut, conj])
    render(loci_csv, "loci")
    emit_plot_script(loci_csv, "loci")
    dim = box_counting_dimension(sing.points, base_scale=2 * h)
    checks = [
        {"name": "conjugate within cut", "measured": float(included),
         "threshold": 1.0, "passed": bool(included),
         "provenance": "simulation"},
        {"name": "dimension probe", "measured": dim,
         "threshold": system.frame.dim - 1 + 0.3,
         "passed": dim <= system.frame.dim - 1 + 0.3,
         "provenance": "simulation"},
    ]
    return checks, [loci_csv]


def _job_feedback(cfg, system, out, seed, jobs):
    T = float(cfg.get("T", 3.0))
    dt = float(cfg.get("dt", 1e-3))
    tol = cfg.get("tolerances", {}).get("decay", 1e-2)
    rng = np.random.default_rng(seed)
    if "seeds_x0" in cfg:
        X0 = np.asarray(cfg["seeds_x0"], dtype=float)
    else:
        n_seeds = int(cfg.get("n_seeds", 5))
        X0 = rng.uniform(-1.0, 1.0, size=(n_seeds, system.frame.dim))
        X0 = X0[np.linalg.norm(X0 - system.base, axis=1) > 0.3]
    fb = FeedbackField(system, starts=16, seed=seed)
    trajs = integrate_closed_loop_batch(fb, X0, T=T, dt=dt, record_every=10)
    paths = []
    for k, traj in enumerate(trajs):
        p = os.path.join(out, f"closed_loop_{k}.csv")
        write_closed_loop_csv(p, fb, traj)
        paths.append(p)
    render(paths[0], "decay")
    emit_plot_script(paths[0], "decay")
    dev = max(decay_check(t) for t in trajs)
    checks = [
        {"name": "exponential decay", "measured": dev, "threshold": tol,
         "passed": dev <= tol, "provenance": "structural-identity"},
    ]
    return checks, paths


def _job_full_suite(cfg, system_name, out, seed, jobs):
    def progress(res):
        print(res.line(), flush=True)
    results = acceptance.run_suite(system_name=system_name, seed=seed,
                                   progress=progress)
    checks = [{"name": r.name, "measured": r.measured,
               "threshold": r.threshold, "passed": r.passed,
               "skipped": r.skipped, "runtime_s": round(r.runtime, 2),
               "provenance": r.provenance, **r.details} for r in results]
    return checks, []


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = os.environ.get("SRSTAB_OUT") or args.out or cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    job = cfg["job"]

    if job == "full-suite":
        name = cfg.get("system")
        if name is not None and not isinstance(name, str):
            raise ConfigurationError("full-suite restriction needs a "
                                     "built-in system name")
        if name is not None:
            _resolve_system(name)
        checks, artifacts = _job_full_suite(cfg, name, out, seed, args.jobs)
    else:
        system = _resolve_system(cfg.get("system"))
        fn = {"geodesic": _job_geodesic, "value-grid": _job_value_grid,
              "loci": _job_loci, "feedback": _job_feedback}[job]
        checks, artifacts = fn(cfg, system, out, seed, args.jobs)

    report = {
        "version": __version__,
        "job": job,
        "system": cfg.get("system"),
        "seed": seed,
        "checks": checks,
        "artifacts": [os.path.basename(a) for a in artifacts],
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    lines = [f"srstab {__version__} run report", f"job: {job}",
             f"seed: {seed}", ""]
    for c in checks:
        if c.get("skipped"):
            lines.append(f"SKIP  {c['name']}")
            continue
        tag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{tag}  {c['name']}: measured={c['measured']:.6g} "
                     f"threshold={c['threshold']:.6g} [{c['provenance']}]")
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    failed = [c for c in checks if not c.get("skipped") and not c["passed"]]
    return 1 if failed else 0


def cmd_plot(args) -> int:
    if not os.path.exists(args.artifact):
        raise ConfigurationError(f"artifact {args.artifact} does not exist")
    if args.gnuplot:
        path = emit_plot_script(args.artifact, args.kind, args.out)
    else:
        path = render(args.artifact, args.kind, args.out)
    print(path)
    return 0


def cmd_list_systems(_args) -> int:
    for name in BUILTIN_NAMES:
        s = builtin_system(name)
        print(f"{name}: dim={s.frame.dim} rank={s.frame.rank} "
              f"base={[float(v) for v in s.base]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srstab",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a configured job")
    run.add_argument("--config", required=True, help="JSON config path")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1, help="worker count")
    run.set_defaults(fn=cmd_run)

    plot = sub.add_parser("plot", help="render or script a CSV artifact")
    plot.add_argument("artifact")
    plot.add_argument("--kind", required=True,
                      choices=("trajectory", "value-grid", "loci", "decay"))
    plot.add_argument("--gnuplot", action="store_true",
                      help="emit a gnuplot script instead of a PNG")
    plot.add_argument("--out", default=None)
    plot.set_defaults(fn=cmd_plot)

    ls = sub.add_parser("list-systems", help="print the built-in systems")
    ls.set_defaults(fn=cmd_list_systems)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SrstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
