"""Command-line front end: subcommands, key=value config files, manifests and replay.

Every run writes its data to --out (CSV if the name ends in .csv, JSON lines
otherwise) and a manifest to <out>.manifest.json. ``blumecapel replay
MANIFEST`` reruns the recorded command with the recorded parameters.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._util import fmt, jsonable, set_workers

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
RUN_KEYS = ("out", "config", "threads", "command", "manifest", "func")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _strs(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _instance(text: str):
    """box:N:D, rect:a,b,c,d, 1x1 / 1x2 / 2x2, or a named graph (path5, grid2x3, ...)."""
    from .lattice import box_region, named_graph, rect_region

    t = text.strip()
    if t.startswith("box:"):
        n, d = (int(x) for x in t[4:].split(":"))
        return box_region(n, d)
    if t.startswith("rect:"):
        return rect_region(*_ints(t[5:]))
    shapes = {"1x1": (0, 0, 0, 0), "1x2": (0, 1, 0, 0), "2x2": (0, 1, 0, 1)}
    if t in shapes:
        return rect_region(*shapes[t])
    return named_graph(t)


def _params(args):
    """RC parameters from --p/--a(/--r) or spin parameters from --beta/--delta."""
    from .model import ModelParams

    if getattr(args, "p", None) is not None:
        if args.a is None:
            raise UsageError("--p needs --a")
        return ModelParams.rc(args.p, args.a, getattr(args, "r", None))
    if getattr(args, "beta", None) is not None and getattr(args, "delta", None) is not None:
        return ModelParams.spin(args.beta, args.delta)
    raise UsageError("give --p and --a, or --beta and --delta")


def _plan(args):
    from .crossing import SamplingPlan

    return SamplingPlan(args.samples, args.burn_in, args.thinning, args.chains, args.seed)


def _add_sampling(p, samples: int):
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)


def _add_rc(p):
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)


# ---------------------------------------------------------------------------
# subcommands: each returns (records, failures)
# ---------------------------------------------------------------------------

def cmd_exact_verify(args):
    from .exact import (verify_comparison_lemma, verify_es_coupling, verify_ising_mapping,
                        verify_order_properties)
    from .lattice import fixed_polyominoes, polyomino_region, small_graphs
    from .model import BoundaryCondition

    reports = []
    if args.suite == "es-coupling":
        if args.instance:
            insts = [(args.instance, _instance(args.instance))]
        else:
            insts = [(str(list(c)), polyomino_region(c)) for c in fixed_polyominoes(args.max_vertices)]
        for bc in _strs(args.bc):
            for _, inst in insts:
                reports += verify_es_coupling(inst, BoundaryCondition.parse(bc), args.beta, args.delta)
    elif args.suite == "ising-mapping":
        graphs = [(args.instance, _instance(args.instance))] if args.instance else \
            small_graphs(args.max_vertices)
        for _, g in graphs:
            g = g.graph if hasattr(g, "graph") else g
            for xi in _strs(args.xi):
                reports += verify_ising_mapping(g, args.beta, args.delta, xi)
    elif args.suite == "order":
        grid = [(p, a) for p in _floats(args.p_grid) for a in _floats(args.a_grid)]
        reports = verify_order_properties(grid, tuple(_strs(args.regions)), seed=args.seed)
    elif args.suite == "comparison":
        reports = verify_comparison_lemma(1, tuple(_floats(args.deltas)), seed=args.seed)
    rows = [dict(r.record(), seed=args.seed, passed=r.passed) for r in reports]
    return rows, sum(not r.passed for r in reports)


def cmd_sample(args):
    from .model import BoundaryCondition
    from .sampler import ChainSpec, SpinTarget, run_chain

    inst = _instance(args.instance)
    bc = BoundaryCondition.parse(args.bc)
    spec = ChainSpec(SpinTarget(inst, bc, args.beta, args.delta), tuple(_strs(args.observables)),
                     args.samples, args.burn_in, args.thinning, args.chains, args.seed)
    res = run_chain(spec, warn=False)
    rows = [dict({"observable": k}, **e.to_dict()) for k, e in res.items()]
    return rows, 0


def cmd_crossing(args):
    from .crossing import estimate_event
    from .model import BoundaryCondition

    prm = _params(args)
    bc = BoundaryCondition.parse(args.bc)
    rows = []
    for i, ev in enumerate(_strs(args.events)):
        plan = _plan(args)
        plan = type(plan)(plan.n_samples, plan.burn_in, plan.thinning, plan.n_chains,
                          args.seed + i)
        est = estimate_event(prm, bc, ev, args.scale, plan, warn=False)
        rows.append(dict({"event": ev, "scale": args.scale, "bc": bc.label(), "p": prm.p,
                          "a": prm.a}, **est.to_dict()))
    return rows, 0


def cmd_quad(args):
    from .crossing import classify_quadrichotomy

    prm = _params(args)
    v = classify_quadrichotomy(prm, _ints(args.scales), _plan(args), args.tau, args.t_min, warn=False)
    return [dict(v.to_dict(), p=prm.p, a=prm.a, seed=args.seed)], 0


def cmd_phase_scan(args):
    from .model import a_from_delta
    from .phase import phase_scan

    if args.a_values is not None:
        avals = _floats(args.a_values)
    elif args.deltas is not None:
        avals = [a_from_delta(d) for d in _floats(args.deltas)]
    else:
        raise UsageError("give --a-values or --deltas")
    ests = phase_scan(avals, args.n, args.tol, _plan(args))
    rows = []
    for e in ests:
        d = e.to_dict()
        d.pop("trace", None)
        d["delta"] = e.delta
        d["beta_hat"] = e.beta_hat
        rows.append(d)
    return rows, 0


def cmd_weak_plus(args):
    from .phase import weak_plus_probe

    rows = weak_plus_probe(args.beta, args.delta, _floats(args.eps), _ints(args.ns), args.dim,
                           _plan(args), warn=False)
    out = []
    for r in rows:
        flat = {}
        for k, v in r.items():
            if hasattr(v, "to_dict"):
                flat[k] = v.mean
                flat[k + "_stderr"] = v.stderr
            else:
                flat[k] = v
        flat["seed"] = args.seed
        out.append(flat)
    return out, 0


def cmd_leeyang(args):
    from .leeyang import ConeGrid, cone_scan, verify_site_factor_identity

    rows, fails = [], 0
    if args.site_factors:
        for rep in verify_site_factor_identity(args.n_max, tuple(_floats(args.site_deltas))):
            rows.append(dict(rep.record(), seed=args.seed, passed=rep.passed))
            fails += not rep.passed
    if args.graph:
        inst = _instance(args.graph)
        g = inst.graph if hasattr(inst, "graph") else inst
        grid = ConeGrid(args.scan_cone, args.grid, args.grid, args.mode)
        res = cone_scan(g, args.beta, args.delta, tuple(_ints(args.A)) if args.A else (), grid,
                        keep_records=False)
        ok = res.passed()
        rows.append({"check": "cone_scan", "graph": args.graph, "beta": args.beta,
                     "delta": args.delta, "R": args.scan_cone, "grid": args.grid,
                     "mode": args.mode, "min_normalised": res.min_normalised,
                     "argmin": [str(x) for x in res.argmin], "passed": ok, "seed": args.seed})
        fails += not ok
    if not rows:
        raise UsageError("nothing to do: give --graph and/or --site-factors")
    return rows, fails


def cmd_osss_verify(args):
    from . import osss
    from .model import BoundaryCondition, ModelParams

    checks = _strs(args.checks)
    rows, fails = [], 0
    bc = BoundaryCondition.parse(args.bc)
    r = args.r if args.r is not None else osss.weak_monotonicity_threshold(args.p)
    if "weak-monotonicity" in checks:
        rep = osss.check_weak_monotonicity(_instance(args.instance), args.p, args.a, r, bc)
        rows.append(dict(rep.record(), **_detail(rep.detail), seed=args.seed, passed=rep.passed))
        fails += not rep.passed
    if "osss" in checks:
        rng = np.random.default_rng(args.seed)
        dom = osss.Domain.of(_instance(args.instance))
        mu = osss.rc_measure(dom, bc, ModelParams.rc(args.p, args.a, r))
        for i in range(args.triples):
            tab = osss.random_monotone_table(dom.size, rng, n_average=1 + i % 3)
            tree = osss.random_admissible_tree(dom, rng) if i % 2 else \
                osss.cluster_exploration_tree(dom, [int(rng.integers(dom.n_vertices))])
            res = osss.osss_inequality_check(mu, tab, tree)
            rows.append(dict({"check": "osss", "instance": args.instance, "index": i},
                             **res.to_dict(), seed=args.seed))
            fails += not res.holds
    if "sharp-threshold" in checks:
        rep = osss.sharp_threshold_check(args.n, args.dim, args.p, args.a, r, bc)
        rows.append(dict(rep.record(), **_detail(rep.detail), seed=args.seed, passed=rep.passed))
        fails += not rep.passed
    if not rows:
        raise UsageError("unknown --checks")
    return rows, fails


def _detail(d: dict) -> dict:
    return {k: v for k, v in d.items() if not isinstance(v, (list, dict))}


COMMANDS = {
    "exact-verify": cmd_exact_verify,
    "sample": cmd_sample,
    "crossing": cmd_crossing,
    "quad": cmd_quad,
    "phase-scan": cmd_phase_scan,
    "weak-plus": cmd_weak_plus,
    "leeyang": cmd_leeyang,
    "osss-verify": cmd_osss_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blumecapel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True)
        p.add_argument("--config", default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("exact-verify", help="exact-enumeration identity suites")
    common(p)
    p.add_argument("--suite", required=True,
                   choices=("es-coupling", "ising-mapping", "order", "comparison"))
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--instance", default=None)
    p.add_argument("--max-vertices", type=int, default=5)
    p.add_argument("--bc", default="free,wired")
    p.add_argument("--xi", default="free,plus,minus")
    p.add_argument("--p-grid", default="0.3,0.5,0.7")
    p.add_argument("--a-grid", default="0.3,0.5,0.7")
    p.add_argument("--regions", default="1x2,2x2")
    p.add_argument("--deltas", default="0.1,0.3,0.5")

    p = sub.add_parser("sample", help="Monte Carlo estimates of spin observables")
    common(p)
    p.add_argument("--instance", default="box:4:2")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--bc", default="plus")
    p.add_argument("--observables", default="mag,sigma0,sigma0sq")
    _add_sampling(p, 10_000)

    p = sub.add_parser("crossing", help="crossing and circuit probabilities")
    common(p)
    _add_rc(p)
    p.add_argument("--bc", default="wired")
    p.add_argument("--events", default="H,V")
    p.add_argument("--scale", type=int, default=8)
    _add_sampling(p, 2000)

    p = sub.add_parser("quad", help="quadrichotomy classifier")
    common(p)
    _add_rc(p)
    p.add_argument("--scales", default="8,16,32,64")
    p.add_argument("--tau", type=float, default=0.02)
    p.add_argument("--t-min", type=float, default=3.0)
    _add_sampling(p, 2000)

    p = sub.add_parser("phase-scan", help="critical-point brackets over a or Δ")
    common(p)
    p.add_argument("--a-values", default=None)
    p.add_argument("--deltas", default=None)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--tol", type=float, default=0.01)
    _add_sampling(p, 10_000)

    p = sub.add_parser("weak-plus", help="weak plus boundary probe")
    common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps", default="0,0.1,1")
    p.add_argument("--ns", default="1,2,4")
    p.add_argument("--dim", type=int, default=2)
    _add_sampling(p, 10_000)

    p = sub.add_parser("leeyang", help="complex-field partition functions")
    common(p)
    p.add_argument("--graph", default=None)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=-math.log(4.0))
    p.add_argument("--scan-cone", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--mode", choices=("uniform", "two_parameter"), default="uniform")
    p.add_argument("--A", default=None)
    p.add_argument("--site-factors", action="store_true")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--site-deltas", default=f"{-math.log(4.0)!r},-1,0,1")

    p = sub.add_parser("osss-verify", help="weak monotonicity, OSSS and threshold checks")
    common(p)
    p.add_argument("--checks", default="weak-monotonicity,osss")
    p.add_argument("--instance", default="1x2")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--bc", default="wired")
    p.add_argument("--triples", type=int, default=10)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--dim", type=int, default=1)
    return ap


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(jsonable(v), sort_keys=True)
    return fmt(v)


def _json_default(x):
    return jsonable(x)


def _round_trip(obj):
    """Floats as 17-digit strings parsed back, so JSON text is platform independent."""
    obj = jsonable(obj)
    if isinstance(obj, dict):
        return {k: _round_trip(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_trip(v) for v in obj]
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(format(obj, ".17g"))
    return obj


def write_records(path: Path, rows: list[dict], seed: int) -> None:
    rows = [dict(r, seed=r.get("seed", seed)) for r in rows]
    if path.suffix == ".csv":
        keys: list[str] = []
        for r in rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in keys])
        path.write_text(buf.getvalue(), newline="")
    else:
        text = "".join(json.dumps(_round_trip(r), sort_keys=True) + "\n" for r in rows)
        path.write_text(text)


def _manifest(args, params: dict, wall: float, status: int) -> dict:
    from .model import _resolved

    return {"command": args.command, "params": params, "seed": args.seed,
            "convention": _resolved().value, "version": __version__, "threads": args.threads,
            "wall_time": wall, "output": str(args.out), "exit_code": status}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def _read_config(path: str) -> dict:
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _parse(argv: list[str]) -> argparse.Namespace:
    """Flags win over config-file values, which win over built-in defaults."""
    ap = build_parser()
    cmd = next((t for t in argv if t in COMMANDS), None)
    path = _config_path(argv)
    cfg = {}
    if cmd is not None and path is not None:
        cfg = _read_config(path)
        sub = ap._subparsers._group_actions[0].choices[cmd]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        bad = sorted(set(cfg) - known)
        if bad:
            raise UsageError(f"unknown config keys: {', '.join(bad)}")
        for a in sub._actions:
            if a.dest in cfg:
                a.required = False
                if a.const is True:
                    cfg[a.dest] = cfg[a.dest].lower() in ("1", "true", "yes")
        sub.set_defaults(**cfg)
    return ap.parse_args(argv)


def _execute(args) -> int:
    set_workers(args.threads)
    params = {k: v for k, v in vars(args).items() if k not in RUN_KEYS}
    t0 = time.perf_counter()
    rows, fails = COMMANDS[args.command](args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_records(out, rows, args.seed)
    status = EXIT_FAIL if fails else EXIT_OK
    man = _manifest(args, params, time.perf_counter() - t0, status)
    Path(str(out) + ".manifest.json").write_text(json.dumps(jsonable(man), indent=2, sort_keys=True))
    if fails:
        print(f"{fails} check(s) failed; see {out}", file=sys.stderr)
    return status


def replay(manifest_path: str, out: str | None = None, threads: int | None = None) -> int:
    man = json.loads(Path(manifest_path).read_text())
    ns = argparse.Namespace(**man["params"])
    ns.command = man["command"]
    ns.out = out or man["output"]
    ns.threads = threads if threads is not None else man.get("threads", 1)
    ns.seed = man["seed"]
    ns.config = None
    return _execute(ns)


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "replay":
            rp = argparse.ArgumentParser(prog="blumecapel replay")
            rp.add_argument("manifest")
            rp.add_argument("--out", default=None)
            rp.add_argument("--threads", type=int, default=None)
            a = rp.parse_args(argv[1:])
            return replay(a.manifest, a.out, a.threads)
        return _execute(_parse(argv))
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except np.linalg.LinAlgError:
        raise
    except (UsageError, ValueError, KeyError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
