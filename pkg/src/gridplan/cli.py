"""Command line interface.

Exit codes: 0 feasible / success, 1 completed but infeasible, 2 input error.
Every command that writes an output directory also writes ``manifest.json``;
``gridplan replay --manifest DIR/manifest.json`` reruns it. Wall-clock times
go to ``timing.json`` so that all other files are reproducible byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .constraints import evaluate, extended_cost
from .measures import MeasureError, PlanningRules, solution_cost
from .network import NetworkFormatError, load_network, validate
from .optimizer import (
    EXHAUSTIVE_LIMIT,
    PlanningProblem,
    SearchError,
    exhaustive_search,
    resolve_config,
    run_search,
)
from .powerflow import LoadCase, load_cases
from .scenarios import ResScenario, ScenarioError, run_study, summary_csv
from .topology import InvalidNetworkError, analyze_topology

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2

DEFAULT_CASES = (
    LoadCase("high_feed_in", load_scale=0.25, generation_scale=1.0, v_min=0.9, v_max=1.05),
    LoadCase("high_load", load_scale=1.0, generation_scale=0.0, v_min=0.9, v_max=1.05),
)


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    command: str
    args: dict
    inputs: dict  # role -> {"path", "sha256"}
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command, "args": self.args, "inputs": self.inputs, "config": self.config,
            "seed": self.seed, "version": self.version, "started": self.started,
            "finished": self.finished, "outputs": self.outputs,
        }

    def write(self, out: Path) -> None:
        _write(out / "manifest.json", json.dumps(self.to_dict(), indent=2) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _inputs(**paths) -> dict:
    return {k: {"path": str(Path(p).resolve()), "sha256": _sha256(Path(p))}
            for k, p in paths.items() if p is not None}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# input loading; every failure becomes InputError


def _load_network(path):
    try:
        net = load_network(path)
    except FileNotFoundError:
        raise InputError(f"network file not found: {path}") from None
    except NetworkFormatError as exc:
        raise InputError(str(exc)) from None
    return net


def _load_json_input(loader, path, what):
    try:
        return loader(path)
    except FileNotFoundError:
        raise InputError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _cases(path) -> list[LoadCase]:
    return list(DEFAULT_CASES) if path is None else _load_json_input(load_cases, path, "cases")


def _rules(path) -> PlanningRules:
    if path is None:
        return PlanningRules(enable=frozenset({"replace_line", "open_switch"}))
    return _load_json_input(PlanningRules.load, path, "rules")


def _problem(net, cases, rules) -> PlanningProblem:
    report = validate(net)
    if not report.ok:
        raise InputError(f"invalid network:\n{report}")
    try:
        return PlanningProblem.from_network(net, cases, rules)
    except (MeasureError, InvalidNetworkError) as exc:
        raise InputError(str(exc)) from None


def _search(problem: PlanningProblem, algorithm: str, seed: int, budget: int | None, memo=None):
    """(solution, cost, trace-or-None, config dict)."""
    if algorithm == "exhaustive":
        try:
            sol, cost = exhaustive_search(problem, memo)
        except SearchError as exc:
            raise InputError(str(exc)) from None
        return sol, cost, None, {"algorithm": "exhaustive", "limit": EXHAUSTIVE_LIMIT}
    try:
        cfg = resolve_config(algorithm, seed, budget)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    res = run_search(problem, cfg, memo=memo)
    return res.solution, res.cost, res.trace, {"name": algorithm, **cfg.to_dict()}


def _solution_doc(problem, sol, cost, algorithm, evaluations) -> dict:
    cat = problem.catalog
    return {
        "algorithm": algorithm,
        "measures": [cat[m].to_dict() for m in cat.ids if m in sol],
        "total_cost": solution_cost(sol, cat),
        "cost": cost.to_dict(),
        "evaluations": evaluations,
        "catalog_size": len(cat),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    net = _load_network(args.network)
    cases = _cases(args.cases)
    vr = validate(net)
    print(f"validation: {'ok' if vr.ok else 'FAILED'}")
    if not vr.ok:
        print(vr)
        return EXIT_INFEASIBLE
    topo = analyze_topology(net, check=False)
    print(f"topology: supplied buses {len(topo.supplied_bus_ids)}, "
          f"unsupplied load points {topo.unsupplied_load_point_count}, "
          f"meshed load points {topo.meshed_load_point_count}, radial {topo.is_radial}")
    rep = evaluate(net, cases, check=False)
    cost = extended_cost(rep, 0.0)
    print("constraints: " + json.dumps(rep.to_dict()))
    print(f"level {cost.level}")
    return EXIT_OK if cost.level == 0 else EXIT_INFEASIBLE


def cmd_plan(args) -> int:
    started = _now()
    out = Path(args.out)
    net = _load_network(args.network)
    cases = _cases(args.cases)
    rules = _rules(args.rules)
    problem = _problem(net, cases, rules)
    t0 = time.perf_counter()
    sol, cost, trace, cfg = _search(problem, args.algorithm, args.seed, args.budget)
    wall = time.perf_counter() - t0
    evals = trace.evaluations if trace is not None else None
    _write(out / "solution.json",
           json.dumps(_solution_doc(problem, sol, cost, args.algorithm, evals), indent=2) + "\n")
    outputs = ["solution.json"]
    if trace is not None:
        trace.write(out / "trace.jsonl")
        outputs.append("trace.jsonl")
    _write(out / "timing.json", json.dumps({"wall_time_s": wall}) + "\n")
    RunManifest("plan", _args_dict(args), _inputs(network=args.network, rules=args.rules, cases=args.cases),
                {"search": cfg, "rules": rules.to_dict(), "cases": [c.to_dict() for c in cases]},
                args.seed, started=started, finished=_now(), outputs=outputs).write(out)
    print(f"{args.algorithm}: cost {cost} with {len(sol)} measures: {' '.join(m for m in problem.catalog.ids if m in sol)}")
    return EXIT_OK if cost.level == 0 else EXIT_INFEASIBLE


_WORKER: dict = {}


def _compare_init(problem):
    _WORKER["problem"] = problem
    _WORKER["memo"] = {}


def _compare_job(job):
    name, seed, budget = job
    problem = _WORKER["problem"]
    sol, cost, trace, _ = _search(problem, name, seed, budget, memo=_WORKER["memo"])
    return name, seed, sol, cost, trace


def cmd_compare(args) -> int:
    started = _now()
    if len(args.algorithm) < 2:
        raise InputError("compare needs at least two algorithm configurations")
    if "exhaustive" in args.algorithm:
        raise InputError("exhaustive is the oracle, use --oracle")
    out = Path(args.out)
    net = _load_network(args.network)
    cases = _cases(args.cases)
    rules = _rules(args.rules)
    problem = _problem(net, cases, rules)
    configs = {}
    for name in args.algorithm:
        try:
            configs[name] = resolve_config(name, args.seed, args.budget).to_dict()
        except ValueError as exc:
            raise InputError(str(exc)) from None
    seeds = [args.seed + i for i in range(args.runs)]
    jobs = [(name, s, args.budget) for name in args.algorithm for s in seeds]

    t0 = time.perf_counter()
    oracle = None
    if args.oracle:
        _compare_init(problem)
        try:
            oracle = exhaustive_search(problem, _WORKER["memo"])
        except SearchError as exc:
            raise InputError(str(exc)) from None
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers, initializer=_compare_init, initargs=(problem,)) as pool:
            results = list(pool.map(_compare_job, jobs))
    else:
        if not _WORKER or _WORKER.get("problem") is not problem:
            _compare_init(problem)
        results = [_compare_job(j) for j in jobs]
    wall = time.perf_counter() - t0

    runs = io.StringIO()
    w = csv.writer(runs, lineterminator="\n")
    w.writerow(["config", "seed", "level", "magnitude", "evaluations", "solution"])
    by_config: dict[str, list] = {n: [] for n in args.algorithm}
    for name, seed, sol, cost, trace in results:
        w.writerow([name, seed, cost.level, repr(float(cost.magnitude)), trace.evaluations,
                    "+".join(m for m in problem.catalog.ids if m in sol)])
        by_config[name].append(cost)
        trace.write(out / "traces" / f"{name}_{seed}.jsonl")
    _write(out / "runs.csv", runs.getvalue())

    dist = io.StringIO()
    w = csv.writer(dist, lineterminator="\n")
    header = ["config", "n", "feasible_rate", "min", "q25", "median", "q75", "max", "mean"]
    if oracle is not None:
        header += ["optimum_rate", "beats_oracle"]
    w.writerow(header)
    all_feasible = True
    for name, costs in by_config.items():
        feas = np.array([c.magnitude for c in costs if c.level == 0], dtype=float)
        all_feasible &= len(feas) == len(costs)
        stats = list(np.percentile(feas, [0, 25, 50, 75, 100])) + [feas.mean()] if len(feas) else [float("nan")] * 6
        row = [name, len(costs), len(feas) / len(costs)] + [repr(float(x)) for x in stats]
        if oracle is not None:
            row += [sum(c == oracle[1] for c in costs) / len(costs), sum(c < oracle[1] for c in costs)]
        w.writerow(row)
    _write(out / "distribution.csv", dist.getvalue())
    if oracle is not None:
        _write(out / "oracle.json", json.dumps(
            _solution_doc(problem, oracle[0], oracle[1], "exhaustive", None), indent=2) + "\n")
    _write(out / "timing.json", json.dumps({"wall_time_s": wall}) + "\n")
    RunManifest("compare", _args_dict(args), _inputs(network=args.network, rules=args.rules, cases=args.cases),
                {"configs": configs, "seeds": seeds, "rules": rules.to_dict(),
                 "cases": [c.to_dict() for c in cases]},
                args.seed, started=started, finished=_now(),
                outputs=["runs.csv", "distribution.csv", "traces/"] + (["oracle.json"] if oracle else [])).write(out)
    print(dist.getvalue(), end="")
    return EXIT_OK if all_feasible else EXIT_INFEASIBLE


def cmd_study(args) -> int:
    started = _now()
    if not args.scenario:
        raise InputError("study needs at least one --scenario file")
    out = Path(args.out)
    net = _load_network(args.network)
    vr = validate(net)
    if not vr.ok:
        raise InputError(f"invalid network:\n{vr}")
    cases = _cases(args.cases)
    rules = _rules(args.rules)
    scenarios = []
    for p in args.scenario:
        try:
            scenarios.append(ResScenario.load(p))
        except FileNotFoundError:
            raise InputError(f"scenario file not found: {p}") from None
        except (ScenarioError, ValueError) as exc:
            raise InputError(f"{p}: {exc}") from None
    algorithm = "exhaustive" if args.algorithm == "exhaustive" else None
    try:
        search = resolve_config("ils" if algorithm else args.algorithm, args.seed, args.budget)
    except ValueError as exc:
        raise InputError(str(exc)) from None

    results, timings = [], {}
    for sc in scenarios:
        r = run_study(net, sc, rules, cases, search, args.samples, args.seed,
                      workers=args.workers, algorithm=algorithm)
        results.append(r)
        _write(out / f"records_{sc.name}.json", r.records_json())
        timings[sc.name] = r.timings()
    _write(out / "summary.csv", summary_csv([r.summary for r in results]))
    _write(out / "timing.json", json.dumps(timings, indent=2) + "\n")
    inputs = _inputs(network=args.network, rules=args.rules, cases=args.cases)
    inputs.update(_inputs(**{f"scenario_{i}": p for i, p in enumerate(args.scenario)}))
    RunManifest("study", _args_dict(args), inputs,
                {"search": {"name": args.algorithm, **search.to_dict()}, "rules": rules.to_dict(),
                 "cases": [c.to_dict() for c in cases], "scenarios": [s.to_dict() for s in scenarios],
                 "samples": args.samples},
                args.seed, started=started, finished=_now(),
                outputs=[f"records_{s.name}.json" for s in scenarios] + ["summary.csv"]).write(out)
    print(summary_csv([r.summary for r in results]), end="")
    failed = all(rec.error is not None for r in results for rec in r.records)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.manifest)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        command, saved = doc["command"], doc["args"]
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a run manifest ({exc})") from None
    for role, info in doc.get("inputs", {}).items():
        p = Path(info["path"])
        if not p.exists() or _sha256(p) != info["sha256"]:
            raise InputError(f"input {role} ({p}) is missing or changed since the run")
    if command not in COMMANDS or command == "replay":
        raise InputError(f"cannot replay command {command!r}")
    ns = argparse.Namespace(**saved)
    ns.out = args.out if args.out is not None else str(path.parent)
    return COMMANDS[command](ns)


def cmd_fixtures(args) -> int:
    """Write the bundled example inputs as JSON files."""
    from . import fixtures as fx
    from .network import save_network

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(fx.intro_ring(), out / "intro_ring.json")
    save_network(fx.ring_study_base(), out / "ring_no_pv.json")
    save_network(fx.trail_grid(), out / "trail_grid.json")
    _write(out / "cases_feed_in.json", json.dumps([c.to_dict() for c in fx.intro_cases()], indent=2) + "\n")
    _write(out / "cases_load.json", json.dumps([c.to_dict() for c in fx.trail_cases()], indent=2) + "\n")
    _write(out / "rules_switching.json", json.dumps(fx.ring_rules().to_dict(), indent=2) + "\n")
    _write(out / "rules_replace_only.json", json.dumps(
        PlanningRules(enable=frozenset({"replace_line"}), replace_scope="all").to_dict(), indent=2) + "\n")
    _write(out / "rules_trails.json", json.dumps(fx.trail_rules().to_dict(), indent=2) + "\n")
    for sc in fx.ring_scenarios():
        _write(out / f"scenario_{sc.name}.json", json.dumps(sc.to_dict(), indent=2) + "\n")
    print(f"fixtures written to {out}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "plan": cmd_plan,
    "compare": cmd_compare,
    "study": cmd_study,
    "replay": cmd_replay,
    "fixtures": cmd_fixtures,
}

_PATH_ARGS = ("network", "rules", "cases")


def _args_dict(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    for k in _PATH_ARGS:
        if d.get(k) is not None:
            d[k] = str(Path(d[k]).resolve())
    if d.get("scenario"):
        d["scenario"] = [str(Path(p).resolve()) for p in d["scenario"]]
    return d


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridplan", description="Automated distribution network planning.")
    p.add_argument("--version", action="version", version=f"gridplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--network", required=True)
        sp.add_argument("--rules")
        sp.add_argument("--cases")
        if out:
            sp.add_argument("--out", required=True)

    sp = sub.add_parser("validate", help="validate a network and evaluate its constraints")
    sp.add_argument("--network", required=True)
    sp.add_argument("--cases")

    sp = sub.add_parser("plan", help="search a cost-minimal feasible plan")
    common(sp)
    sp.add_argument("--algorithm", default="ils", help="hc, ils, ils_ae, lahc, exhaustive or a named config")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=5000)

    sp = sub.add_parser("compare", help="compare search configurations over many seeds")
    common(sp)
    sp.add_argument("--algorithm", nargs="+", default=["ILS_4_HC", "ILS_4_HC_AE", "LAHC_50"])
    sp.add_argument("--seed", type=int, default=0, help="first seed; run i uses seed + i")
    sp.add_argument("--runs", type=int, default=50)
    sp.add_argument("--budget", type=int, default=5000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--oracle", action="store_true", help="also run the exhaustive search")

    sp = sub.add_parser("study", help="probabilistic RES study")
    common(sp)
    sp.add_argument("--scenario", nargs="+", required=True)
    sp.add_argument("--algorithm", default="ils")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--budget", type=int, default=5000)
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("replay", help="rerun a command from its manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out")

    sp = sub.add_parser("fixtures", help="write the bundled example inputs")
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    for k in ("budget", "samples", "runs", "workers"):
        v = getattr(args, k, None)
        if v is not None and v < 1:
            print(f"error: --{k} must be positive", file=sys.stderr)
            return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
