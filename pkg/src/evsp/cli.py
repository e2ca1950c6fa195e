"""Command-line front end.

Subcommands: generate, preprocess, root-lp, bp, dive, price-only, validate.
Defaults can be given in a JSON config file (``--config`` or the
``EVSP_CONFIG`` environment variable) whose keys are option names.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import jsonschema
import numpy as np

from .charge_arcs import DEFAULT_MAX_STATIONS, build_graphs, count_arcs
from .master import ColumnPool, NodeSpec, column_generation, write_iteration_log
from .model import (Depot, Instance, InstanceError, LinearCharge, PiecewiseCharge, Service,
                    Station, VehicleSpec)
from .oracle import generate_instance, validate
from .pricing import compute_bounds, price, reduced_costs
from .search import DivingConfig, Limits, Solution, branch_and_price, dive, solution_to_dict
from .sparsify import SparsifyConfig, sparsify

log = logging.getLogger("evsp")

SUMMARY_FIELDS = ["instance", "mode", "ub", "vehicles", "driving_cost", "bound", "gap",
                  "nodes", "time"]

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3


class InstanceFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instance I/O

def _schema() -> dict:
    text = resources.files("evsp").joinpath("data/instance.schema.json").read_text()
    return json.loads(text)


# loaders for other on-disk formats, keyed by name
ADAPTERS: dict = {}


def register_adapter(name: str) -> Callable:
    def deco(fn):
        ADAPTERS[name] = fn
        return fn
    return deco


def instance_from_dict(data: dict) -> Instance:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InstanceFormatError(f"field {where}: {err.message}") from None
    veh = data["vehicle"]
    vehicle = VehicleSpec(veh["capacity"], veh.get("fixed_cost", 10000.0), veh.get("reserve", 0.0))
    ch = data["charge"]
    try:
        if ch["type"] == "linear":
            charge = LinearCharge(ch["rate"], vehicle.usable)
        else:
            charge = PiecewiseCharge(ch["breakpoints"], vehicle.usable)
        return Instance(
            services=[Service(s["id"], s["t_begin"], s["t_end"], s.get("energy", 0.0),
                              s.get("cost", 0.0)) for s in data["services"]],
            depots=[Depot(d["id"]) for d in data["depots"]],
            stations=[Station(s["id"]) for s in data["stations"]],
            travel_time=_matrix(data, "travel_time"), travel_cost=_matrix(data, "travel_cost"),
            travel_energy=_matrix(data, "travel_energy"), horizon=data["horizon"],
            vehicle=vehicle, charge=charge, name=data.get("name", "instance"))
    except (InstanceError, ValueError) as err:
        raise InstanceFormatError(str(err)) from None


def _matrix(data: dict, key: str) -> np.ndarray:
    rows = data[key]
    n = len(data["services"]) + len(data["depots"]) + len(data["stations"])
    if len(rows) != n or any(len(r) != n for r in rows):
        raise InstanceFormatError(f"{key}: expected a {n}x{n} matrix")
    return np.array(rows, dtype=float)


def instance_to_dict(inst: Instance) -> dict:
    veh = inst.vehicle
    return {
        "name": inst.name,
        "horizon": inst.horizon,
        "vehicle": {"capacity": veh.capacity, "fixed_cost": veh.fixed_cost, "reserve": veh.reserve},
        "charge": inst.charge.to_dict(),
        "services": [{"id": s.id, "t_begin": s.t_begin, "t_end": s.t_end, "energy": s.energy,
                      "cost": s.cost} for s in inst.services],
        "depots": [{"id": d.id} for d in inst.depots],
        "stations": [{"id": s.id} for s in inst.stations],
        "travel_time": inst.travel_time.tolist(),
        "travel_cost": inst.travel_cost.tolist(),
        "travel_energy": inst.travel_energy.tolist(),
    }


def load_instance(path, fmt: str = "auto") -> Instance:
    path = Path(path)
    if fmt == "auto":
        fmt = "json" if path.suffix.lower() == ".json" else path.suffix.lstrip(".").lower()
    if fmt != "json":
        if fmt not in ADAPTERS:
            raise InstanceFormatError(
                f"no loader registered for format {fmt!r} (known: json, {', '.join(sorted(ADAPTERS)) or '-'})")
        return ADAPTERS[fmt](path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise InstanceFormatError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# outputs

def write_json(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def append_summary(path: str, row: dict) -> None:
    new = not Path(path).exists() or Path(path).stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        if new:
            w.writeheader()
        w.writerow({k: row.get(k, "") for k in SUMMARY_FIELDS})


def _fmt(x, digits=2):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return f"{x:.{digits}f}"


def summary_row(inst: Instance, mode: str, sol: Solution, elapsed: float) -> dict:
    ub = sol.cost if sol.routes else None
    driving = (sol.cost - inst.vehicle.fixed_cost * len(sol.routes)) if sol.routes else None
    return {"instance": inst.name, "mode": mode, "ub": _fmt(ub, 1), "vehicles": len(sol.routes),
            "driving_cost": _fmt(driving, 1), "bound": _fmt(sol.bound, 1),
            "gap": _fmt(100 * sol.gap if sol.routes else None, 2),
            "nodes": sol.stats.get("nodes", ""), "time": _fmt(elapsed, 2)}


# ---------------------------------------------------------------------------
# commands

def _graphs(inst: Instance, args, default_sparse: bool):
    graphs = build_graphs(inst, args.max_stations)
    use = default_sparse if args.sparsify is None else args.sparsify
    if use:
        cfg = SparsifyConfig(args.nu1, args.nu2, args.nu3, args.nu4, args.slack_weight,
                             args.lost_time_weight, args.plain_slack, args.seed)
        graphs = [sparsify(inst, g, cfg) for g in graphs]
    return graphs, use


def cmd_generate(args) -> int:
    inst = generate_instance(args.services, args.depots, args.stations, seed=args.seed,
                             horizon=args.horizon, capacity=args.capacity,
                             charge_rate=args.charge_rate, piecewise=args.piecewise)
    save_instance(inst, args.output)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    inst = load_instance(args.instance)
    full = build_graphs(inst, args.max_stations)
    graphs, used = _graphs(inst, args, default_sparse=False)
    pairs = {}
    for a in full[0].arcs if full else []:
        if a.tail < inst.n_services and a.head < inst.n_services:
            pairs.setdefault((a.tail, a.head), []).append(a)
    charging = [sum(1 for a in lst if a.stations) for lst in pairs.values()]
    report = {"instance": inst.name, "services": inst.n_services, "sparsified": used,
              "arcs": count_arcs(graphs), "arcs_unsparsified": count_arcs(full),
              "arcs_per_depot": [len(g.arcs) for g in graphs],
              "compatible_pairs": len(pairs),
              "charging_sequences_per_pair": (sum(charging) / len(charging)) if charging else 0.0}
    if args.dump:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for g in graphs:
            g.dump(out / f"depot_{inst.depots[g.depot].id}.txt")
    write_json(report, args.output)
    return EXIT_OK


def cmd_root_lp(args) -> int:
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    graphs, used = _graphs(inst, args, default_sparse=False)
    cg = column_generation(inst, graphs, ColumnPool(), NodeSpec(tuple(range(inst.n_services))),
                           backend=args.lp_backend, threads=args.threads)
    if args.log:
        write_iteration_log(args.log, cg.log)
    write_json({"instance": inst.name, "sparsified": used, "status": cg.status,
                "lp_value": cg.lp_value, "iterations": cg.iterations,
                "columns": len(cg.columns)}, args.output)
    log.info("root LP %.4f in %.2fs", cg.lp_value, time.perf_counter() - t0)
    return EXIT_OK if cg.status == "optimal" else EXIT_INFEASIBLE


def _finish(inst, graphs, mode, sol, args, elapsed) -> int:
    out = solution_to_dict(inst, graphs, sol)
    out["mode"] = mode
    # wall time and the node trace stay out so that reruns are byte-identical
    out["stats"] = {k: (v if not isinstance(v, float) or math.isfinite(v) else None)
                    for k, v in sol.stats.items() if k not in ("time", "trace")}
    write_json(out, args.output)
    if args.summary:
        append_summary(args.summary, summary_row(inst, mode, sol, elapsed))
    if sol.status == "infeasible":
        return EXIT_INFEASIBLE
    if sol.status == "limit":
        return EXIT_LIMIT
    return EXIT_OK


def _limits(args) -> Limits:
    return Limits(args.time_limit if args.time_limit else math.inf,
                  args.node_limit if args.node_limit else 1_000_000)


def cmd_bp(args) -> int:
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    graphs, _ = _graphs(inst, args, default_sparse=False)
    sol = branch_and_price(inst, graphs, _limits(args), backend=args.lp_backend,
                           threads=args.threads)
    return _finish(inst, graphs, "bp", sol, args, time.perf_counter() - t0)


def cmd_dive(args) -> int:
    inst = load_instance(args.instance)
    t0 = time.perf_counter()
    graphs, _ = _graphs(inst, args, default_sparse=True)
    cfg = DivingConfig(args.sddl, args.sdms, args.dmr, args.sr, args.seed)
    sol = dive(inst, graphs, cfg, _limits(args), backend=args.lp_backend, threads=args.threads)
    return _finish(inst, graphs, "dive", sol, args, time.perf_counter() - t0)


def cmd_price_only(args) -> int:
    inst = load_instance(args.instance)
    graphs, _ = _graphs(inst, args, default_sparse=False)
    if args.duals:
        duals = [float(v) for v in json.loads(Path(args.duals).read_text())]
        if len(duals) != inst.n_services:
            raise InstanceFormatError(f"expected {inst.n_services} duals, got {len(duals)}")
    else:
        duals = [0.0] * inst.n_services
    out = {"instance": inst.name, "depots": []}
    for g in graphs:
        rc = reduced_costs(g, duals, inst.vehicle.fixed_cost)
        bcost, blevel = compute_bounds(g, rc)
        routes = price(g, rc, (bcost, blevel), max_columns=args.top, threshold=math.inf)
        fin = lambda v: v if math.isfinite(v) else None  # noqa: E731
        out["depots"].append({
            "depot": inst.depots[g.depot].id,
            "bounds": [{"vertex": ("o" if v == g.origin else "d" if v == g.sink else inst.label(v)),
                        "reduced_cost": fin(bcost[v]), "min_level": fin(blevel[v])}
                       for v in range(g.n + 2)],
            "routes": [{"services": [inst.label(s) for s in r.services], "cost": r.cost,
                        "reduced_cost": r.reduced_cost} for r in routes]})
    write_json(out, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    solution = json.loads(Path(args.solution).read_text())
    report = validate(inst, solution)
    write_json(report.to_dict(), args.output)
    return EXIT_OK if report.feasible else EXIT_INVALID


# ---------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser, solve: bool = True) -> None:
    p.add_argument("instance", help="instance file (JSON)")
    p.add_argument("-o", "--output", default="-", help="output JSON path (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-stations", type=int, default=DEFAULT_MAX_STATIONS,
                   help="longest station sequence per arc")
    g = p.add_argument_group("sparsification")
    g.add_argument("--sparsify", dest="sparsify", action="store_true", default=None)
    g.add_argument("--no-sparsify", dest="sparsify", action="store_false")
    g.add_argument("--nu1", type=int, default=2)
    g.add_argument("--nu2", type=int, default=2)
    g.add_argument("--nu3", type=int, default=15)
    g.add_argument("--nu4", type=int, default=2)
    g.add_argument("--slack-weight", type=float, default=0.1)
    g.add_argument("--lost-time-weight", type=float, default=0.1)
    g.add_argument("--plain-slack", choices=["gap", "span"], default="gap",
                   help="slack used for arcs without stations")
    if solve:
        p.add_argument("--lp-backend", choices=["highs", "scipy", "simplex"], default="highs")
        p.add_argument("--threads", type=int, default=1, help="concurrent depot pricing")
        p.add_argument("--time-limit", type=float, default=0.0, help="seconds, 0 = none")
        p.add_argument("--node-limit", type=int, default=0, help="0 = none")
        p.add_argument("--summary", help="append a CSV summary row to this file")
        p.add_argument("--log", help="write the column generation iteration log (CSV)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsp", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with option defaults (or $EVSP_CONFIG)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("generate", help="write a seeded random instance")
    p.add_argument("output")
    p.add_argument("--services", type=int, default=20)
    p.add_argument("--depots", type=int, default=2)
    p.add_argument("--stations", type=int, default=4)
    p.add_argument("--horizon", type=float, default=1440.0)
    p.add_argument("--capacity", type=float, default=120.0)
    p.add_argument("--charge-rate", type=float, default=2.0)
    p.add_argument("--piecewise", action="store_true", help="concave piecewise charge profile")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="build (and optionally sparsify) the depot graphs")
    _common(p, solve=False)
    p.add_argument("--dump", help="directory for one text dump per depot graph")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("root-lp", help="column generation at the root node")
    _common(p)
    p.set_defaults(func=cmd_root_lp)

    p = sub.add_parser("bp", help="exact branch-and-price")
    _common(p)
    p.set_defaults(func=cmd_bp)

    p = sub.add_parser("dive", help="diving heuristic (sparsified graphs by default)")
    _common(p)
    p.add_argument("--sddl", type=int, default=2, help="strong diving depth limit")
    p.add_argument("--sdms", type=int, default=2, help="candidates per strong diving step")
    p.add_argument("--dmr", type=int, default=1, help="routes fixed per regular step")
    p.add_argument("--sr", dest="sr", action="store_true", default=True,
                   help="seed the pool with singleton routes (default)")
    p.add_argument("--no-sr", dest="sr", action="store_false")
    p.set_defaults(func=cmd_dive)

    p = sub.add_parser("price-only", help="dump pricing bounds and the best routes")
    _common(p)
    p.add_argument("--duals", help="JSON list with one dual value per service (default 0)")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_price_only)

    p = sub.add_parser("validate", help="check a solution file")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    path = known.config or os.environ.get("EVSP_CONFIG")
    if not path:
        return
    cfg = json.loads(Path(path).read_text())
    if not isinstance(cfg, dict):
        raise InstanceFormatError(f"{path}: config must be a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in defaults.items()
                               if any(a.dest == k for a in sp._actions)})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, json.JSONDecodeError, InstanceFormatError) as err:
        print(f"evsp: config error: {err}", file=sys.stderr)
        return EXIT_INVALID
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceFormatError, OSError) as err:
        print(f"evsp: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
