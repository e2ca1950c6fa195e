"""Restricted master problem and the column generation loop."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .charge_arcs import DepotGraph
from .lp import make_session
from .model import EPS, Instance
from .pricing import PricedRoute, compute_bounds, price, reduced_costs

log = logging.getLogger(__name__)

ARTIFICIAL_COST = 1e7
MAX_COLUMNS_PER_DEPOT = 50


@dataclass(eq=False)
class Column:
    id: int
    depot: int
    arcs: tuple       # arc ids in the depot graph
    services: tuple
    cost: float
    pairs: tuple      # (tail, head) vertex pairs of the arcs

    @property
    def key(self) -> tuple:
        return (self.depot, self.arcs)


class ColumnPool:
    """Append-only set of columns, deduplicated by (depot, arcs)."""

    def __init__(self):
        self.columns: list = []
        self._index: dict = {}

    def __len__(self):
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    def add(self, graph: DepotGraph, route: PricedRoute) -> Optional[Column]:
        key = (route.depot, route.arcs)
        if key in self._index:
            return None
        pairs = tuple((graph.arcs[i].tail, graph.arcs[i].head) for i in route.arcs)
        col = Column(len(self.columns), route.depot, route.arcs, route.services, route.cost, pairs)
        self.columns.append(col)
        self._index[key] = col
        return col

    def get(self, depot: int, arcs: tuple) -> Optional[Column]:
        return self._index.get((depot, arcs))


@dataclass(frozen=True)
class DepotRow:
    """``sum of x over routes of depot`` <= or >= ``rhs``."""
    depot: int
    sense: str
    rhs: float


@dataclass
class NodeSpec:
    """Restrictions defining a search node.

    ``active``: services still to cover. ``rows``: depot rows.
    ``forbidden``: predicate on arc (tail, head) pairs, per depot.
    """
    active: tuple
    rows: tuple = ()
    forbid_pair: Optional[object] = None     # callable (depot, tail, head) -> bool
    fixed_cost: float = 0.0

    def removed_arcs(self, graph: DepotGraph, active_set: set) -> set:
        n = graph.n
        out = set()
        for a in graph.arcs:
            if (a.tail < n and a.tail not in active_set) or (a.head < n and a.head not in active_set):
                out.add(a.id)
            elif self.forbid_pair is not None and self.forbid_pair(graph.depot, a.tail, a.head):
                out.add(a.id)
        return out


def column_allowed(col: Column, spec: NodeSpec, active_set: set) -> bool:
    if any(s not in active_set for s in col.services):
        return False
    if spec.forbid_pair is not None:
        return not any(spec.forbid_pair(col.depot, t, h) for t, h in col.pairs)
    return True


@dataclass
class RmpSolution:
    objective: float
    x: dict              # column id -> value (positive entries only)
    duals: np.ndarray    # per service index (0 for inactive services)
    row_duals: list      # per depot row
    artificial: float    # total artificial activity


class RestrictedMaster:
    """Node LP kept alive across column generation iterations.

    One partition row per active service and one row per depot restriction.
    Artificial columns keep every row feasible.
    """

    def __init__(self, inst: Instance, spec: NodeSpec, backend: str = "highs"):
        self.inst = inst
        self.spec = spec
        self.active = list(spec.active)
        self.row_of = {s: i for i, s in enumerate(self.active)}
        self.m_part = len(self.active)
        senses = ["E"] * self.m_part + [r.sense for r in spec.rows]
        rhs = [1.0] * self.m_part + [r.rhs for r in spec.rows]
        self.session = make_session(senses, rhs, backend)
        art = [i for i, (sn, b) in enumerate(zip(senses, rhs)) if sn == "E" or (sn == "G" and b > 0)]
        self.n_art = len(art)
        self.session.add_columns([ARTIFICIAL_COST] * len(art), [[i] for i in art])
        self.columns: list = []

    def rows(self, col: Column) -> list:
        out = [self.row_of[s] for s in col.services]
        out.extend(self.m_part + k for k, r in enumerate(self.spec.rows) if r.depot == col.depot)
        return out

    def add(self, cols: Sequence[Column]) -> None:
        cols = list(cols)
        self.columns.extend(cols)
        self.session.add_columns([c.cost for c in cols], [self.rows(c) for c in cols])

    def solve(self) -> RmpSolution:
        res = self.session.solve()
        if res.status != "optimal":
            raise RuntimeError(f"restricted master returned status {res.status}")
        xs = res.x[self.n_art:]
        x = {self.columns[j].id: float(v) for j, v in enumerate(xs) if v > 1e-9}
        duals = np.zeros(self.inst.n_services)
        for s, i in self.row_of.items():
            duals[s] = res.y[i]
        art = float(res.x[:self.n_art].sum())
        return RmpSolution(res.objective, x, duals, list(res.y[self.m_part:]), art)


def solve_rmp(inst: Instance, columns: Sequence[Column], spec: NodeSpec,
              backend: str = "highs") -> RmpSolution:
    """One-shot solve of the LP over ``columns``."""
    rmp = RestrictedMaster(inst, spec, backend)
    rmp.add(columns)
    return rmp.solve()


@dataclass
class Stabilizer:
    alpha: float = 0.9
    center: Optional[np.ndarray] = None

    def smooth(self, new: np.ndarray) -> np.ndarray:
        return smoothed_duals(self.alpha, self.center, new)

    def decrease(self) -> None:
        self.alpha = max(0.0, round(self.alpha - 0.1, 1))


def smoothed_duals(alpha: float, previous: Optional[np.ndarray], new: np.ndarray) -> np.ndarray:
    """Convex combination ``alpha * previous + (1 - alpha) * new``."""
    if previous is None or alpha <= 0.0:
        return np.array(new, dtype=float)
    return alpha * np.asarray(previous) + (1.0 - alpha) * np.asarray(new)


@dataclass
class CGResult:
    status: str              # "optimal" or "infeasible"
    lp_value: float
    x: dict
    duals: np.ndarray
    iterations: int
    log: list = field(default_factory=list)
    columns: list = field(default_factory=list)   # columns of the node's RMP


def _price_all(inst, graphs, spec, removed, duals, row_duals, max_columns, threads):
    depot_dual = {}
    for r, mu in zip(spec.rows, row_duals):
        depot_dual[r.depot] = depot_dual.get(r.depot, 0.0) + mu

    def work(g):
        rc = reduced_costs(g, duals, inst.vehicle.fixed_cost, depot_dual.get(g.depot, 0.0),
                           removed=removed[g.depot])
        return price(g, rc, compute_bounds(g, rc), max_columns=max_columns, threshold=-EPS)

    if threads > 1 and len(graphs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(work, graphs))
    return [work(g) for g in graphs]


def column_generation(inst: Instance, graphs: Sequence[DepotGraph], pool: ColumnPool,
                      spec: NodeSpec, backend: str = "highs", stabilize: bool = True,
                      max_columns: int = MAX_COLUMNS_PER_DEPOT, threads: int = 1,
                      max_iterations: int = 100000) -> CGResult:
    """Solve the node LP to optimality over all routes of ``graphs``."""
    active_set = set(spec.active)
    if not active_set:
        return CGResult("optimal", 0.0, {}, np.zeros(inst.n_services), 0)
    removed = {g.depot: spec.removed_arcs(g, active_set) for g in graphs}
    columns = [c for c in pool if column_allowed(c, spec, active_set)]
    in_rmp = {c.id for c in columns}
    rmp = RestrictedMaster(inst, spec, backend)
    rmp.add(columns)
    stab = Stabilizer(0.9 if stabilize else 0.0)
    n = inst.n_services
    history = []
    it = 0
    sol = None
    need_solve = True
    while it < max_iterations:
        if need_solve:
            sol = rmp.solve()
            it += 1
        t0 = time.perf_counter()
        pi = stab.smooth(np.concatenate([sol.duals, sol.row_duals]))
        found = _price_all(inst, graphs, spec, removed, pi[:n], list(pi[n:]), max_columns,
                           threads)
        fresh = []
        for g, routes in zip(graphs, found):
            for r in routes:
                col = pool.add(g, r)
                if col is None:
                    # already pooled, possibly filtered out at this node
                    col = pool.get(r.depot, r.arcs)
                    if col.id in in_rmp or not column_allowed(col, spec, active_set):
                        continue
                fresh.append(col)
                in_rmp.add(col.id)
        added = len(fresh)
        if fresh:
            columns.extend(fresh)
            rmp.add(fresh)
        history.append({"iteration": it, "lp_value": sol.objective, "columns_added": added,
                        "alpha": stab.alpha, "pricing_time": time.perf_counter() - t0})
        if added:
            stab.center = pi
            need_solve = True
            continue
        if stab.alpha <= 0.0:
            break
        stab.decrease()
        need_solve = False
    status = "infeasible" if sol.artificial > 1e-6 else "optimal"
    return CGResult(status, sol.objective, sol.x, sol.duals, it, history, columns)


def is_integral(x: dict, tol: float = 1e-6) -> bool:
    return all(v < tol or v > 1 - tol for v in x.values())


def write_iteration_log(path, rows: Sequence[dict]) -> None:
    import csv
    fields = ["iteration", "lp_value", "columns_added", "alpha", "pricing_time"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})
