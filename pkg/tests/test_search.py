from __future__ import annotations

import json

import pytest

from conftest import desk_instance
from evsp.charge_arcs import build_graphs
from evsp.master import Column
from evsp.oracle import exact_small_solve, validate
from evsp.search import (Branch, DivingConfig, Limits, NothingToBranch, Restrictions,
                         branch_and_price, dive, extract_integral, select_branch,
                         singleton_columns, solution_to_dict)
from evsp.master import ColumnPool

BRANCHING_SEEDS = [8, 21, 28, 31, 45]   # desk seeds whose root LP is fractional


def _col(i, depot, services, n, cost=1.0):
    o, d = n, n + 1
    seq = (o,) + tuple(services) + (d,)
    return Column(i, depot, (i,), tuple(services), cost, tuple(zip(seq, seq[1:])))


def test_select_branch_integral_rejected():
    cols = {0: _col(0, 0, [0], 2), 1: _col(1, 0, [1], 2)}
    with pytest.raises(NothingToBranch):
        select_branch({0: 1.0, 1: 1.0}, cols, 2)


def test_select_branch_depot_count():
    n = 5
    cols = {i: _col(i, 0, [i], n) for i in range(5)}
    x = {0: 1.0, 1: 1.0, 2: 0.5}
    br = select_branch(x, cols, n)
    assert br == Branch("depot", (0,), 2.5)
    assert (br.floor, br.ceil) == (2, 3)
    down, up = Restrictions().child(br, False), Restrictions().child(br, True)
    assert [(r.sense, r.rhs) for r in down.depot_rows] == [("L", 2.0)]
    assert [(r.sense, r.rhs) for r in up.depot_rows] == [("G", 3.0)]


def test_select_branch_shared_traversal():
    n = 3
    cols = {0: _col(0, 0, [0, 1], n), 1: _col(1, 0, [0, 2], n),
            2: _col(2, 0, [2], n), 3: _col(3, 0, [1], n)}
    x = {c: 0.5 for c in cols}
    br = select_branch(x, cols, n)
    # depot count is 2; traversals 0->1 and 0->2 tie at 0.5, smallest key wins
    assert br.kind == "arc" and br.key == (0, 1) and br.value == 0.5


def test_select_branch_assignment_fallback():
    n = 2
    cols = {0: _col(0, 0, [0], n), 1: _col(1, 1, [0], n),
            2: _col(2, 0, [1], n), 3: _col(3, 1, [1], n)}
    x = {c: 0.5 for c in cols}
    br = select_branch(x, cols, n)
    assert br.kind == "assign" and br.key == (0, 0)


def test_extract_integral_keeps_cheapest_copy():
    n = 2
    a, b = _col(0, 0, [0, 1], n, cost=5.0), _col(1, 0, [0, 1], n, cost=4.0)
    assert extract_integral({0: 0.5, 1: 0.5}, {0: a, 1: b}) == [b]


def test_forbid_semantics():
    n = 4
    o, d = n, n + 1
    r = Restrictions().child(Branch("arc", (0, 1), 0.5), True)
    assert not r.forbid(0, 0, 1)
    assert r.forbid(0, 0, 2) and r.forbid(0, 2, 1) and r.forbid(0, o, 1) and r.forbid(0, 0, d)
    assert not r.forbid(0, 2, 3)
    r = Restrictions().child(Branch("arc", (0, 1), 0.5), False)
    assert r.forbid(1, 0, 1) and not r.forbid(1, 0, 2)
    r = Restrictions().child(Branch("assign", (1, 2), 0.5), True)
    assert r.forbid(0, 0, 2) and not r.forbid(1, 0, 2) and not r.forbid(0, 2, 3)
    r = Restrictions().child(Branch("assign", (1, 2), 0.5), False)
    assert r.forbid(1, o, 2) and not r.forbid(0, o, 2)


@pytest.fixture(scope="module")
def branching_cases():
    out = []
    for seed in BRANCHING_SEEDS:
        inst = desk_instance(seed)
        graphs = build_graphs(inst)
        out.append((inst, graphs, exact_small_solve(inst, graphs)))
    return out


def test_bp_matches_exact_with_branching(branching_cases):
    for inst, graphs, exact in branching_cases:
        sol = branch_and_price(inst, graphs)
        assert sol.status == "optimal"
        assert sol.stats["nodes"] > 1
        assert sol.cost == pytest.approx(exact.cost, abs=1e-6)
        rep = validate(inst, solution_to_dict(inst, graphs, sol))
        assert rep.feasible and rep.cost == pytest.approx(sol.cost, abs=1e-6)


def test_bp_best_bound_order(branching_cases):
    for inst, graphs, _ in branching_cases:
        trace = branch_and_price(inst, graphs).stats["trace"]
        popped = [b for b, _ in trace]
        assert all(a <= b + 1e-9 for a, b in zip(popped, popped[1:]))
        # a node's LP is at least the bound it was queued with (its parent's LP)
        assert all(lp >= b - 1e-6 for b, lp in trace)


def test_bp_node_limit(branching_cases):
    inst, graphs, exact = branching_cases[2]
    sol = branch_and_price(inst, graphs, Limits(node_limit=1))
    assert sol.status == "limit"
    assert sol.bound <= exact.cost + 1e-6


def test_bp_infeasible():
    inst = desk_instance(3)
    graphs = [g.with_arcs(lambda a: a.head != 0) for g in build_graphs(inst)]
    assert branch_and_price(inst, graphs).status == "infeasible"


def test_dive_valid_and_above_optimum(branching_cases):
    for inst, graphs, exact in branching_cases:
        sol = dive(inst, graphs, DivingConfig(2, 2, 1, True))
        assert sol.status == "feasible"
        assert sol.cost >= exact.cost - 1e-6
        assert validate(inst, solution_to_dict(inst, graphs, sol)).feasible
        assert sol.bound <= exact.cost + 1e-6


@pytest.mark.parametrize("cfg", [DivingConfig(0, 0, 1, False), DivingConfig(1, 3, 2, True),
                                 DivingConfig(2, 2, 1, True, seed=5)])
def test_dive_deterministic(branching_cases, cfg):
    inst, graphs, _ = branching_cases[2]
    a = solution_to_dict(inst, graphs, dive(inst, graphs, cfg))
    b = solution_to_dict(inst, graphs, dive(inst, graphs, cfg))
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert a["status"] == "feasible"


def test_dive_integral_root_returns_immediately():
    checked = 0
    for seed in range(6):
        inst = desk_instance(seed)
        graphs = build_graphs(inst)
        sol = dive(inst, graphs)
        if branch_and_price(inst, graphs).stats["nodes"] == 1:
            assert sol.stats["nodes"] == 1 and sol.stats["depth"] == 0
            checked += 1
    assert checked >= 3


def test_singleton_seeding():
    inst = desk_instance(2)
    graphs = build_graphs(inst)
    pool = ColumnPool()
    cols = singleton_columns(inst, graphs, pool)
    assert sorted(c.services for c in cols) == [(s,) for s in range(inst.n_services)]
    for c in cols:
        best = min(r.cost for r in exact_routes(inst, graphs) if r.services == c.services)
        assert c.cost == pytest.approx(best)


def exact_routes(inst, graphs):
    from evsp.oracle import enumerate_routes
    return [r for g in graphs for r in enumerate_routes(inst, g, max_services=1)]


def test_diving_config_validation():
    with pytest.raises(ValueError):
        DivingConfig(dmr=0)
    with pytest.raises(ValueError):
        DivingConfig(sddl=-1)
