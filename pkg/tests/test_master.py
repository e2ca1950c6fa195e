from __future__ import annotations

import csv

import numpy as np
import pytest

from conftest import desk_instance
from evsp.charge_arcs import build_graphs
from evsp.master import (Column, ColumnPool, DepotRow, NodeSpec, Stabilizer, column_generation,
                         smoothed_duals, solve_rmp, write_iteration_log)
from evsp.model import NEG_INF
from evsp.oracle import best_level, enumerate_routes, exact_small_solve, generate_instance
from evsp.oracle import route_cost


@pytest.fixture(scope="module")
def desk():
    out = []
    for seed in range(8):
        inst = desk_instance(seed, max_services=8)
        out.append((inst, build_graphs(inst)))
    return out


def _col(i, services, cost, depot=0):
    return Column(i, depot, (i,), tuple(services), float(cost), ())


def test_single_column_covers_all():
    inst = generate_instance(3, 1, 1, seed=0)
    sol = solve_rmp(inst, [_col(0, [0, 1, 2], 42.0)], NodeSpec((0, 1, 2)))
    assert sol.objective == pytest.approx(42.0)
    assert sol.x == {0: pytest.approx(1.0)} and sol.artificial == 0.0


def test_cheaper_duplicate_wins():
    inst = generate_instance(2, 1, 1, seed=0)
    cols = [_col(0, [0, 1], 9.0), _col(1, [0, 1], 7.0)]
    sol = solve_rmp(inst, cols, NodeSpec((0, 1)))
    assert sol.objective == pytest.approx(7.0)
    assert set(sol.x) == {1}


def test_depot_rows_and_duals():
    inst = generate_instance(2, 2, 1, seed=0)
    cols = [_col(0, [0], 5.0, depot=0), _col(1, [1], 5.0, depot=0),
            _col(2, [0], 8.0, depot=1), _col(3, [1], 8.0, depot=1)]
    spec = NodeSpec((0, 1), rows=(DepotRow(0, "L", 1.0),))
    sol = solve_rmp(inst, cols, spec)
    assert sol.objective == pytest.approx(13.0)
    mu = sol.row_duals[0]
    assert mu <= 1e-9
    # reduced costs c - A^T y are non-negative and zero on basic columns
    for c in cols:
        rc = c.cost - sum(sol.duals[s] for s in c.services) - (mu if c.depot == 0 else 0.0)
        assert rc >= -1e-7
        if sol.x.get(c.id, 0.0) > 1e-9:
            assert abs(rc) <= 1e-7


def test_smoothing_examples():
    new = np.array([4.0, -2.0])
    assert np.array_equal(smoothed_duals(0.0, np.array([1.0, 1.0]), new), new)
    assert np.allclose(smoothed_duals(0.9, np.zeros(2), new), 0.1 * new)
    assert np.array_equal(smoothed_duals(0.9, None, new), new)
    st = Stabilizer()
    seq = []
    while st.alpha > 0:
        st.decrease()
        seq.append(st.alpha)
    assert seq == [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0]


def _converged(inst, graphs, **kw):
    pool = ColumnPool()
    res = column_generation(inst, graphs, pool, NodeSpec(tuple(range(inst.n_services))), **kw)
    return res, pool


def test_stabilized_equals_plain(desk):
    for inst, graphs in desk:
        a, _ = _converged(inst, graphs, stabilize=True)
        b, _ = _converged(inst, graphs, stabilize=False)
        assert a.lp_value == pytest.approx(b.lp_value, abs=1e-6)


@pytest.mark.parametrize("backend", ["scipy", "simplex"])
def test_backends_agree_on_root(desk, backend):
    for inst, graphs in desk[:3]:
        a, _ = _converged(inst, graphs)
        b, _ = _converged(inst, graphs, backend=backend)
        assert a.lp_value == pytest.approx(b.lp_value, abs=1e-6)


def test_lp_below_integer_optimum_and_pool_priced_out(desk):
    for inst, graphs in desk:
        res, pool = _converged(inst, graphs)
        exact = exact_small_solve(inst, graphs)
        assert res.status == "optimal"
        assert res.lp_value <= exact.cost + 1e-6
        for col in pool:
            rc = col.cost - sum(res.duals[s] for s in col.services)
            assert rc >= -1e-6


def test_lp_value_non_increasing(desk):
    for inst, graphs in desk:
        res, _ = _converged(inst, graphs)
        vals = [h["lp_value"] for h in res.log]
        assert all(b <= a + 1e-6 for a, b in zip(vals, vals[1:]))


def test_every_column_passes_validator(desk):
    for inst, graphs in desk[:4]:
        _, pool = _converged(inst, graphs)
        for col in pool:
            g = graphs[col.depot]
            path = [(g.element(g.arcs[i].tail),) + tuple(g.arcs[i].stations)
                    + (g.element(g.arcs[i].head),) for i in col.arcs]
            level = inst.capacity
            for nodes in path:
                level = best_level(inst, nodes, level)
                assert level != NEG_INF
            assert col.cost == pytest.approx(route_cost(inst, path), abs=1e-6)
            assert len(set(col.services)) == len(col.services)


def test_one_service_lp_is_cheapest_route():
    inst = generate_instance(1, 2, 2, seed=4)
    graphs = build_graphs(inst)
    res, _ = _converged(inst, graphs)
    best = min(r.cost for g in graphs for r in enumerate_routes(inst, g))
    assert res.lp_value == pytest.approx(best)


def test_infeasible_node_detected(desk):
    inst, graphs = desk[0]
    rows = tuple(DepotRow(g.depot, "L", 0.0) for g in graphs)
    res = column_generation(inst, graphs, ColumnPool(),
                            NodeSpec(tuple(range(inst.n_services)), rows=rows))
    assert res.status == "infeasible"


def test_threads_do_not_change_result(desk):
    inst, graphs = desk[2]
    a, pa = _converged(inst, graphs, threads=1)
    b, pb = _converged(inst, graphs, threads=2)
    assert a.lp_value == b.lp_value
    assert [c.key for c in pa] == [c.key for c in pb]


def test_iteration_log(tmp_path, desk):
    inst, graphs = desk[1]
    res, _ = _converged(inst, graphs)
    path = tmp_path / "log.csv"
    write_iteration_log(path, res.log)
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["iteration", "lp_value", "columns_added", "alpha", "pricing_time"]
    assert len(rows) == len(res.log)
    assert float(rows[-1]["alpha"]) == 0.0 and int(rows[-1]["columns_added"]) == 0
