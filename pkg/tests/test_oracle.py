from __future__ import annotations

import copy
from functools import lru_cache

import numpy as np
import pytest

from conftest import desk_instance, random_sequence, sequence_instance
from evsp.charge_arcs import arc_charge, build_graphs
from evsp.model import NEG_INF, Depot, Instance, LinearCharge, Service, VehicleSpec
from evsp.oracle import (OracleSizeError, best_dwells, enumerate_routes, exact_small_solve,
                         generate_instance, simulate_schedule, validate)
from evsp.search import branch_and_price, solution_to_dict


def test_zero_dwell_is_pure_discharge():
    inst, nodes = sequence_instance([(5, 10), (5, 20), (5, 15)], window=50, e_v=3)
    tr = simulate_schedule(inst, nodes, [0.0, 0.0], 90.0)
    assert tr.levels_arrival == [80.0, 60.0] and tr.levels_departure == [80.0, 60.0]
    assert tr.level_out == 90 - 10 - 20 - 15 - 3
    assert tr.arrivals == [5.0, 10.0] and tr.feasible


def test_no_station_level():
    inst, nodes = sequence_instance([(7, 25)], window=10, e_v=4)
    assert simulate_schedule(inst, nodes, [], 60.0).level_out == 60 - 25 - 4
    assert simulate_schedule(inst, nodes, [], 20.0).level_out == NEG_INF
    inst, nodes = sequence_instance([(17, 25)], window=10)
    assert not simulate_schedule(inst, nodes, [], 60.0).feasible


@pytest.mark.parametrize("piecewise", [False, True])
def test_max_dwell_last_matches_fc(rng, piecewise):
    checked = 0
    for _ in range(300):
        inst, nodes = random_sequence(rng, int(rng.integers(1, 4)), piecewise)
        charge = arc_charge(inst, nodes)
        for level in rng.uniform(0, inst.capacity, 5):
            dw = best_dwells(inst, nodes, level)
            got = charge.fc(level)
            if dw is None:
                assert got == NEG_INF
                continue
            want = simulate_schedule(inst, nodes, dw, level).level_out
            assert got == pytest.approx(want, abs=1e-7) or (got == want == NEG_INF)
            checked += 1
    assert checked > 100


def _path_count(inst, graph):
    """Feasible o-d paths counted by a DP over (vertex, level) with the graph's fc maps."""
    @lru_cache(maxsize=None)
    def count(v, level):
        if v == graph.sink:
            return 1
        total = 0
        for i in graph.out_arcs[v]:
            a = graph.arcs[i]
            out = a.fc(level)
            if out != NEG_INF:
                if a.head == graph.sink and v == graph.origin:
                    continue
                total += count(a.head, round(out, 9))
        return total
    return count(graph.origin, inst.capacity)


def test_route_count_matches_dp():
    for seed in range(5):
        inst = desk_instance(seed, max_services=7)
        for g in build_graphs(inst):
            assert len(enumerate_routes(inst, g)) == _path_count(inst, g)


def test_single_service_routes():
    inst = generate_instance(1, 1, 3, seed=5)
    g = build_graphs(inst)[0]
    routes = enumerate_routes(inst, g)
    n_in = len(g.in_arcs[0])
    n_out = len(g.out_arcs[0])
    assert 0 < len(routes) <= n_in * n_out
    assert {len(r.services) for r in routes} == {1}
    best = exact_small_solve(inst, [g])
    assert best.cost == min(r.cost for r in routes)


def test_no_services():
    inst = generate_instance(0, 1, 1, seed=0)
    g = build_graphs(inst)[0]
    assert enumerate_routes(inst, g) == []
    assert exact_small_solve(inst, [g]).cost == 0.0


def test_incompatible_services_need_one_vehicle_each():
    n = 4
    size = n + 1
    T = np.full((size, size), 5.0)
    np.fill_diagonal(T, 0.0)
    # all services overlap in time
    services = [Service(i, 100.0, 150.0 + i, 5.0) for i in range(n)]
    inst = Instance(services=services, depots=[Depot(0)], stations=[], travel_time=T,
                    travel_cost=T.copy(), travel_energy=T.copy(), horizon=400.0,
                    vehicle=VehicleSpec(100.0, 1000.0), charge=LinearCharge(1.0, 100.0))
    ex = exact_small_solve(inst, build_graphs(inst))
    assert len(ex.routes) == n
    assert ex.cost == pytest.approx(n * (1000 + 5 + 5))


def test_size_guard():
    inst = generate_instance(15, 1, 1, seed=0)
    with pytest.raises(OracleSizeError):
        exact_small_solve(inst, [])


def test_generator_is_seeded_and_feasible():
    a = generate_instance(12, 2, 3, seed=9)
    b = generate_instance(12, 2, 3, seed=9)
    assert np.array_equal(a.travel_time, b.travel_time)
    assert [s.t_begin for s in a.services] == [s.t_begin for s in b.services]
    assert generate_instance(12, 2, 3, seed=10).services != a.services
    sol = exact_small_solve(a, build_graphs(a))
    assert sol is not None
    c = generate_instance(4, 1, 2, seed=1, piecewise=True)
    assert c.charge.max_level == c.capacity


@pytest.fixture(scope="module")
def solved():
    inst = desk_instance(8)
    graphs = build_graphs(inst)
    sol = branch_and_price(inst, graphs)
    return inst, solution_to_dict(inst, graphs, sol)


def test_validate_accepts_solver_output(solved):
    inst, data = solved
    rep = validate(inst, data)
    assert rep.feasible and rep.violation is None
    assert rep.cost == pytest.approx(data["cost"])
    assert len(rep.traces) == len(data["routes"])


def _charging_route(data):
    for ri, r in enumerate(data["routes"]):
        for ai, a in enumerate(r["arcs"]):
            if a["stops"]:
                return ri, ai
    return None


@pytest.mark.parametrize("tamper, kind", [
    (lambda d: d.update(cost=d["cost"] - 1.0), "total cost"),
    (lambda d: d["routes"][0].update(cost=d["routes"][0]["cost"] + 0.5), "route cost"),
    (lambda d: d["routes"].pop(), "coverage"),
    (lambda d: d["routes"].append(copy.deepcopy(d["routes"][0])), "coverage"),
    (lambda d: d["routes"][0]["arcs"][0].update(to=-99), "broken arc chain"),
    (lambda d: d["routes"][0].update(depot=77), "unknown depot"),
])
def test_validate_rejects_tampering(solved, tamper, kind):
    inst, data = solved
    bad = copy.deepcopy(data)
    tamper(bad)
    rep = validate(inst, bad)
    assert not rep.feasible and rep.violation["kind"] == kind


def test_validate_rejects_wrong_stop(solved):
    inst, data = solved
    where = _charging_route(data)
    assert where is not None
    ri, ai = where
    bad = copy.deepcopy(data)
    bad["routes"][ri]["arcs"][ai]["stops"][0]["level_departure"] += 1.0
    rep = validate(inst, bad)
    assert rep.violation["kind"] == "reported battery level"
