from __future__ import annotations

import numpy as np
import pytest

from evsp.model import (Depot, Instance, LinearCharge, PiecewiseCharge, Service, Station,
                        VehicleSpec)

CAP = 100.0


def profile(capacity: float = CAP) -> PiecewiseCharge:
    return PiecewiseCharge([(0, 0), (30, 0.6 * capacity), (60, 0.85 * capacity),
                            (110, capacity)], capacity)


def sequence_instance(legs, window, e_v=0.0, rate=1.0, capacity=CAP, piecewise=False,
                      direct=(1e3, 1e3)):
    """Two services u -> v with ``len(legs) - 1`` stations in between.

    ``legs`` is a list of (travel time, energy); ``window`` the time between
    the end of u and the start of v. Returns (instance, node tuple).
    """
    k = len(legs) - 1
    n = 2 + 1 + k
    T = np.zeros((n, n))
    E = np.zeros((n, n))
    nodes = (0,) + tuple(3 + i for i in range(k)) + (1,)
    for (a, b), (dt, de) in zip(zip(nodes, nodes[1:]), legs):
        T[a, b], E[a, b] = dt, de
    if k:
        T[0, 1], E[0, 1] = direct
    services = [Service(0, 0.0, 0.0), Service(1, float(window), float(window) + 1, e_v)]
    charge = profile(capacity) if piecewise else LinearCharge(rate, capacity)
    inst = Instance(services=services, depots=[Depot(0)], stations=[Station(i) for i in range(k)],
                    travel_time=T, travel_cost=T.copy(), travel_energy=E,
                    horizon=float(window) + 10, vehicle=VehicleSpec(capacity), charge=charge)
    return inst, nodes


def random_sequence(rng: np.random.Generator, k: int, piecewise: bool = False,
                    capacity: float = CAP):
    """Random station sequence with ``k`` stations whose time window holds."""
    legs = [(float(rng.uniform(1, 30)), float(rng.uniform(0, 0.7 * capacity)))
            for _ in range(k + 1)]
    travel = sum(t for t, _ in legs)
    window = travel + float(rng.choice([0.0, rng.uniform(0, 40), rng.uniform(0, 200)]))
    e_v = float(rng.uniform(0, 0.3 * capacity)) if rng.random() < 0.5 else 0.0
    if legs[-1][1] + e_v > capacity:
        e_v = 0.0
    rate = float(rng.uniform(0.3, 3.0))
    return sequence_instance(legs, window, e_v, rate, capacity, piecewise)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# small generated instances whose battery is tight enough to make the LP fractional
DESK = dict(horizon=300.0, fixed_cost=10.0, capacity=40.0, service_length=(5.0, 30.0),
            speed=1.0, side=12.0, charge_rate=0.5)


def desk_instance(seed: int, max_services: int = 10):
    from evsp.oracle import generate_instance
    n = int(np.random.default_rng(seed).integers(4, max_services + 1))
    return generate_instance(n, 2, 3, seed=seed, piecewise=seed % 4 == 0, **DESK)


def random_duals(rng: np.random.Generator, inst) -> np.ndarray:
    """Service duals large enough to make some routes attractive."""
    scale = inst.vehicle.fixed_cost + 2.0 * float(np.max(inst.travel_cost))
    return rng.uniform(0.0, scale, inst.n_services)


def arc_lookup(graph) -> dict:
    """(tail vertex, head vertex, stations) -> arc id."""
    return {(a.tail, a.head, tuple(a.stations)): a.id for a in graph.arcs}


def oracle_route_arcs(graph, route, look: dict | None = None) -> tuple:
    """Arc ids of an oracle route (element-index tuples) in ``graph``."""
    look = look if look is not None else arc_lookup(graph)
    n = graph.n
    out = []
    for k, nodes in enumerate(route.arcs):
        tail = n if k == 0 else nodes[0]
        head = n + 1 if k == len(route.arcs) - 1 else nodes[-1]
        out.append(look[(tail, head, tuple(nodes[1:-1]))])
    return tuple(out)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
