"""Instance data model and battery charging physics.

Matrices are indexed over all elements in the order services, depots,
stations. Depots use the convention ``t_begin = horizon`` and ``t_end = 0``
so that the same time-compatibility test works for routes leaving and
returning to a depot.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Absolute tolerance used for every time and energy feasibility comparison.
EPS = 1e-6

NEG_INF = -math.inf
POS_INF = math.inf


def pos(level: float) -> float:
    """Return ``level`` if non-negative (within EPS), else -inf."""
    if level >= -EPS:
        return level if level > 0.0 else 0.0
    return NEG_INF


class ChargeModelError(ValueError):
    pass


class LinearCharge:
    """Charging at a constant rate, clamped at the capacity."""

    kind = "linear"

    def __init__(self, rate: float, capacity: float):
        if not rate > 0:
            raise ChargeModelError(f"charge rate must be > 0, got {rate}")
        if not capacity > 0:
            raise ChargeModelError(f"capacity must be > 0, got {capacity}")
        self.rate = float(rate)
        self.capacity = float(capacity)
        self.full_time = self.capacity / self.rate

    def theta(self, level: float) -> float:
        """Charging time needed to reach ``level`` from an empty battery."""
        return level / self.rate

    def level_at(self, theta: float) -> float:
        """Level reached after charging ``theta`` minutes from empty."""
        if theta <= 0:
            return 0.0
        return min(self.capacity, self.rate * theta)

    def phi(self, level: float, duration: float) -> float:
        return min(self.capacity, level + self.rate * duration)

    def breakpoints(self) -> list[tuple[float, float]]:
        return [(0.0, 0.0), (self.full_time, self.capacity)]

    def to_dict(self) -> dict:
        return {"type": "linear", "rate": self.rate}

    def __eq__(self, other):
        return (isinstance(other, LinearCharge) and self.rate == other.rate
                and self.capacity == other.capacity)

    def __repr__(self):
        return f"LinearCharge(rate={self.rate}, capacity={self.capacity})"


class PiecewiseCharge:
    """Concave piecewise-linear charge-from-empty profile.

    ``breakpoints`` are ``(time, level)`` pairs starting at ``(0, 0)`` with
    increasing times and non-increasing positive slopes. The profile is flat
    after the last breakpoint, so levels above the last breakpoint level can
    never be reached by charging. Levels are clamped at the capacity.

    phi(l, tau) is obtained by locating ``l`` on the profile (its virtual
    time ``theta(l)``) and advancing ``tau`` along it, which makes the
    semigroup law hold by construction.
    """

    kind = "piecewise"

    def __init__(self, breakpoints: Sequence[Sequence[float]], capacity: float):
        if not capacity > 0:
            raise ChargeModelError(f"capacity must be > 0, got {capacity}")
        pts = [(float(t), float(lv)) for t, lv in breakpoints]
        if len(pts) < 2 or pts[0] != (0.0, 0.0):
            raise ChargeModelError("profile must start at (0, 0) and have >= 2 breakpoints")
        self.capacity = float(capacity)
        # clamp to capacity: cut the profile where it crosses M
        clamped = [pts[0]]
        for (t0, l0), (t1, l1) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ChargeModelError("breakpoint times must be strictly increasing")
            if l1 <= l0:
                raise ChargeModelError("profile levels must be strictly increasing")
            if l1 >= self.capacity:
                t_cap = t0 + (self.capacity - l0) * (t1 - t0) / (l1 - l0)
                clamped.append((t_cap, self.capacity))
                break
            clamped.append((t1, l1))
        slopes = [(l1 - l0) / (t1 - t0) for (t0, l0), (t1, l1) in zip(clamped, clamped[1:])]
        for s0, s1 in zip(slopes, slopes[1:]):
            if s1 > s0 * (1 + 1e-12):
                raise ChargeModelError("profile must be concave (non-increasing slopes)")
        self.times = [p[0] for p in clamped]
        self.levels = [p[1] for p in clamped]
        self.slopes = slopes
        self.max_level = self.levels[-1]
        self.full_time = self.times[-1]

    def theta(self, level: float) -> float:
        if level <= 0:
            return 0.0
        if level > self.max_level:
            return POS_INF
        i = bisect.bisect_left(self.levels, level)
        if self.levels[i] == level:
            return self.times[i]
        return self.times[i - 1] + (level - self.levels[i - 1]) / self.slopes[i - 1]

    def level_at(self, theta: float) -> float:
        if theta <= 0:
            return 0.0
        if theta >= self.full_time:
            return self.max_level
        i = bisect.bisect_right(self.times, theta)
        return self.levels[i - 1] + (theta - self.times[i - 1]) * self.slopes[i - 1]

    def phi(self, level: float, duration: float) -> float:
        if level >= self.max_level or duration <= 0:
            return level
        return self.level_at(self.theta(level) + duration)

    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.levels))

    def to_dict(self) -> dict:
        return {"type": "piecewise", "breakpoints": [list(p) for p in self.breakpoints()]}

    def __eq__(self, other):
        return (isinstance(other, PiecewiseCharge) and self.times == other.times
                and self.levels == other.levels and self.capacity == other.capacity)

    def __repr__(self):
        return f"PiecewiseCharge({self.breakpoints()}, capacity={self.capacity})"


ChargeModel = Union[LinearCharge, PiecewiseCharge]


def _check_level(model: ChargeModel, level: float, name: str = "level"):
    if not (-EPS <= level <= model.capacity + EPS):
        raise ValueError(f"{name} {level} outside [0, {model.capacity}]")


def phi(model: ChargeModel, level: float, duration: float) -> float:
    """Battery level after charging ``duration`` minutes starting at ``level``."""
    _check_level(model, level)
    if duration < 0:
        raise ValueError(f"negative charging duration {duration}")
    return min(model.capacity, max(0.0, model.phi(level, duration)))


def tau_ch(model: ChargeModel, from_level: float, to_level: float) -> float:
    """Signed charging time between two levels (+inf if unreachable)."""
    _check_level(model, from_level, "from_level")
    _check_level(model, to_level, "to_level")
    if from_level == to_level:
        return 0.0
    if from_level > to_level:
        return -tau_ch(model, to_level, from_level)
    t_to = model.theta(to_level)
    if t_to == POS_INF:
        return POS_INF
    return t_to - model.theta(from_level)


@dataclass(frozen=True)
class Service:
    id: int
    t_begin: float
    t_end: float
    energy: float = 0.0
    cost: float = 0.0


@dataclass(frozen=True)
class Depot:
    id: Union[int, str]


@dataclass(frozen=True)
class Station:
    id: Union[int, str]


@dataclass(frozen=True)
class VehicleSpec:
    capacity: float
    fixed_cost: float = 10000.0
    reserve: float = 0.0

    @property
    def usable(self) -> float:
        # a reserve level M0 is modelled by planning with M - M0
        return self.capacity - self.reserve


class InstanceError(ValueError):
    pass


@dataclass(eq=False)
class Instance:
    services: tuple
    depots: tuple
    stations: tuple
    travel_time: np.ndarray
    travel_cost: np.ndarray
    travel_energy: np.ndarray
    horizon: float
    vehicle: VehicleSpec
    charge: ChargeModel
    name: str = "instance"
    _lists: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.services = tuple(self.services)
        self.depots = tuple(self.depots)
        self.stations = tuple(self.stations)
        n = self.n_elements
        mats = {}
        for attr in ("travel_time", "travel_cost", "travel_energy"):
            m = np.array(getattr(self, attr), dtype=float)
            if m.shape != (n, n):
                raise InstanceError(f"{attr} has shape {m.shape}, expected ({n}, {n})")
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise InstanceError(f"{attr} must be finite and non-negative")
            m.setflags(write=False)
            mats[attr] = m
            object.__setattr__(self, attr, m)
        if not self.vehicle.usable > 0:
            raise InstanceError("vehicle capacity minus reserve must be > 0")
        if self.charge.capacity != self.vehicle.usable:
            raise InstanceError("charge model capacity differs from usable vehicle capacity")
        M = self.vehicle.usable
        seen = set()
        for s in self.services:
            if s.id in seen:
                raise InstanceError(f"duplicate service id {s.id}")
            seen.add(s.id)
            if not (0 <= s.t_begin <= s.t_end <= self.horizon):
                raise InstanceError(
                    f"service {s.id}: need 0 <= t_begin <= t_end <= horizon")
            if not (0 <= s.energy <= M):
                raise InstanceError(f"service {s.id}: energy {s.energy} outside [0, {M}]")
            if s.cost < 0:
                raise InstanceError(f"service {s.id}: negative cost")
        self._lists = (mats["travel_time"].tolist(), mats["travel_cost"].tolist(),
                       mats["travel_energy"].tolist())

    # index helpers -------------------------------------------------------
    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def n_elements(self) -> int:
        return len(self.services) + len(self.depots) + len(self.stations)

    def depot_node(self, j: int) -> int:
        return len(self.services) + j

    def station_node(self, s: int) -> int:
        return len(self.services) + len(self.depots) + s

    @property
    def station_nodes(self) -> range:
        start = len(self.services) + len(self.depots)
        return range(start, start + len(self.stations))

    def is_depot_node(self, x: int) -> bool:
        n = len(self.services)
        return n <= x < n + len(self.depots)

    def is_service_node(self, x: int) -> bool:
        return 0 <= x < len(self.services)

    def t_begin(self, x: int) -> float:
        if x < len(self.services):
            return self.services[x].t_begin
        return self.horizon

    def t_end(self, x: int) -> float:
        if x < len(self.services):
            return self.services[x].t_end
        return 0.0

    def energy(self, x: int) -> float:
        return self.services[x].energy if x < len(self.services) else 0.0

    def service_cost(self, x: int) -> float:
        return self.services[x].cost if x < len(self.services) else 0.0

    def label(self, x: int):
        """Public id of an element index, as used in JSON files."""
        n, nd = len(self.services), len(self.depots)
        if x < n:
            return self.services[x].id
        if x < n + nd:
            return self.depots[x - n].id
        return self.stations[x - n - nd].id

    @property
    def capacity(self) -> float:
        return self.vehicle.usable

    @property
    def delta(self) -> list:
        return self._lists[0]

    @property
    def cost(self) -> list:
        return self._lists[1]

    @property
    def e(self) -> list:
        return self._lists[2]

    def restricted(self, keep: Sequence[int]) -> "Instance":
        """Copy keeping only the given service indices (depots/stations unchanged)."""
        keep = list(keep)
        n = len(self.services)
        idx = keep + list(range(n, self.n_elements))
        sub = np.ix_(idx, idx)
        return Instance(
            services=[self.services[i] for i in keep], depots=self.depots,
            stations=self.stations, travel_time=self.travel_time[sub],
            travel_cost=self.travel_cost[sub], travel_energy=self.travel_energy[sub],
            horizon=self.horizon, vehicle=self.vehicle, charge=self.charge, name=self.name)
