"""Dial-a-ride instance construction.

Nodes are indexed 0..2n+1: node 0 is the origin depot, nodes 1..n are
pickups in request order, node n+i is the dropoff of request i, and node
2n+1 is the destination depot.  Arcs connect every ordered interior pair,
the origin depot to every pickup, every dropoff to the destination depot,
and the origin depot directly to the destination depot (used by idle
vehicles at zero cost).

All times are minutes of day.  Travel times are stored as integer tenths
of a minute (provider output rounded half-up) so instances serialize
byte-for-byte reproducibly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

EARTH_RADIUS_KM = 6371.0
DAY_MINUTES = 1440

LatLon = tuple[float, float]
TravelTimeFn = Callable[[LatLon, LatLon], float]


class InstanceError(ValueError):
    """Base class for instance construction failures."""


class EmptyPeriod(InstanceError):
    """No requests supplied for the period."""


class InfeasibleWindow(InstanceError):
    """A constructed time window has e > l, signalling bad schedule data."""


class MissingSchedule(InstanceError):
    """A non-depot node lacks a scheduled time."""


class Direction(str, Enum):
    INBOUND = "inbound"    # home -> health care facility
    OUTBOUND = "outbound"  # facility -> home


class ModelKind(str, Enum):
    OPERATOR = "operator"
    USER = "user"


class NodeKind(str, Enum):
    ORIGIN_DEPOT = "origin_depot"
    PICKUP = "pickup"
    DROPOFF = "dropoff"
    DESTINATION_DEPOT = "destination_depot"


@dataclass(frozen=True)
class TripRequest:
    """One booked order: a single customer moved from pickup to dropoff."""

    id: str
    direction: Direction
    pickup_location: LatLon
    dropoff_location: LatLon
    scheduled_pickup: int   # minutes of day
    scheduled_dropoff: int  # minutes of day
    period: Optional[tuple[int, int]] = None  # half-open [start, end)
    actual_pickup: Optional[int] = None
    actual_dropoff: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.scheduled_pickup < DAY_MINUTES:
            raise InstanceError(f"request {self.id}: scheduled_pickup out of [0, 1440)")
        if not 0 <= self.scheduled_dropoff < DAY_MINUTES:
            raise InstanceError(f"request {self.id}: scheduled_dropoff out of [0, 1440)")
        if self.scheduled_pickup >= self.scheduled_dropoff:
            raise InstanceError(f"request {self.id}: pickup must precede dropoff")
        if tuple(self.pickup_location) == tuple(self.dropoff_location):
            raise InstanceError(f"request {self.id}: identical pickup and dropoff")

    def with_period(self, start: int, end: int) -> "TripRequest":
        return replace(self, period=(start, end))


@dataclass(frozen=True)
class Fleet:
    """Vehicle group serving one period; capacities[k-1] is C_k."""

    count: int
    capacities: tuple[int, ...]
    depot_location: LatLon

    def __post_init__(self):
        if self.count < 1:
            raise InstanceError("fleet count must be positive")
        if len(self.capacities) != self.count:
            raise InstanceError("capacities must have exactly one entry per vehicle")
        if any(c < 1 for c in self.capacities):
            raise InstanceError("every capacity must be >= 1")

    @classmethod
    def uniform(cls, count: int, capacity: int, depot_location: LatLon) -> "Fleet":
        return cls(count, (capacity,) * count, depot_location)


@dataclass
class NodeAttributes:
    index: int
    kind: NodeKind
    q: int                      # load change: +1 pickup, -1 dropoff, 0 depot
    d: float                    # service time, minutes
    e: float                    # earliest arrival
    l: float                    # latest arrival
    s: Optional[float]          # scheduled time (None at depots)
    in_H: bool                  # inbound dropoff or outbound pickup
    window_length: float = 0.0  # L_i used to derive [e, l]


@dataclass
class InstanceConfig:
    """Knobs for instance construction; defaults follow the case-study setup."""

    travel_time: TravelTimeFn
    model_kind: ModelKind = ModelKind.OPERATOR
    window_length: float = 30.0  # L, minutes
    boarding: float = 7.0        # pickup service time
    alighting: float = 5.0       # dropoff service time
    lateness_threshold: float = 15.0  # T, minutes
    penalty_weight: float = 10000.0   # beta


@dataclass
class Instance:
    """Immutable-after-construction DARP instance (graph, windows, fleet)."""

    n: int
    nodes: list[NodeAttributes]
    arcs: dict[tuple[int, int], int]  # (i, j) -> travel time in tenths of a minute
    fleet: Fleet
    model_kind: ModelKind
    lateness_threshold: float
    penalty_weight: float
    requests: list[TripRequest] = field(default_factory=list)

    @property
    def pickups(self) -> range:
        return range(1, self.n + 1)

    @property
    def dropoffs(self) -> range:
        return range(self.n + 1, 2 * self.n + 1)

    @property
    def interior(self) -> range:
        return range(1, 2 * self.n + 1)

    @property
    def depot_end(self) -> int:
        return 2 * self.n + 1

    @property
    def h_nodes(self) -> list[int]:
        return [v.index for v in self.nodes if v.in_H]

    def travel(self, i: int, j: int) -> float:
        """Travel time of arc (i, j) in minutes."""
        return self.arcs[(i, j)] / 10.0

    def dropoff_of(self, pickup: int) -> int:
        return pickup + self.n

    def validate(self) -> None:
        if sum(v.q for v in self.nodes) != 0:
            raise InstanceError("node loads must sum to zero")
        for v in self.nodes:
            if v.e > v.l:
                raise InfeasibleWindow(f"node {v.index}: window [{v.e}, {v.l}] is empty")
            if v.e < 0 or v.l > DAY_MINUTES:
                raise InstanceError(f"node {v.index}: window outside [0, 1440]")
        for (i, j), t in self.arcs.items():
            if t < 0:
                raise InstanceError(f"arc ({i}, {j}): negative travel time")
        if self.arcs.get((0, self.depot_end)) != 0:
            raise InstanceError("depot-to-depot arc must exist with zero travel time")

    # -- canonical serialization ------------------------------------------

    def to_json(self) -> str:
        """Deterministic canonical JSON; field order is part of the format."""
        params_l = self.nodes[1].window_length if self.n > 0 else 0
        doc = {
            "n": self.n,
            "model_kind": self.model_kind.value,
            "nodes": [
                {
                    "index": v.index,
                    "kind": v.kind.value,
                    "q": v.q,
                    "d": _num(v.d),
                    "e": _num(v.e),
                    "l": _num(v.l),
                    "s": None if v.s is None else _num(v.s),
                    "in_H": v.in_H,
                }
                for v in self.nodes
            ],
            "arcs": [[i, j, self.arcs[(i, j)]] for i, j in sorted(self.arcs)],
            "fleet": {
                "count": self.fleet.count,
                "capacities": list(self.fleet.capacities),
                "depot": [self.fleet.depot_location[0], self.fleet.depot_location[1]],
            },
            "params": {
                "L": _num(params_l),
                "T": _num(self.lateness_threshold),
                "beta": _num(self.penalty_weight),
            },
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        doc = json.loads(text)
        nodes = [
            NodeAttributes(
                index=v["index"],
                kind=NodeKind(v["kind"]),
                q=v["q"],
                d=float(v["d"]),
                e=float(v["e"]),
                l=float(v["l"]),
                s=None if v["s"] is None else float(v["s"]),
                in_H=v["in_H"],
                window_length=float(doc["params"]["L"]),
            )
            for v in doc["nodes"]
        ]
        arcs = {(i, j): t for i, j, t in doc["arcs"]}
        fleet = Fleet(
            count=doc["fleet"]["count"],
            capacities=tuple(doc["fleet"]["capacities"]),
            depot_location=(doc["fleet"]["depot"][0], doc["fleet"]["depot"][1]),
        )
        inst = cls(
            n=doc["n"],
            nodes=nodes,
            arcs=arcs,
            fleet=fleet,
            model_kind=ModelKind(doc["model_kind"]),
            lateness_threshold=float(doc["params"]["T"]),
            penalty_weight=float(doc["params"]["beta"]),
        )
        inst.validate()
        return inst


def _num(x: float):
    """Render integral floats as ints for stable, minimal JSON."""
    return int(x) if float(x) == int(x) else float(x)


def haversine_km(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in km on a 6371 km sphere."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_minutes(a: LatLon, b: LatLon, speed_kmh: float) -> float:
    """Great-circle travel time in minutes at a constant speed."""
    if speed_kmh <= 0:
        raise ValueError("speed must be positive")
    return haversine_km(a, b) / speed_kmh * 60.0


def round_tenths(minutes: float) -> int:
    """Round half-up to one decimal place, returned as integer tenths."""
    return int(math.floor(minutes * 10.0 + 0.5))


def build_instance(
    requests: Sequence[TripRequest],
    fleet: Fleet,
    config: InstanceConfig,
) -> Instance:
    """Construct a validated instance from one period's requests.

    Raises EmptyPeriod when no requests are given and InfeasibleWindow when
    the window rules produce an empty window (bad schedule data).
    """
    if not requests:
        raise EmptyPeriod("cannot build an instance from zero requests")
    periods = {r.period for r in requests if r.period is not None}
    if len(periods) > 1:
        raise InstanceError(f"requests span multiple periods: {sorted(periods)}")

    n = len(requests)
    end = 2 * n + 1
    nodes: list[NodeAttributes] = []
    nodes.append(NodeAttributes(0, NodeKind.ORIGIN_DEPOT, 0, 0.0, 0.0, DAY_MINUTES, None, False))
    for i, r in enumerate(requests, start=1):
        in_h = r.direction is Direction.OUTBOUND
        nodes.append(
            NodeAttributes(
                i, NodeKind.PICKUP, 1, config.boarding, 0.0, DAY_MINUTES,
                float(r.scheduled_pickup), in_h, config.window_length,
            )
        )
    for i, r in enumerate(requests, start=1):
        in_h = r.direction is Direction.INBOUND
        nodes.append(
            NodeAttributes(
                n + i, NodeKind.DROPOFF, -1, config.alighting, 0.0, DAY_MINUTES,
                float(r.scheduled_dropoff), in_h, config.window_length,
            )
        )
    nodes.append(NodeAttributes(end, NodeKind.DESTINATION_DEPOT, 0, 0.0, 0.0, DAY_MINUTES, None, False))

    location: dict[int, LatLon] = {0: fleet.depot_location, end: fleet.depot_location}
    for i, r in enumerate(requests, start=1):
        location[i] = r.pickup_location
        location[n + i] = r.dropoff_location

    arcs: dict[tuple[int, int], int] = {}
    interior = range(1, 2 * n + 1)
    for i in interior:
        for j in interior:
            if i != j:
                arcs[(i, j)] = _arc_tenths(config.travel_time, location[i], location[j])
    for j in range(1, n + 1):
        arcs[(0, j)] = _arc_tenths(config.travel_time, location[0], location[j])
    for i in range(n + 1, 2 * n + 1):
        arcs[(i, end)] = _arc_tenths(config.travel_time, location[i], location[end])
    arcs[(0, end)] = 0  # idle vehicles go straight to the final depot

    inst = Instance(
        n=n,
        nodes=nodes,
        arcs=arcs,
        fleet=fleet,
        model_kind=config.model_kind,
        lateness_threshold=config.lateness_threshold,
        penalty_weight=config.penalty_weight,
        requests=list(requests),
    )
    set_time_windows(inst)
    inst.validate()
    return inst


def _arc_tenths(travel_time: TravelTimeFn, a: LatLon, b: LatLon) -> int:
    minutes = travel_time(a, b)
    if minutes < 0:
        raise InstanceError(f"travel time provider returned {minutes} for {a} -> {b}")
    return round_tenths(minutes)


def set_time_windows(instance: Instance) -> Instance:
    """Apply the model-specific window rules in place (and return the instance).

    Operator model: H nodes get a hard on-time bound [s - L, s]; all other
    interior nodes get [s - L/2, s + L/2].  User model: H nodes are freed to
    [0, 1440]; other interior nodes keep the operator rule.  Depots always
    span the whole day.  Windows are clipped to [0, 1440].
    """
    for v in instance.nodes:
        if v.kind in (NodeKind.ORIGIN_DEPOT, NodeKind.DESTINATION_DEPOT):
            v.e, v.l = 0.0, float(DAY_MINUTES)
            continue
        if v.s is None:
            raise MissingSchedule(f"node {v.index} has no scheduled time")
        half = v.window_length / 2.0
        if v.in_H:
            if instance.model_kind is ModelKind.USER:
                v.e, v.l = 0.0, float(DAY_MINUTES)
            else:
                v.e, v.l = max(0.0, v.s - v.window_length), min(float(DAY_MINUTES), v.s)
        else:
            v.e, v.l = max(0.0, v.s - half), min(float(DAY_MINUTES), v.s + half)
        if v.e > v.l:
            raise InfeasibleWindow(f"node {v.index}: window [{v.e}, {v.l}] is empty")
    return instance


def matrix_travel_time(
    locations: Sequence[LatLon],
    minutes: Sequence[Sequence[float]],
) -> TravelTimeFn:
    """Wrap a precomputed location-indexed matrix as a travel-time function.

    Coordinates are matched after rounding to 6 decimal places (~0.1 m).
    """
    index: dict[tuple[float, float], int] = {}
    for pos, loc in enumerate(locations):
        index[(round(loc[0], 6), round(loc[1], 6))] = pos

    def lookup(a: LatLon, b: LatLon) -> float:
        try:
            ia = index[(round(a[0], 6), round(a[1], 6))]
            ib = index[(round(b[0], 6), round(b[1], 6))]
        except KeyError as exc:
            raise InstanceError(f"location {exc} missing from travel matrix") from exc
        return float(minutes[ia][ib])

    return lookup
