"""Independent exact solver by exhaustive enumeration for small instances.

Enumerates every assignment of requests to vehicles and every
pairing-respecting, capacity-feasible interleaving per vehicle, then solves
the one-dimensional timing problem per route exactly:

* operator model: minimal route duration = earliest completion minus the
  latest feasible departure that still meets every window (forward earliest
  pass, then a backward latest pass pinned at the earliest completion);
* user model: for each subset of high-priority nodes allowed to run late,
  the achievable signed deviation sums form an interval bracketed by the
  earliest and latest schedule profiles, so the linearized objective
  max(penalty * late_count, |sum of deviations|) is minimized exactly over
  subsets and a convex blend of the two profiles.

This module deliberately never touches the ModelSpec or LP machinery; it is
the ground truth the solver is tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from paradarp.instance import Instance, ModelKind

ORACLE_MAX_REQUESTS = 4
ORACLE_MAX_VEHICLES = 3

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"


class OracleTooLarge(ValueError):
    """Instance exceeds the exhaustive-enumeration guard."""


@dataclass
class EnumeratedSolution:
    status: str
    objective: Optional[float]
    assignment: dict[int, int] = field(default_factory=dict)   # request -> vehicle
    sequences: list[tuple[int, ...]] = field(default_factory=list)  # per vehicle
    arrival: dict[int, float] = field(default_factory=dict)
    depot_depart: list[float] = field(default_factory=list)
    depot_return: list[float] = field(default_factory=list)
    lateness: dict[int, int] = field(default_factory=dict)

    def routes(self, instance: Instance) -> list[list[int]]:
        end = instance.depot_end
        return [[0, *seq, end] for seq in self.sequences]

    def to_solve_result(self, instance: Instance):
        """Adapter so oracle schedules run through the mip feasibility checker."""
        from paradarp.mip import SolveResult

        node = {v.index: v for v in instance.nodes}
        loads = {}
        for seq in self.sequences:
            running = 0
            for i in seq:
                running += node[i].q
                loads[i] = float(running)
        return SolveResult(
            status=self.status,
            objective=self.objective,
            best_bound=self.objective if self.objective is not None else float("inf"),
            gap=0.0,
            node_count=0,
            wall_time=0.0,
            routes=self.routes(instance),
            arrival=dict(self.arrival),
            depot_depart=list(self.depot_depart),
            depot_return=list(self.depot_return),
            loads=loads,
            load_return=[0.0] * instance.fleet.count,
            lateness=dict(self.lateness),
        )


def _vehicle_sequences(instance: Instance, requests: tuple[int, ...],
                       capacity: int) -> Iterator[tuple[int, ...]]:
    """All pickup-before-dropoff interleavings within the capacity."""
    n = instance.n

    def rec(seq, waiting, onboard, load):
        if not waiting and not onboard:
            yield tuple(seq)
            return
        if load < capacity:
            for r in waiting:
                rest = tuple(w for w in waiting if w != r)
                yield from rec(seq + [r], rest, onboard + (r,), load + 1)
        for r in onboard:
            rest = tuple(o for o in onboard if o != r)
            yield from rec(seq + [n + r], waiting, rest, load - 1)

    yield from rec([], tuple(sorted(requests)), (), 0)


def _earliest_profile(instance, seq, caps):
    """Forward earliest arrivals honoring windows, chain, and pair precedence.

    Returns (profile dict, earliest completion) or None when infeasible.
    caps gives the effective latest-arrival bound per node.
    """
    node = {v.index: v for v in instance.nodes}
    n = instance.n
    e = {}
    prev = None
    for v in seq:
        t_in = instance.travel(prev, v) if prev is not None else instance.travel(0, v)
        base = e[prev] + node[prev].d + t_in if prev is not None else t_in
        val = max(node[v].e, base)
        if v > n:  # dropoff: direct-arc precedence may exceed the chain bound
            pick = v - n
            if pick in e:
                val = max(val, e[pick] + node[pick].d + instance.travel(pick, v))
        if val > caps[v] + 1e-9:
            return None
        e[v] = val
        prev = v
    last = seq[-1]
    completion = e[last] + node[last].d + instance.travel(last, instance.depot_end)
    if completion > node[instance.depot_end].l + 1e-9:
        return None
    return e, completion


def _latest_profile(instance, seq, caps, end_cap):
    """Backward latest arrivals consistent with completing by end_cap."""
    node = {v.index: v for v in instance.nodes}
    n = instance.n
    lat = {}
    nxt = None
    for v in reversed(seq):
        if nxt is None:
            bound = end_cap - node[v].d - instance.travel(v, instance.depot_end)
        else:
            bound = lat[nxt] - node[v].d - instance.travel(v, nxt)
        val = min(caps[v], bound)
        if v <= n:  # pickup: its dropoff may impose an earlier latest time
            drop = v + n
            if drop in lat:
                val = min(val, lat[drop] - node[v].d - instance.travel(v, drop))
        lat[v] = val
        nxt = v
    return lat


def _om_route_timing(instance, seq):
    """(duration, schedule, depart, completion) minimizing route duration."""
    node = {v.index: v for v in instance.nodes}
    caps = {v: node[v].l for v in seq}
    fwd = _earliest_profile(instance, seq, caps)
    if fwd is None:
        return None
    earliest, completion = fwd
    latest = _latest_profile(instance, seq, caps, completion)
    depart = min(node[0].l, latest[seq[0]] - instance.travel(0, seq[0]))
    return completion - depart, latest, depart, completion


def _um_route_options(instance, seq):
    """(late_count, dev_lo, dev_hi, earliest, latest, h_nodes) per late-subset."""
    node = {v.index: v for v in instance.nodes}
    thr = instance.lateness_threshold
    h_in_seq = [v for v in seq if node[v].in_H]
    options = []
    for late_set in itertools.chain.from_iterable(
        itertools.combinations(h_in_seq, k) for k in range(len(h_in_seq) + 1)
    ):
        allowed = set(late_set)
        caps = {}
        for v in seq:
            cap = node[v].l
            if node[v].in_H and v not in allowed:
                cap = min(cap, node[v].s + thr)
            caps[v] = cap
        fwd = _earliest_profile(instance, seq, caps)
        if fwd is None:
            continue
        earliest, _ = fwd
        latest = _latest_profile(instance, seq, caps, node[instance.depot_end].l)
        dev_lo = sum(earliest[v] - node[v].s for v in h_in_seq)
        dev_hi = sum(latest[v] - node[v].s for v in h_in_seq)
        options.append((len(allowed), dev_lo, dev_hi, earliest, latest,
                        tuple(sorted(allowed))))
    return options, h_in_seq


def enumerate_optimal(instance: Instance) -> EnumeratedSolution:
    """Exhaustive global optimum; guard: n <= 4 requests, p <= 3 vehicles."""
    n = instance.n
    p = instance.fleet.count
    if n > ORACLE_MAX_REQUESTS or p > ORACLE_MAX_VEHICLES:
        raise OracleTooLarge(f"oracle limited to n <= {ORACLE_MAX_REQUESTS}, "
                             f"p <= {ORACLE_MAX_VEHICLES}; got n={n}, p={p}")
    user = instance.model_kind is ModelKind.USER
    node = {v.index: v for v in instance.nodes}
    best = None  # (objective, assignment, sequences, payload)

    for assign in itertools.product(range(1, p + 1), repeat=n):
        by_vehicle: dict[int, tuple[int, ...]] = {k: () for k in range(1, p + 1)}
        for req, k in enumerate(assign, start=1):
            by_vehicle[k] += (req,)

        if not user:
            total = 0.0
            plan = []
            feasible = True
            for k in range(1, p + 1):
                reqs = by_vehicle[k]
                if not reqs:
                    plan.append(((), {}, 0.0, 0.0))
                    continue
                cap = instance.fleet.capacities[k - 1]
                vehicle_best = None
                for seq in _vehicle_sequences(instance, reqs, cap):
                    timing = _om_route_timing(instance, seq)
                    if timing is None:
                        continue
                    duration, schedule, depart, completion = timing
                    key = (duration, seq)
                    if vehicle_best is None or key < vehicle_best[0]:
                        vehicle_best = (key, schedule, depart, completion)
                if vehicle_best is None:
                    feasible = False
                    break
                (duration, seq), schedule, depart, completion = (
                    vehicle_best[0], vehicle_best[1], vehicle_best[2], vehicle_best[3])
                total += duration
                plan.append((seq, schedule, depart, completion))
            if not feasible:
                continue
            seqs = tuple(entry[0] for entry in plan)
            key = (total, assign, seqs)
            if best is None or key < best[0]:
                best = (key, plan, None)
        else:
            per_vehicle_options = []
            feasible = True
            for k in range(1, p + 1):
                reqs = by_vehicle[k]
                if not reqs:
                    per_vehicle_options.append([((), 0, 0.0, 0.0, {}, {}, ())])
                    continue
                cap = instance.fleet.capacities[k - 1]
                options = []
                for seq in _vehicle_sequences(instance, reqs, cap):
                    seq_options, _ = _um_route_options(instance, seq)
                    for late, lo, hi, earliest, latest, allowed in seq_options:
                        options.append((seq, late, lo, hi, earliest, latest, allowed))
                if not options:
                    feasible = False
                    break
                per_vehicle_options.append(options)
            if not feasible:
                continue
            beta = instance.penalty_weight
            for combo in itertools.product(*per_vehicle_options):
                late_total = sum(opt[1] for opt in combo)
                lo = sum(opt[2] for opt in combo)
                hi = sum(opt[3] for opt in combo)
                dev = max(0.0, lo, -hi)  # distance from 0 to [lo, hi]
                objective = max(beta * late_total, dev)
                seqs = tuple(opt[0] for opt in combo)
                allowed = tuple(opt[6] for opt in combo)
                key = (objective, assign, seqs, allowed)
                if best is None or key < best[0]:
                    best = (key, combo, (lo, hi))

    if best is None:
        return EnumeratedSolution(STATUS_INFEASIBLE, None)

    solution = EnumeratedSolution(STATUS_OPTIMAL, best[0][0])
    assign = best[0][1]
    solution.assignment = {req: k for req, k in enumerate(assign, start=1)}
    if not user:
        plan = best[1]
        solution.sequences = [entry[0] for entry in plan]
        solution.depot_depart = []
        solution.depot_return = []
        for seq, schedule, depart, completion in plan:
            solution.depot_depart.append(depart if seq else 0.0)
            solution.depot_return.append(completion if seq else 0.0)
            for v in seq:
                solution.arrival[v] = schedule[v]
    else:
        combo = best[1]
        lo, hi = best[2]
        target = min(max(0.0, lo), hi)  # closest point of [lo, hi] to zero
        span = hi - lo
        lam = 0.0 if span <= 1e-12 else (target - lo) / span
        solution.sequences = [opt[0] for opt in combo]
        for opt in combo:
            seq, _, _, _, earliest, latest, allowed = opt
            if not seq:
                solution.depot_depart.append(0.0)
                solution.depot_return.append(0.0)
                continue
            sched = {v: (1 - lam) * earliest[v] + lam * latest[v] for v in seq}
            for v in seq:
                solution.arrival[v] = sched[v]
            first, last = seq[0], seq[-1]
            solution.depot_depart.append(
                min(node[0].l, sched[first] - instance.travel(0, first)))
            solution.depot_return.append(
                sched[last] + node[last].d + instance.travel(last, instance.depot_end))
        thr = instance.lateness_threshold
        for i in instance.h_nodes:
            bi = solution.arrival[i]
            solution.lateness[i] = 1 if bi - node[i].s > thr + 1e-9 else 0

    return solution
