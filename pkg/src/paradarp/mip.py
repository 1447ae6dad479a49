"""Exact MIP solving: branch-and-bound over LP relaxations.

Nodes are solved with the dual simplex warm-started from the parent's
optimal basis (branching only changes variable bounds).  A root presolve
fixes binaries whose opposite value would make some row infeasible by
interval arithmetic, which on dial-a-ride models eliminates arcs that can
never be driven within the time windows.  A fractional diving heuristic
supplies early incumbents; pruning uses LP bounds only, so incumbents are
exact integer-feasible points and optimality claims hold at the configured
gap tolerance.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from paradarp.formulation import BINARY, EQ, GE, LE, ModelSpec
from paradarp.instance import Instance, ModelKind
from paradarp.simplex import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    Basis,
    BoundedSimplex,
    NumericalFailure,
)

log = logging.getLogger("paradarp.mip")

INF = float("inf")

MOST_FRACTIONAL = "most_fractional"
PSEUDO_COST = "pseudo_cost"
BEST_BOUND = "best_bound"
DEPTH_FIRST = "depth_first"

STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE = "feasible"      # stopped at the time limit with an incumbent
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_UNKNOWN = "unknown"        # stopped at the time limit with no incumbent


@dataclass
class SolverConfig:
    time_limit: float = 3600.0
    gap_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    branching_rule: str = MOST_FRACTIONAL
    node_selection: str = BEST_BOUND
    presolve: bool = True
    diving: bool = True
    dive_frequency: int = 400
    log_interval: Optional[float] = None

    def __post_init__(self):
        if self.time_limit <= 0 or self.gap_tolerance <= 0:
            raise ValueError("time_limit and gap_tolerance must be positive")
        if self.integrality_tolerance <= 0:
            raise ValueError("integrality_tolerance must be positive")


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray

    def value(self, spec: ModelSpec, name: str) -> float:
        return float(self.x[spec.var_index[name]])


@dataclass
class SolveResult:
    status: str
    objective: Optional[float]
    best_bound: float
    gap: float
    node_count: int
    wall_time: float
    routes: list[list[int]] = field(default_factory=list)
    arrival: dict[int, float] = field(default_factory=dict)       # interior B_i
    depot_depart: list[float] = field(default_factory=list)       # B_0k
    depot_return: list[float] = field(default_factory=list)       # B_{2n+1,k}
    loads: dict[int, float] = field(default_factory=dict)         # interior Q_i
    load_return: list[float] = field(default_factory=list)        # Q_{2n+1,k}
    lateness: dict[int, int] = field(default_factory=dict)        # y_i
    x: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


# -- model -> arrays -------------------------------------------------------


def model_arrays(spec: ModelSpec):
    """Dense (A, senses, rhs, c, lo, up, is_binary) view of a ModelSpec."""
    nv = spec.num_vars
    m = spec.num_constraints
    a = np.zeros((m, nv))
    senses = []
    rhs = np.zeros(m)
    for r, con in enumerate(spec.constraints):
        for j, coef in con.coeffs:
            a[r, j] += coef
        senses.append(con.sense)
        rhs[r] = con.rhs
    c = np.zeros(nv)
    for j, coef in spec.objective:
        c[j] += coef
    lo = np.array([v.lower for v in spec.variables])
    up = np.array([v.upper for v in spec.variables])
    is_bin = np.array([v.kind == BINARY for v in spec.variables])
    return a, senses, rhs, c, lo, up, is_bin


def solve_lp(spec: ModelSpec) -> LpSolution:
    """Solve the LP relaxation (binaries relaxed to [0, 1])."""
    a, senses, rhs, c, lo, up, _ = model_arrays(spec)
    engine = BoundedSimplex(a, senses, rhs, c)
    res = engine.solve(lo, up)
    return LpSolution(res.status, res.objective, res.x)


# -- presolve ---------------------------------------------------------------


def _le_rows(spec: ModelSpec):
    """Constraints normalized to <= form as (cols, coefs, rhs) triples."""
    rows = []
    for con in spec.constraints:
        cols = np.array([j for j, _ in con.coeffs], dtype=np.int64)
        coefs = np.array([co for _, co in con.coeffs])
        if con.sense in (LE, EQ):
            rows.append((cols, coefs, con.rhs))
        if con.sense in (GE, EQ):
            rows.append((cols, -coefs, -con.rhs))
    return rows

def presolve_fix_binaries(spec: ModelSpec, lo, up, is_bin, max_passes=30):
    """Fix binaries whose value would violate a row's minimum activity.

    Returns (lo, up) with tightened binary bounds, or None when some row is
    proven infeasible.  This is plain interval arithmetic: no variable is
    removed that could take part in any feasible point.
    """
    lo = lo.copy()
    up = up.copy()
    rows = _le_rows(spec)
    tol = 1e-7
    for _ in range(max_passes):
        changed = False
        for cols, coefs, rhs in rows:
            lo_side = np.where(coefs >= 0, lo[cols], up[cols])
            contrib = coefs * lo_side
            total = contrib.sum()
            if total > rhs + tol:
                return None
            with np.errstate(invalid="ignore"):
                others = total - contrib  # -inf - -inf -> nan, masked below
            is_b = is_bin[cols] & (lo[cols] < up[cols]) & np.isfinite(others)
            bad1 = is_b & (others + coefs > rhs + tol)
            bad0 = is_b & (others > rhs + tol)
            for j in cols[bad1 & bad0]:
                return None
            for j in cols[bad1]:
                if up[j] != 0.0:
                    up[j] = 0.0
                    changed = True
            for j in cols[bad0]:
                if lo[j] != 1.0:
                    lo[j] = 1.0
                    changed = True
            if np.any(lo[cols] > up[cols]):
                return None
        if not changed:
            break
    return lo, up


# -- branch and bound --------------------------------------------------------


@dataclass
class _Node:
    bound: float
    depth: int
    parent: Optional["_Node"]
    change: Optional[tuple[int, float, float]]
    basis: Optional[Basis]
    branch_var: int = -1
    branch_frac: float = 0.0
    branch_dir: int = 0


class _PseudoCosts:
    def __init__(self, n):
        self.up_sum = np.zeros(n)
        self.up_cnt = np.zeros(n)
        self.dn_sum = np.zeros(n)
        self.dn_cnt = np.zeros(n)

    def record(self, j, direction, frac, degradation):
        unit = max(frac if direction < 0 else 1.0 - frac, 1e-6)
        per_unit = max(degradation, 0.0) / unit
        if direction > 0:
            self.up_sum[j] += per_unit
            self.up_cnt[j] += 1
        else:
            self.dn_sum[j] += per_unit
            self.dn_cnt[j] += 1

    def score(self, j, frac):
        up = self.up_sum[j] / self.up_cnt[j] if self.up_cnt[j] else 1.0
        dn = self.dn_sum[j] / self.dn_cnt[j] if self.dn_cnt[j] else 1.0
        return max((1.0 - frac) * up, 1e-6) * max(frac * dn, 1e-6)


def _materialize(node: _Node, root_lo, root_up):
    lo = root_lo.copy()
    up = root_up.copy()
    chain = []
    cur = node
    while cur is not None:
        if cur.change is not None:
            chain.append(cur.change)
        cur = cur.parent
    for j, l, u in reversed(chain):
        lo[j] = l
        up[j] = u
    return lo, up


def _fractional(x, bin_idx, tol):
    vals = x[bin_idx]
    frac = np.abs(vals - np.round(vals))
    mask = frac > tol
    return bin_idx[mask], vals[mask]


def _pick_branch(config, pseudo, frac_idx, frac_vals):
    fracs = frac_vals - np.floor(frac_vals)
    if config.branching_rule == PSEUDO_COST and pseudo is not None:
        scores = np.array([pseudo.score(j, f) for j, f in zip(frac_idx, fracs)])
        pos = int(np.argmax(scores))
    else:
        pos = int(np.argmax(np.minimum(fracs, 1.0 - fracs)))
    return int(frac_idx[pos]), float(fracs[pos])


def _dive(engine, lo, up, start, bin_idx, cutoff, tol, max_steps):
    """Fractional diving: round the most nearly integral binary, repeat."""
    lo = lo.copy()
    up = up.copy()
    res = start
    for _ in range(max_steps):
        frac_idx, frac_vals = _fractional(res.x, bin_idx, tol)
        if frac_idx.size == 0:
            return res
        dist = np.abs(frac_vals - np.round(frac_vals))
        pos = int(np.argmin(dist))
        j = int(frac_idx[pos])
        v = float(np.round(frac_vals[pos]))
        lo[j] = up[j] = v
        try:
            res = engine.solve(lo, up, res.basis)
        except NumericalFailure:
            return None
        if res.status != OPTIMAL or res.objective >= cutoff:
            return None
    return None


def solve_mip(
    spec: ModelSpec,
    config: Optional[SolverConfig] = None,
    instance: Optional[Instance] = None,
) -> SolveResult:
    """Branch-and-bound solve of a ModelSpec.

    When `instance` is given the result carries decoded routes, schedules,
    loads, and lateness flags; otherwise only objective-level fields and the
    raw variable vector are populated.
    """
    config = config or SolverConfig()
    t0 = time.monotonic()
    a, senses, rhs, c, root_lo, root_up, is_bin = model_arrays(spec)
    bin_idx = np.nonzero(is_bin)[0]
    engine = BoundedSimplex(a, senses, rhs, c)
    tol = config.integrality_tolerance

    def make_result(status, incumbent_obj, incumbent_x, best_bound, nodes):
        wall = time.monotonic() - t0
        if incumbent_obj is not None:
            gap = (incumbent_obj - best_bound) / max(1.0, abs(incumbent_obj))
        else:
            gap = INF
        result = SolveResult(
            status=status,
            objective=incumbent_obj,
            best_bound=best_bound,
            gap=max(gap, 0.0),
            node_count=nodes,
            wall_time=wall,
            x=incumbent_x,
        )
        if instance is not None and incumbent_x is not None:
            _decode_solution(spec, instance, incumbent_x, result)
        return result

    if config.presolve:
        fixed = presolve_fix_binaries(spec, root_lo, root_up, is_bin)
        if fixed is None:
            return make_result(STATUS_INFEASIBLE, None, None, INF, 0)
        root_lo, root_up = fixed

    def node_lp(lo, up, basis, bound=INF):
        try:
            return engine.solve(lo, up, basis, cutoff=bound)
        except NumericalFailure:
            return engine.solve_primal(lo, up)  # cold restart; may re-raise

    root = node_lp(root_lo, root_up, None)
    nodes = 1
    if root.status == INFEASIBLE:
        return make_result(STATUS_INFEASIBLE, None, None, INF, nodes)
    if root.status == UNBOUNDED:
        return make_result(STATUS_UNBOUNDED, None, None, -INF, nodes)

    incumbent_obj: Optional[float] = None
    incumbent_x: Optional[np.ndarray] = None
    pseudo = _PseudoCosts(spec.num_vars) if config.branching_rule == PSEUDO_COST else None

    def cutoff():
        if incumbent_obj is None:
            return INF
        return incumbent_obj - config.gap_tolerance * max(1.0, abs(incumbent_obj))

    def try_incumbent(obj, x):
        nonlocal incumbent_obj, incumbent_x
        if incumbent_obj is None or obj < incumbent_obj - 1e-12:
            incumbent_obj = obj
            incumbent_x = x.copy()
            return True
        return False

    frac_idx, frac_vals = _fractional(root.x, bin_idx, tol)
    if frac_idx.size == 0:
        try_incumbent(root.objective, root.x)
        return make_result(STATUS_OPTIMAL, incumbent_obj, incumbent_x,
                           root.objective, nodes)

    if config.diving:
        dived = _dive(engine, root_lo, root_up, root, bin_idx, cutoff(), tol,
                      max_steps=min(2 * bin_idx.size, 400))
        if dived is not None:
            try_incumbent(dived.objective, dived.x)

    seq = 0
    open_nodes: list = []
    root_node = _Node(root.objective, 0, None, None, root.basis)
    j, f = _pick_branch(config, pseudo, frac_idx, frac_vals)

    def push_children(node, lp, j, f):
        nonlocal seq
        near = 1.0 if f >= 0.5 else 0.0
        order = (1.0 - near, near) if config.node_selection == DEPTH_FIRST else (near, 1.0 - near)
        for v in order:
            child = _Node(lp.objective, node.depth + 1, node, (j, v, v), lp.basis,
                          branch_var=j, branch_frac=f, branch_dir=1 if v > 0.5 else -1)
            if config.node_selection == DEPTH_FIRST:
                open_nodes.append((child.bound, seq, child))
            else:
                heapq.heappush(open_nodes, (child.bound, seq, child))
            seq += 1

    push_children(root_node, root, j, f)
    last_log = t0

    while open_nodes:
        now = time.monotonic()
        if now - t0 > config.time_limit:
            bounds = [b for b, _, _ in open_nodes]
            if not bounds:
                bounds = [incumbent_obj if incumbent_obj is not None else INF]
            status = STATUS_FEASIBLE if incumbent_obj is not None else STATUS_UNKNOWN
            return make_result(status, incumbent_obj, incumbent_x, min(bounds), nodes)

        if config.node_selection == DEPTH_FIRST:
            bound, _, node = open_nodes.pop()
        else:
            bound, _, node = heapq.heappop(open_nodes)
        if bound >= cutoff():
            continue

        lo, up = _materialize(node, root_lo, root_up)
        lp = node_lp(lo, up, node.basis)
        nodes += 1

        if config.log_interval is not None and now - last_log >= config.log_interval:
            last_log = now
            inc = incumbent_obj if incumbent_obj is not None else INF
            open_bounds = [b for b, _, _ in open_nodes] + [bound]
            gbound = min(open_bounds)
            ggap = (inc - gbound) / max(1.0, abs(inc)) if inc != INF else INF
            log.info("node=%d incumbent=%g bound=%g gap=%g time=%.1f",
                     nodes, inc, gbound, ggap, now - t0)

        if lp.status == INFEASIBLE:
            if pseudo is not None and node.branch_var >= 0:
                pseudo.record(node.branch_var, node.branch_dir, node.branch_frac, 1e6)
            continue
        if lp.status == UNBOUNDED:
            return make_result(STATUS_UNBOUNDED, None, None, -INF, nodes)
        obj = max(lp.objective, node.bound)
        if pseudo is not None and node.branch_var >= 0:
            pseudo.record(node.branch_var, node.branch_dir, node.branch_frac,
                          lp.objective - node.bound)
        if obj >= cutoff():
            continue

        frac_idx, frac_vals = _fractional(lp.x, bin_idx, tol)
        if frac_idx.size == 0:
            try_incumbent(obj, lp.x)
            continue

        if config.diving and config.dive_frequency > 0 and nodes % config.dive_frequency == 0:
            dived = _dive(engine, lo, up, lp, bin_idx, cutoff(), tol,
                          max_steps=min(2 * bin_idx.size, 400))
            if dived is not None:
                try_incumbent(dived.objective, dived.x)
                if obj >= cutoff():
                    continue

        j, f = _pick_branch(config, pseudo, frac_idx, frac_vals)
        node.basis = None  # children carry the fresher LP basis
        push_children(node, lp, j, f)

    if incumbent_obj is None:
        return make_result(STATUS_INFEASIBLE, None, None, INF, nodes)
    return make_result(STATUS_OPTIMAL, incumbent_obj, incumbent_x, incumbent_obj, nodes)


# -- solution decoding -------------------------------------------------------


def _decode_solution(spec: ModelSpec, instance: Instance, x, result: SolveResult):
    idx = spec.var_index
    n = instance.n
    end = instance.depot_end
    p = instance.fleet.count
    result.routes = []
    for k in range(1, p + 1):
        route = [0]
        cur = 0
        for _ in range(2 * n + 2):
            nxt = None
            for (i, j) in instance.arcs:
                if i == cur and x[idx[f"x_{i}_{j}_{k}"]] > 0.5:
                    nxt = j
                    break
            if nxt is None:
                break
            route.append(nxt)
            cur = nxt
            if cur == end:
                break
        result.routes.append(route)
    result.arrival = {i: float(x[idx[f"B_{i}"]]) for i in instance.interior}
    result.depot_depart = [float(x[idx[f"B_0_{k}"]]) for k in range(1, p + 1)]
    result.depot_return = [float(x[idx[f"B_{end}_{k}"]]) for k in range(1, p + 1)]
    result.loads = {i: float(x[idx[f"Q_{i}"]]) for i in instance.interior}
    result.load_return = [float(x[idx[f"Q_{end}_{k}"]]) for k in range(1, p + 1)]
    if instance.model_kind is ModelKind.USER:
        result.lateness = {
            i: int(round(x[idx[f"y_{i}"]])) for i in instance.h_nodes
        }


# -- independent feasibility checker ----------------------------------------


def check_solution(instance: Instance, candidate: SolveResult,
                   tol: float = 1e-6) -> list[Violation]:
    """Verify a candidate against the instance, sharing no solver code.

    Structural route checks plus the candidate's own B/Q values against
    windows, travel/service propagation, precedence, capacity, and (user
    model) lateness-indicator consistency.  Empty list means feasible.
    """
    v: list[Violation] = []
    n = instance.n
    end = instance.depot_end
    node = {nd.index: nd for nd in instance.nodes}

    if len(candidate.routes) != instance.fleet.count:
        v.append(Violation("route", f"expected {instance.fleet.count} routes, "
                                    f"got {len(candidate.routes)}"))
        return v

    seen: dict[int, int] = {}
    for k, route in enumerate(candidate.routes, start=1):
        if not route or route[0] != 0 or route[-1] != end:
            v.append(Violation("route", f"vehicle {k} must run depot to depot: {route}"))
            continue
        for a, b in zip(route, route[1:]):
            if (a, b) not in instance.arcs:
                v.append(Violation("route", f"vehicle {k} uses missing arc ({a}, {b})"))
        for i in route[1:-1]:
            if i in seen:
                v.append(Violation("visit", f"node {i} visited by vehicles "
                                            f"{seen[i]} and {k}"))
            seen[i] = k

    for i in instance.interior:
        if i not in seen:
            v.append(Violation("visit", f"node {i} never visited"))

    for i in instance.pickups:
        d = i + n
        if i in seen and d in seen:
            if seen[i] != seen[d]:
                v.append(Violation("pairing", f"pickup {i} on vehicle {seen[i]} "
                                              f"but dropoff {d} on {seen[d]}"))
            else:
                route = candidate.routes[seen[i] - 1]
                if route.index(i) > route.index(d):
                    v.append(Violation("pairing", f"dropoff {d} precedes pickup {i}"))

    def arrival_at(i: int, k: int) -> Optional[float]:
        if i == 0:
            return candidate.depot_depart[k - 1] if candidate.depot_depart else None
        if i == end:
            return candidate.depot_return[k - 1] if candidate.depot_return else None
        return candidate.arrival.get(i)

    for k, route in enumerate(candidate.routes, start=1):
        if not route or route[0] != 0 or route[-1] != end:
            continue
        for a, b in zip(route, route[1:]):
            if (a, b) not in instance.arcs:
                continue
            ba, bb = arrival_at(a, k), arrival_at(b, k)
            if ba is None or bb is None:
                v.append(Violation("time", f"missing arrival time on arc ({a}, {b})"))
                continue
            required = ba + node[a].d + instance.travel(a, b)
            if bb < required - tol:
                v.append(Violation("time", f"vehicle {k} arrives at {b} at {bb:.3f} "
                                           f"before {required:.3f}"))
        load = 0
        cap = instance.fleet.capacities[k - 1]
        for i in route[1:-1]:
            load += node[i].q
            if load < 0 or load > cap:
                v.append(Violation("capacity", f"vehicle {k} load {load} at node {i} "
                                               f"outside [0, {cap}]"))

    for i in instance.interior:
        bi = candidate.arrival.get(i)
        if bi is None:
            v.append(Violation("window", f"no arrival time for node {i}"))
            continue
        if bi < node[i].e - tol or bi > node[i].l + tol:
            v.append(Violation("window", f"node {i} arrival {bi:.3f} outside "
                                         f"[{node[i].e}, {node[i].l}]"))
    for k in range(1, instance.fleet.count + 1):
        for i in (0, end):
            bi = arrival_at(i, k)
            if bi is not None and (bi < node[i].e - tol or bi > node[i].l + tol):
                v.append(Violation("window", f"vehicle {k} depot time {bi:.3f} "
                                             f"outside [{node[i].e}, {node[i].l}]"))

    for i in instance.pickups:
        bi, bd = candidate.arrival.get(i), candidate.arrival.get(i + n)
        if bi is None or bd is None:
            continue
        required = bi + node[i].d + instance.travel(i, i + n)
        if bd < required - tol:
            v.append(Violation("precedence", f"request {i}: dropoff at {bd:.3f} "
                                             f"before {required:.3f}"))

    if instance.model_kind is ModelKind.USER:
        thr = instance.lateness_threshold
        for i in instance.h_nodes:
            bi = candidate.arrival.get(i)
            if bi is None:
                continue
            yi = candidate.lateness.get(i)
            if yi is None:
                yi = 1 if bi - node[i].s > thr else 0
            if yi == 0 and bi - node[i].s > thr + tol:
                v.append(Violation("lateness", f"node {i} late by "
                                               f"{bi - node[i].s:.3f} > {thr} with y=0"))
    return v
