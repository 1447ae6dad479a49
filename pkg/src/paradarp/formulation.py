"""Solver-agnostic MIP formulations of the operator and user models.

The operator model minimizes total vehicle operating time (sum over
vehicles of final-depot arrival minus initial-depot departure).  The user
model minimizes the larger of (a) a uniform penalty on the count of
excessively late high-priority nodes and (b) the absolute signed sum of
scheduled-vs-actual deviations over those nodes, linearized through an
auxiliary variable with three lower-bounding rows.

Arc-use binaries are vehicle-indexed (x_i_j_k); interior arrival times and
loads are shared across vehicles (each interior node is visited exactly
once), while depot copies are vehicle-indexed.  Time windows and load
capacities are expressed as variable bounds, which the bounded-variable
simplex exploits directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from paradarp.instance import Instance, ModelKind

BINARY = "binary"
CONTINUOUS = "continuous"

LE = "<="
GE = ">="
EQ = "="

INF = float("inf")


class FormulationError(ValueError):
    """Raised when a model is requested for a mismatched instance."""


@dataclass
class Variable:
    name: str
    kind: str  # BINARY | CONTINUOUS
    lower: float
    upper: float


@dataclass
class LinearConstraint:
    name: str
    coeffs: list[tuple[int, float]]  # (variable position, coefficient)
    sense: str  # LE | GE | EQ
    rhs: float


@dataclass
class ModelSpec:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    objective: list[tuple[int, float]] = field(default_factory=list)  # minimize
    var_index: dict[str, int] = field(default_factory=dict)
    name: str = "model"

    def add_variable(self, name: str, kind: str, lower: float, upper: float) -> int:
        if name in self.var_index:
            raise ValueError(f"duplicate variable {name}")
        if kind == BINARY and (lower, upper) != (0.0, 1.0):
            raise ValueError(f"binary {name} must have bounds [0, 1]")
        self.variables.append(Variable(name, kind, lower, upper))
        pos = len(self.variables) - 1
        self.var_index[name] = pos
        return pos

    def add_constraint(
        self, name: str, coeffs: Iterable[tuple[int, float]], sense: str, rhs: float
    ) -> None:
        pairs = [(v, float(c)) for v, c in coeffs if c != 0.0]
        for v, _ in pairs:
            if not 0 <= v < len(self.variables):
                raise ValueError(f"constraint {name} references unknown variable {v}")
        self.constraints.append(LinearConstraint(name, pairs, sense, float(rhs)))

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_int_vars(self) -> int:
        return sum(1 for v in self.variables if v.kind == BINARY)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def counts(self) -> tuple[int, int, int]:
        """(Vars, IntVars, Constrs) for summary tables."""
        return (self.num_vars, self.num_int_vars, self.num_constraints)


@dataclass(frozen=True)
class BigMSet:
    """Smallest valid deactivation constants for the big-M constraint families."""

    m1: float  # time propagation
    m2: float  # load propagation
    m3: float  # lateness indicator

    def as_dict(self) -> dict[str, float]:
        return {"M1": self.m1, "M2": self.m2, "M3": self.m3}


def compute_big_m(instance: Instance) -> BigMSet:
    """M1 = max l - min e + max t + max d; M2 = max capacity; M3 = max l - min s."""
    max_l = max(v.l for v in instance.nodes)
    min_e = min(v.e for v in instance.nodes)
    max_t = max(t / 10.0 for t in instance.arcs.values())
    max_d = max(v.d for v in instance.nodes)
    m1 = max_l - min_e + max_t + max_d
    m2 = float(max(instance.fleet.capacities))
    scheduled = [v.s for v in instance.nodes if v.s is not None]
    m3 = (max_l - min(scheduled)) if scheduled else 0.0
    return BigMSet(m1=m1, m2=m2, m3=m3)


def build_operator_model(instance: Instance) -> ModelSpec:
    if instance.model_kind is not ModelKind.OPERATOR:
        raise FormulationError("instance was built for the user model")
    return _build(instance)


def build_user_model(instance: Instance) -> ModelSpec:
    if instance.model_kind is not ModelKind.USER:
        raise FormulationError("instance was built for the operator model")
    return _build(instance)


def build_model(instance: Instance) -> ModelSpec:
    """Dispatch on the instance's model kind."""
    if instance.model_kind is ModelKind.OPERATOR:
        return build_operator_model(instance)
    return build_user_model(instance)


def _build(instance: Instance) -> ModelSpec:
    n = instance.n
    end = instance.depot_end
    vehicles = range(1, instance.fleet.count + 1)
    arcs = sorted(instance.arcs)
    bigm = compute_big_m(instance)
    m1, m2, m3 = bigm.m1, bigm.m2, bigm.m3
    node = {v.index: v for v in instance.nodes}
    cap_min = float(min(instance.fleet.capacities))
    user = instance.model_kind is ModelKind.USER

    spec = ModelSpec(name=f"{instance.model_kind.value}_n{n}_p{instance.fleet.count}")

    x: dict[tuple[int, int, int], int] = {}
    for k in vehicles:
        for (i, j) in arcs:
            x[(i, j, k)] = spec.add_variable(f"x_{i}_{j}_{k}", BINARY, 0.0, 1.0)

    # Interior arrival times bounded by their windows; depot copies per vehicle.
    b_int = {i: spec.add_variable(f"B_{i}", CONTINUOUS, node[i].e, node[i].l)
             for i in instance.interior}
    b_start = {k: spec.add_variable(f"B_0_{k}", CONTINUOUS, node[0].e, node[0].l)
               for k in vehicles}
    b_end = {k: spec.add_variable(f"B_{end}_{k}", CONTINUOUS, node[end].e, node[end].l)
             for k in vehicles}

    # Loads: max(0, q_i) <= Q_i <= min(C_k, C_k + q_i) over every vehicle.
    q_int = {}
    for i in instance.interior:
        qi = node[i].q
        q_int[i] = spec.add_variable(
            f"Q_{i}", CONTINUOUS, float(max(0, qi)), cap_min + min(0, qi)
        )
    q_end = {k: spec.add_variable(f"Q_{end}_{k}", CONTINUOUS, 0.0,
                                  float(instance.fleet.capacities[k - 1]))
             for k in vehicles}

    y: dict[int, int] = {}
    z_var: Optional[int] = None
    if user:
        for i in instance.h_nodes:
            y[i] = spec.add_variable(f"y_{i}", BINARY, 0.0, 1.0)
        z_var = spec.add_variable("z", CONTINUOUS, 0.0, INF)

    out_arcs: dict[int, list[tuple[int, int]]] = {i: [] for i in range(0, end + 1)}
    in_arcs: dict[int, list[tuple[int, int]]] = {i: [] for i in range(0, end + 1)}
    for (i, j) in arcs:
        out_arcs[i].append((i, j))
        in_arcs[j].append((i, j))

    def t(i: int, j: int) -> float:
        return instance.travel(i, j)

    # Each pickup is left exactly once, by exactly one vehicle.
    for i in instance.pickups:
        spec.add_constraint(
            f"visit_{i}",
            [(x[(a, b, k)], 1.0) for k in vehicles for (a, b) in out_arcs[i]],
            EQ, 1.0,
        )

    # The vehicle leaving pickup i also leaves its dropoff n+i.
    for i in instance.pickups:
        for k in vehicles:
            coeffs = [(x[(a, b, k)], 1.0) for (a, b) in out_arcs[i]]
            coeffs += [(x[(a, b, k)], -1.0) for (a, b) in out_arcs[n + i]]
            spec.add_constraint(f"pair_{i}_{k}", coeffs, EQ, 0.0)

    # Every vehicle leaves the origin depot and reaches the final depot once.
    for k in vehicles:
        spec.add_constraint(
            f"depart_{k}", [(x[(a, b, k)], 1.0) for (a, b) in out_arcs[0]], EQ, 1.0
        )
    for k in vehicles:
        spec.add_constraint(
            f"arrive_{k}", [(x[(a, b, k)], 1.0) for (a, b) in in_arcs[end]], EQ, 1.0
        )

    # Per-vehicle flow conservation at interior nodes.
    for i in instance.interior:
        for k in vehicles:
            coeffs = [(x[(a, b, k)], 1.0) for (a, b) in in_arcs[i]]
            coeffs += [(x[(a, b, k)], -1.0) for (a, b) in out_arcs[i]]
            spec.add_constraint(f"flow_{i}_{k}", coeffs, EQ, 0.0)

    # Time propagation over interior arcs, aggregated over vehicles:
    # B_j >= B_i + t_ij + d_i - M1 (1 - sum_k x_ijk).
    for (i, j) in arcs:
        if i == 0 or j == end:
            continue
        coeffs = [(b_int[i], 1.0), (b_int[j], -1.0)]
        coeffs += [(x[(i, j, k)], m1) for k in vehicles]
        spec.add_constraint(f"tprop_{i}_{j}", coeffs, LE, m1 - t(i, j) - node[i].d)

    # Arrival at the final depot, per vehicle.
    for i in instance.dropoffs:
        for k in vehicles:
            spec.add_constraint(
                f"tend_{i}_{k}",
                [(b_int[i], 1.0), (b_end[k], -1.0), (x[(i, end, k)], m1)],
                LE, m1 - t(i, end) - node[i].d,
            )

    # Departure from the origin depot, per vehicle (d_0 = 0).
    for j in instance.pickups:
        for k in vehicles:
            spec.add_constraint(
                f"tstart_{j}_{k}",
                [(b_start[k], 1.0), (b_int[j], -1.0), (x[(0, j, k)], m1)],
                LE, m1 - t(0, j) - node[0].d,
            )

    # Load propagation over interior arcs: Q_j >= Q_i + q_j - M2 (1 - sum_k x_ijk).
    for (i, j) in arcs:
        if i == 0 or j == end:
            continue
        coeffs = [(q_int[i], 1.0), (q_int[j], -1.0)]
        coeffs += [(x[(i, j, k)], m2) for k in vehicles]
        spec.add_constraint(f"lprop_{i}_{j}", coeffs, LE, m2 - node[j].q)

    for i in instance.dropoffs:
        for k in vehicles:
            spec.add_constraint(
                f"lend_{i}_{k}",
                [(q_int[i], 1.0), (q_end[k], -1.0), (x[(i, end, k)], m2)],
                LE, m2,
            )

    # First pickup after the depot starts the load at q_j.
    for j in instance.pickups:
        for k in vehicles:
            spec.add_constraint(
                f"lstart_{j}_{k}",
                [(q_int[j], -1.0), (x[(0, j, k)], m2)],
                LE, m2 - node[j].q,
            )

    # Pickups precede their own dropoffs regardless of route shape.
    for i in instance.pickups:
        spec.add_constraint(
            f"prec_{i}",
            [(b_int[i], 1.0), (b_int[n + i], -1.0)],
            LE, -t(i, n + i) - node[i].d,
        )

    # LP-tightening: a vehicle never returns before it departs.
    for k in vehicles:
        spec.add_constraint(
            f"tighten_{k}", [(b_start[k], 1.0), (b_end[k], -1.0)], LE, 0.0
        )

    if user:
        threshold = instance.lateness_threshold
        beta = instance.penalty_weight
        h = instance.h_nodes
        # B_i - s_i <= T (1 - y_i) + M3 y_i
        for i in h:
            spec.add_constraint(
                f"late_{i}",
                [(b_int[i], 1.0), (y[i], threshold - m3)],
                LE, node[i].s + threshold,
            )
        spec.add_constraint(
            "zpen", [(y[i], beta) for i in h] + [(z_var, -1.0)], LE, 0.0
        )
        s_sum = sum(node[i].s for i in h)
        spec.add_constraint(
            "zpos", [(b_int[i], 1.0) for i in h] + [(z_var, -1.0)], LE, s_sum
        )
        spec.add_constraint(
            "zneg", [(b_int[i], -1.0) for i in h] + [(z_var, -1.0)], LE, -s_sum
        )
        spec.objective = [(z_var, 1.0)]
    else:
        spec.objective = [(b_end[k], 1.0) for k in vehicles]
        spec.objective += [(b_start[k], -1.0) for k in vehicles]

    return spec


def dump_lp(spec: ModelSpec) -> str:
    """Human-readable LP-style text of the model, for debugging."""
    lines = [f"\\ model {spec.name}", "Minimize", " obj: " + _expr(spec, spec.objective)]
    lines.append("Subject To")
    for con in spec.constraints:
        lines.append(f" {con.name}: {_expr(spec, con.coeffs)} {con.sense} {_fmt(con.rhs)}")
    lines.append("Bounds")
    for v in spec.variables:
        lo = "-inf" if v.lower == -INF else _fmt(v.lower)
        hi = "+inf" if v.upper == INF else _fmt(v.upper)
        lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = [v.name for v in spec.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _expr(spec: ModelSpec, coeffs: list[tuple[int, float]]) -> str:
    if not coeffs:
        return "0"
    parts = []
    for pos, c in coeffs:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = spec.variables[pos].name if mag == 1.0 else f"{_fmt(mag)} {spec.variables[pos].name}"
        parts.append(f"{sign} {term}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _fmt(value: float) -> str:
    return str(int(value)) if value == int(value) else repr(value)
