"""Cross-evaluation of operator/user solutions and summary tables.

A_B denotes model A's objective evaluated at model B's solution.  The user
metric reported here is the plain absolute deviation sum over high-priority
nodes (no lateness penalty); the penalty-inclusive value is kept alongside
in the JSON output.  Bracketed numbers in the text table are reductions
against the deviations observed in the raw operational data.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from paradarp.formulation import ModelSpec
from paradarp.instance import Direction, Instance, TripRequest
from paradarp.mip import SolveResult


class MissingActuals(ValueError):
    """A trip lacks the actual timestamp needed for the raw benchmark."""


class ScheduleMissing(ValueError):
    """A solve result carries no arrival schedule to evaluate."""


def evaluate_um_raw(trips: Sequence[TripRequest]) -> float:
    """Sum of |actual - scheduled| on the user-critical leg of each trip.

    Inbound trips are judged on the dropoff, outbound trips on the pickup.
    """
    total = 0.0
    for trip in trips:
        if trip.direction is Direction.INBOUND:
            actual, scheduled = trip.actual_dropoff, trip.scheduled_dropoff
        else:
            actual, scheduled = trip.actual_pickup, trip.scheduled_pickup
        if actual is None:
            raise MissingActuals(f"trip {trip.id} lacks an actual timestamp")
        total += abs(actual - scheduled)
    return total


def user_deviation(instance: Instance, result: SolveResult) -> float:
    """Sum over H nodes of |B_i - s_i| at the given solution."""
    if not result.arrival:
        raise ScheduleMissing("result has no arrival schedule")
    node = {v.index: v for v in instance.nodes}
    return sum(abs(result.arrival[i] - node[i].s) for i in instance.h_nodes)


def user_objective_linearized(instance: Instance, result: SolveResult) -> float:
    """The user model's linearized objective evaluated at a solution.

    max(beta * late_count, |sum of signed deviations|), where a node counts
    as late when it exceeds the threshold and no lateness flag excuses it.
    """
    if not result.arrival:
        raise ScheduleMissing("result has no arrival schedule")
    node = {v.index: v for v in instance.nodes}
    thr = instance.lateness_threshold
    signed = 0.0
    late = 0
    for i in instance.h_nodes:
        dev = result.arrival[i] - node[i].s
        signed += dev
        flag = result.lateness.get(i)
        if flag is None:
            flag = 1 if dev > thr + 1e-9 else 0
        late += flag
    return max(instance.penalty_weight * late, abs(signed))


def operating_time(result: SolveResult) -> float:
    """Total vehicle time away from the depot."""
    if not result.depot_return:
        raise ScheduleMissing("result has no depot schedule")
    return sum(r - d for r, d in zip(result.depot_return, result.depot_depart))


def vehicles_used(result: SolveResult) -> int:
    return sum(1 for route in result.routes if len(route) > 2)


@dataclass
class CrossEvaluation:
    """One period's row of the cross-evaluation table (minutes throughout)."""

    period: str
    orders: int
    um_raw: Optional[float]
    um_um: float
    um_om: float
    om_um: float
    om_om: float
    v_um: int
    v_om: int
    um_status: str = "optimal"
    om_status: str = "optimal"
    um_gap: float = 0.0
    om_gap: float = 0.0
    um_penalized: float = 0.0  # linearized objective incl. lateness penalty
    om_penalized: float = 0.0

    @property
    def um_um_reduction(self) -> Optional[float]:
        return None if self.um_raw is None else self.um_raw - self.um_um

    @property
    def um_om_reduction(self) -> Optional[float]:
        return None if self.um_raw is None else self.um_raw - self.um_om


def cross_evaluate(
    instance_om: Instance,
    result_om: SolveResult,
    instance_um: Instance,
    result_um: SolveResult,
    um_raw: Optional[float] = None,
    period: str = "",
) -> CrossEvaluation:
    """Evaluate each model's objective at both solutions."""
    return CrossEvaluation(
        period=period,
        orders=instance_om.n,
        um_raw=um_raw,
        um_um=user_deviation(instance_um, result_um),
        um_om=user_deviation(instance_om, result_om),
        om_um=operating_time(result_um),
        om_om=operating_time(result_om),
        v_um=vehicles_used(result_um),
        v_om=vehicles_used(result_om),
        um_status=result_um.status,
        om_status=result_om.status,
        um_gap=result_um.gap,
        om_gap=result_om.gap,
        um_penalized=user_objective_linearized(instance_um, result_um),
        om_penalized=user_objective_linearized(instance_um, result_om),
    )


def report_model_stats(model: ModelSpec, solve: SolveResult) -> dict:
    """Model-summary row: variable/constraint counts plus solve time."""
    n_vars, n_int, n_cons = model.counts()
    return {
        "Vars": n_vars,
        "IntVars": n_int,
        "Constrs": n_cons,
        "CPU": round(solve.wall_time, 3),
        "status": solve.status,
        "nodes": solve.node_count,
    }


CSV_COLUMNS = [
    "period", "orders", "um_raw", "um_um", "um_um_reduction", "um_om",
    "um_om_reduction", "om_um", "om_om", "v_um", "v_om",
    "um_status", "om_status", "um_gap", "om_gap",
]


def _row_values(row: CrossEvaluation) -> dict:
    return {
        "period": row.period,
        "orders": row.orders,
        "um_raw": _clean(row.um_raw),
        "um_um": _clean(row.um_um),
        "um_um_reduction": _clean(row.um_um_reduction),
        "um_om": _clean(row.um_om),
        "um_om_reduction": _clean(row.um_om_reduction),
        "om_um": _clean(row.om_um),
        "om_om": _clean(row.om_om),
        "v_um": row.v_um,
        "v_om": row.v_om,
        "um_status": row.um_status,
        "om_status": row.om_status,
        "um_gap": _clean(row.um_gap),
        "om_gap": _clean(row.om_gap),
    }


def _clean(value):
    if value is None:
        return None
    rounded = round(float(value), 6)
    return int(rounded) if rounded == int(rounded) else rounded


def totals_row(rows: Sequence[CrossEvaluation]) -> CrossEvaluation:
    raw = None
    if all(r.um_raw is not None for r in rows):
        raw = sum(r.um_raw for r in rows)
    worst = {"optimal": 0, "feasible": 1, "unknown": 2, "infeasible": 3,
             "unbounded": 3}
    return CrossEvaluation(
        period="total",
        orders=sum(r.orders for r in rows),
        um_raw=raw,
        um_um=sum(r.um_um for r in rows),
        um_om=sum(r.um_om for r in rows),
        om_um=sum(r.om_um for r in rows),
        om_om=sum(r.om_om for r in rows),
        v_um=sum(r.v_um for r in rows),
        v_om=sum(r.v_om for r in rows),
        um_status=max((r.um_status for r in rows), key=lambda s: worst.get(s, 3)),
        om_status=max((r.om_status for r in rows), key=lambda s: worst.get(s, 3)),
        um_gap=max(r.um_gap for r in rows),
        om_gap=max(r.om_gap for r in rows),
        um_penalized=sum(r.um_penalized for r in rows),
        om_penalized=sum(r.om_penalized for r in rows),
    )


def to_csv(rows: Sequence[CrossEvaluation], include_total: bool = True) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    all_rows = list(rows) + ([totals_row(rows)] if include_total and rows else [])
    for row in all_rows:
        values = _row_values(row)
        writer.writerow({k: ("" if values[k] is None else values[k])
                         for k in CSV_COLUMNS})
    return out.getvalue()


def to_json(rows: Sequence[CrossEvaluation], include_total: bool = True) -> str:
    payload = {
        "rows": [dict(_row_values(r),
                      um_penalized=_clean(r.um_penalized),
                      om_penalized=_clean(r.om_penalized))
                 for r in rows],
    }
    if include_total and rows:
        total = totals_row(rows)
        payload["total"] = dict(_row_values(total),
                                um_penalized=_clean(total.um_penalized),
                                om_penalized=_clean(total.om_penalized))
    return json.dumps(payload, indent=1)


def format_table(rows: Sequence[CrossEvaluation]) -> str:
    """Text table with the value (reduction-vs-raw) convention."""
    headers = ["Period", "Orders", "UM_Raw", "UM_UM", "UM_OM",
               "OM_UM", "OM_OM", "V_UM", "V_OM"]
    body = []
    all_rows = list(rows) + ([totals_row(rows)] if rows else [])
    for r in all_rows:
        body.append([
            r.period,
            str(r.orders),
            "-" if r.um_raw is None else _disp(r.um_raw),
            _paren(r.um_um, r.um_um_reduction),
            _paren(r.um_om, r.um_om_reduction),
            _disp(r.om_um),
            _disp(r.om_om),
            str(r.v_um),
            str(r.v_om),
        ])
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    def fmt_line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    rule = "  ".join("-" * w for w in widths)
    lines = [fmt_line(headers), rule]
    lines += [fmt_line(b) for b in body[:-1]]
    if len(body) > 1:
        lines.append(rule)
    lines.append(fmt_line(body[-1]))
    return "\n".join(lines) + "\n"


def _disp(value: float) -> str:
    cleaned = _clean(value)
    return str(cleaned)


def _paren(value: float, reduction: Optional[float]) -> str:
    if reduction is None:
        return _disp(value)
    return f"{_disp(value)} ({_disp(reduction)})"
