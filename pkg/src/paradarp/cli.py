"""Command-line driver: ingest -> solve -> report, plus matrix prefetch.

Exit codes: 0 success, 2 infeasible, 3 stopped at the time limit with an
incumbent, 4 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from paradarp import report as report_mod
from paradarp.formulation import build_model, dump_lp
from paradarp.ingestion import (
    HaversineProvider,
    HttpMatrixProvider,
    MatrixFileProvider,
    ProviderUnavailable,
    UnparsableFile,
    bucket_by_period,
    clean,
    read_trip_csv,
    resolve_travel_times,
    to_requests,
)
from paradarp.instance import (
    Direction,
    Fleet,
    Instance,
    InstanceConfig,
    InstanceError,
    ModelKind,
    TripRequest,
    build_instance,
    matrix_travel_time,
)
from paradarp.mip import (
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNKNOWN,
    SolverConfig,
    SolveResult,
    check_solution,
    solve_mip,
)
from paradarp.mps import export_mps
from paradarp.oracle import enumerate_optimal
from paradarp.plots import render_report_figures
from paradarp.report import cross_evaluate, evaluate_um_raw, report_model_stats

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TIMEOUT = 3
EXIT_INPUT = 4

DEFAULTS = {
    "vehicles": 5,
    "capacity": 7,
    "boarding": 7.0,
    "alighting": 5.0,
    "window": 30.0,
    "threshold": 15.0,
    "beta": 10000.0,
    "interval": 60,
    "speed": 60.0,
}


class InputError(Exception):
    pass


def _label(start: int, end: int) -> str:
    return f"{start // 60:02d}{start % 60:02d}-{end // 60:02d}{end % 60:02d}"


def _build_provider(args, api_key=None):
    if args.provider == "haversine":
        return HaversineProvider(args.speed)
    if args.provider == "matrix":
        if not args.matrix_file:
            raise InputError("--matrix-file is required with --provider matrix")
        return MatrixFileProvider(args.matrix_file)
    if args.provider == "http":
        if not args.endpoint:
            raise InputError("--endpoint is required with --provider http")
        if not args.tt_cache:
            raise InputError("--tt-cache is required with --provider http")
        return HttpMatrixProvider(args.endpoint, args.tt_cache, api_key=api_key)
    raise InputError(f"unknown provider {args.provider!r}")


def _load_mapping(path):
    if not path:
        return None
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


# -- ingest ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = Path(args.out)
    mapping = _load_mapping(args.mapping)
    records = read_trip_csv(args.csv, mapping)
    kept, cleaning = clean(records)
    trips = to_requests(kept)
    if not trips:
        raise InputError("no usable trips after cleaning")
    buckets = bucket_by_period(trips, args.interval)
    provider = _build_provider(args)
    depot = tuple(args.depot)

    periods = []
    for (start, end), bucket in buckets.items():
        label = _label(start, end)
        locations = [depot]
        for trip in bucket:
            locations.append(trip.pickup_location)
            locations.append(trip.dropoff_location)
        unique = []
        seen = set()
        for loc in locations:
            key = (round(loc[0], 6), round(loc[1], 6))
            if key not in seen:
                seen.add(key)
                unique.append((key[0], key[1]))
        matrix = resolve_travel_times(unique, provider)
        period_dir = out / "periods" / label
        period_dir.mkdir(parents=True, exist_ok=True)
        (period_dir / "requests.json").write_text(
            json.dumps([_trip_to_dict(t) for t in bucket], indent=1) + "\n",
            encoding="utf-8")
        (period_dir / "matrix.json").write_text(
            json.dumps({"locations": [list(u) for u in unique],
                        "minutes": matrix.tolist()}, indent=1) + "\n",
            encoding="utf-8")
        try:
            um_raw = evaluate_um_raw(bucket)
        except report_mod.MissingActuals:
            um_raw = None
        periods.append({
            "label": label, "start": start, "end": end,
            "orders": len(bucket), "um_raw": um_raw,
        })

    manifest = {
        "interval": args.interval,
        "depot": list(depot),
        "provider": {"kind": args.provider, "speed_kmh": args.speed},
        "defaults": {
            "vehicles": args.vehicles, "capacity": args.capacity,
            "boarding": args.boarding, "alighting": args.alighting,
            "window": args.window, "threshold": args.threshold,
            "beta": args.beta,
        },
        "cleaning": cleaning.as_dict(),
        "periods": periods,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n",
                                       encoding="utf-8")
    print(f"ingested {cleaning.kept}/{cleaning.total} trips into "
          f"{len(periods)} periods at {out}")
    return EXIT_OK


def _trip_to_dict(trip: TripRequest) -> dict:
    return {
        "id": trip.id,
        "direction": trip.direction.value,
        "pickup": list(trip.pickup_location),
        "dropoff": list(trip.dropoff_location),
        "scheduled_pickup": trip.scheduled_pickup,
        "scheduled_dropoff": trip.scheduled_dropoff,
        "actual_pickup": trip.actual_pickup,
        "actual_dropoff": trip.actual_dropoff,
        "period": list(trip.period) if trip.period else None,
    }


def _trip_from_dict(doc: dict) -> TripRequest:
    return TripRequest(
        id=doc["id"],
        direction=Direction(doc["direction"]),
        pickup_location=tuple(doc["pickup"]),
        dropoff_location=tuple(doc["dropoff"]),
        scheduled_pickup=doc["scheduled_pickup"],
        scheduled_dropoff=doc["scheduled_dropoff"],
        actual_pickup=doc.get("actual_pickup"),
        actual_dropoff=doc.get("actual_dropoff"),
        period=tuple(doc["period"]) if doc.get("period") else None,
    )


# -- solve -------------------------------------------------------------------


def _load_period(from_dir: Path, label: str):
    period_dir = from_dir / "periods" / label
    if not period_dir.exists():
        raise InputError(f"period {label} not found under {from_dir}")
    trips = [_trip_from_dict(doc) for doc in
             json.loads((period_dir / "requests.json").read_text())]
    matrix_doc = json.loads((period_dir / "matrix.json").read_text())
    travel = matrix_travel_time(
        [tuple(loc) for loc in matrix_doc["locations"]], matrix_doc["minutes"])
    return trips, travel


def _instance_for(trips, travel, depot, model_kind, options) -> Instance:
    fleet = Fleet.uniform(options["vehicles"], options["capacity"], tuple(depot))
    config = InstanceConfig(
        travel_time=travel,
        model_kind=model_kind,
        window_length=options["window"],
        boarding=options["boarding"],
        alighting=options["alighting"],
        lateness_threshold=options["threshold"],
        penalty_weight=options["beta"],
    )
    return build_instance(trips, fleet, config)


def solve_result_to_dict(result: SolveResult, stats: dict, period: str,
                         model: str, options: dict) -> dict:
    return {
        "period": period,
        "model": model,
        "status": result.status,
        "objective": result.objective,
        "best_bound": None if result.best_bound in (float("inf"), float("-inf"))
                      else result.best_bound,
        "gap": None if result.gap == float("inf") else result.gap,
        "node_count": result.node_count,
        "wall_time": round(result.wall_time, 3),
        "routes": result.routes,
        "arrival": {str(k): v for k, v in sorted(result.arrival.items())},
        "depot_depart": result.depot_depart,
        "depot_return": result.depot_return,
        "loads": {str(k): v for k, v in sorted(result.loads.items())},
        "load_return": result.load_return,
        "lateness": {str(k): v for k, v in sorted(result.lateness.items())},
        "stats": stats,
        "options": options,
    }


def result_from_dict(doc: dict) -> SolveResult:
    return SolveResult(
        status=doc["status"],
        objective=doc["objective"],
        best_bound=doc["best_bound"] if doc["best_bound"] is not None else float("inf"),
        gap=doc["gap"] if doc["gap"] is not None else float("inf"),
        node_count=doc["node_count"],
        wall_time=doc["wall_time"],
        routes=[list(r) for r in doc["routes"]],
        arrival={int(k): v for k, v in doc["arrival"].items()},
        depot_depart=doc["depot_depart"],
        depot_return=doc["depot_return"],
        loads={int(k): v for k, v in doc["loads"].items()},
        load_return=doc["load_return"],
        lateness={int(k): v for k, v in doc["lateness"].items()},
    )


def _solve_one(from_dir: str, label: str, model: str, options: dict,
               solver_options: dict, results_dir: str, extras: dict) -> dict:
    """Worker for one (period, model) solve; returns the result document."""
    from_path = Path(from_dir)
    manifest = json.loads((from_path / "manifest.json").read_text())
    trips, travel = _load_period(from_path, label)
    kind = ModelKind.OPERATOR if model == "om" else ModelKind.USER
    instance = _instance_for(trips, travel, manifest["depot"], kind, options)
    spec = build_model(instance)
    if extras.get("dump_lp"):
        Path(extras["dump_lp"]).write_text(dump_lp(spec), encoding="utf-8")
    if extras.get("export_mps"):
        export_mps(spec, extras["export_mps"])
    config = SolverConfig(**solver_options)
    result = solve_mip(spec, config, instance)
    if result.status in (STATUS_OPTIMAL, STATUS_FEASIBLE):
        violations = check_solution(instance, result)
        if violations:
            raise RuntimeError(
                f"{label}/{model}: incumbent failed verification: "
                + "; ".join(str(v) for v in violations))
    if extras.get("oracle"):
        reference = enumerate_optimal(instance)
        agree = (reference.status == result.status
                 and (result.objective is None
                      or abs(reference.objective - result.objective) <= 1e-6))
        if not agree:
            raise RuntimeError(
                f"{label}/{model}: oracle disagrees "
                f"({reference.status} {reference.objective} vs "
                f"{result.status} {result.objective})")
    doc = solve_result_to_dict(result, report_model_stats(spec, result),
                               label, model, options)
    if results_dir:
        results_path = Path(results_dir)
        results_path.mkdir(parents=True, exist_ok=True)
        out_file = results_path / f"{label}_{model}.json"
        out_file.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return doc


def cmd_solve(args) -> int:
    from_path = Path(getattr(args, "from"))
    manifest_path = from_path / "manifest.json"
    if not manifest_path.exists():
        raise InputError(f"no manifest at {manifest_path}; run ingest first")
    manifest = json.loads(manifest_path.read_text())
    options = dict(manifest["defaults"])
    for key in ("vehicles", "capacity", "boarding", "alighting",
                "window", "threshold", "beta"):
        value = getattr(args, key)
        if value is not None:
            options[key] = value
    solver_options = {
        "time_limit": args.time_limit,
        "gap_tolerance": args.gap,
    }
    if args.verbose:
        solver_options["log_interval"] = 5.0
        logging.basicConfig(level=logging.INFO, format="%(message)s")

    labels = [p["label"] for p in manifest["periods"]]
    if args.period != "all":
        if args.period not in labels:
            raise InputError(f"unknown period {args.period!r}; have {labels}")
        labels = [args.period]
    models = ["om", "um"] if args.model == "both" else [args.model]
    extras = {"dump_lp": args.dump_lp, "export_mps": args.export_mps,
              "oracle": args.oracle}
    if (args.dump_lp or args.export_mps) and (len(labels) > 1 or len(models) > 1):
        raise InputError("--dump-lp/--export-mps need a single period and model")

    tasks = [(label, model) for label in labels for model in models]
    docs = []
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [
                pool.submit(_solve_one, str(from_path), label, model, options,
                            solver_options, args.results, extras)
                for label, model in tasks
            ]
            docs = [f.result() for f in futures]
    else:
        for label, model in tasks:
            docs.append(_solve_one(str(from_path), label, model, options,
                                   solver_options, args.results, extras))

    worst = EXIT_OK
    for doc in docs:
        if args.output == "csv":
            print(f"{doc['period']},{doc['model']},{doc['status']},"
                  f"{doc['objective']},{doc['best_bound']},{doc['gap']},"
                  f"{doc['node_count']},{doc['wall_time']}")
        else:
            print(json.dumps(doc if args.full_output else {
                k: doc[k] for k in ("period", "model", "status", "objective",
                                    "best_bound", "gap", "node_count",
                                    "wall_time")}, indent=None))
        if doc["status"] == STATUS_INFEASIBLE:
            worst = max(worst, EXIT_INFEASIBLE)
        elif doc["status"] in (STATUS_FEASIBLE, STATUS_UNKNOWN):
            worst = max(worst, EXIT_TIMEOUT)
    return worst


# -- report ------------------------------------------------------------------


def cmd_report(args) -> int:
    from_path = Path(getattr(args, "from"))
    results_path = Path(args.results)
    manifest = json.loads((from_path / "manifest.json").read_text())
    rows = []
    for period in manifest["periods"]:
        label = period["label"]
        om_file = results_path / f"{label}_om.json"
        um_file = results_path / f"{label}_um.json"
        if not om_file.exists() or not um_file.exists():
            raise InputError(f"missing solve results for period {label}")
        om_doc = json.loads(om_file.read_text())
        um_doc = json.loads(um_file.read_text())
        trips, travel = _load_period(from_path, label)
        inst_om = _instance_for(trips, travel, manifest["depot"],
                                ModelKind.OPERATOR, om_doc["options"])
        inst_um = _instance_for(trips, travel, manifest["depot"],
                                ModelKind.USER, um_doc["options"])
        rows.append(cross_evaluate(
            inst_om, result_from_dict(om_doc),
            inst_um, result_from_dict(um_doc),
            um_raw=period.get("um_raw"), period=label,
        ))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_text = report_mod.to_csv(rows)
    json_text = report_mod.to_json(rows)
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "report.json").write_text(json_text + "\n", encoding="utf-8")
    table = report_mod.format_table(rows)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    if args.figures:
        render_report_figures(rows, out_dir)
    print(table, end="")
    return EXIT_OK


# -- matrix ------------------------------------------------------------------


def cmd_matrix(args) -> int:
    mapping = _load_mapping(args.mapping)
    records = read_trip_csv(args.csv, mapping)
    kept, _ = clean(records)
    trips = to_requests(kept)
    locations = [tuple(args.depot)]
    seen = {(round(locations[0][0], 6), round(locations[0][1], 6))}
    for trip in trips:
        for loc in (trip.pickup_location, trip.dropoff_location):
            key = (round(loc[0], 6), round(loc[1], 6))
            if key not in seen:
                seen.add(key)
                locations.append(loc)
    provider = _build_provider(args)
    matrix = resolve_travel_times(locations, provider)
    print(f"resolved {matrix.shape[0]}x{matrix.shape[1]} travel times "
          f"({int(np.count_nonzero(matrix))} nonzero)")
    if args.out:
        Path(args.out).write_text(json.dumps(
            {"locations": [list(loc) for loc in locations],
             "minutes": matrix.tolist()}, indent=1) + "\n", encoding="utf-8")
        print(f"wrote matrix to {args.out}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _add_provider_args(parser):
    parser.add_argument("--provider", choices=["haversine", "matrix", "http"],
                        default="haversine")
    parser.add_argument("--speed", type=float, default=DEFAULTS["speed"],
                        help="haversine driving speed, km/h")
    parser.add_argument("--matrix-file", help="JSON travel-time matrix")
    parser.add_argument("--endpoint", help="distance-matrix HTTP endpoint")
    parser.add_argument("--tt-cache", help="travel-time cache path (JSONL)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paradarp",
        description="Exact MIP optimization of demand-responsive paratransit.")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="CSV trip log -> per-period instances")
    ingest.add_argument("--csv", required=True)
    ingest.add_argument("--mapping", help="JSON header-mapping file")
    ingest.add_argument("--out", required=True, help="output directory")
    ingest.add_argument("--interval", type=int, default=DEFAULTS["interval"])
    ingest.add_argument("--depot", type=float, nargs=2, required=True,
                        metavar=("LAT", "LON"))
    for key in ("vehicles", "capacity"):
        ingest.add_argument(f"--{key}", type=int, default=DEFAULTS[key])
    for key in ("boarding", "alighting", "window", "threshold", "beta"):
        ingest.add_argument(f"--{key}", type=float, default=DEFAULTS[key])
    _add_provider_args(ingest)
    ingest.set_defaults(func=cmd_ingest)

    solve = sub.add_parser("solve", help="solve OM/UM for one or all periods")
    solve.add_argument("--from", required=True, help="ingest output directory")
    solve.add_argument("--period", default="all", help="period label or 'all'")
    solve.add_argument("--model", choices=["om", "um", "both"], default="both")
    solve.add_argument("--results", default="results", help="results directory")
    for key in ("vehicles", "capacity"):
        solve.add_argument(f"--{key}", type=int)
    for key in ("boarding", "alighting", "window", "threshold", "beta"):
        solve.add_argument(f"--{key}", type=float)
    solve.add_argument("--time-limit", type=float, default=3600.0)
    solve.add_argument("--gap", type=float, default=1e-6)
    solve.add_argument("--jobs", type=int, default=1)
    solve.add_argument("--oracle", action="store_true",
                       help="cross-check against exhaustive enumeration (small n)")
    solve.add_argument("--dump-lp", help="write LP-text dump to this path")
    solve.add_argument("--export-mps", help="write fixed-format MPS to this path")
    solve.add_argument("--output", choices=["json", "csv"], default="json")
    solve.add_argument("--full-output", action="store_true",
                       help="print full result documents, not just summaries")
    solve.add_argument("--verbose", action="store_true",
                       help="progress log lines during the solve")
    solve.set_defaults(func=cmd_solve)

    report = sub.add_parser("report", help="cross-evaluation tables and figures")
    report.add_argument("--from", required=True, help="ingest output directory")
    report.add_argument("--results", default="results")
    report.add_argument("--out", default="report")
    report.add_argument("--figures", action=argparse.BooleanOptionalAction,
                        default=True)
    report.set_defaults(func=cmd_report)

    matrix = sub.add_parser("matrix", help="prefetch/cache travel times")
    matrix.add_argument("--csv", required=True)
    matrix.add_argument("--mapping")
    matrix.add_argument("--depot", type=float, nargs=2, required=True,
                        metavar=("LAT", "LON"))
    matrix.add_argument("--out", help="also write the matrix JSON here")
    _add_provider_args(matrix)
    matrix.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, UnparsableFile, InstanceError, ProviderUnavailable,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
