"""Trip-log ingestion: CSV reading, cleaning, bucketing, travel times.

Raw logs arrive as one row per trip leg with a direction column; the header
layout is configurable through a mapping so other agencies' exports can be
adapted without code changes.  Cleaning drops rows with missing values,
identical origin/destination coordinates, or negative recorded distance,
and reports a count per reason.

Travel times come from pluggable providers: a precomputed matrix file, a
distance-matrix HTTP endpoint with a persistent JSON-lines cache, or a
great-circle fallback at constant speed.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import httpx
import numpy as np

from paradarp.instance import Direction, LatLon, TripRequest, haversine_minutes

MATRIX_KEY_ENV = "PARADARP_MATRIX_KEY"

DEFAULT_MAPPING = {
    "trip_id": "trip_id",
    "date": "date",
    "direction": "direction",
    "scheduled_pickup": "scheduled_pickup_time",
    "scheduled_dropoff": "scheduled_dropoff_time",
    "actual_pickup": "actual_pickup_time",
    "actual_dropoff": "actual_dropoff_time",
    "appointment": "appointment_time",
    "pickup_lat": "pickup_lat",
    "pickup_lon": "pickup_lon",
    "dropoff_lat": "dropoff_lat",
    "dropoff_lon": "dropoff_lon",
    "distance_km": "distance_km",
    "cost": "cost",
    "mobility_aid": "mobility_aid",
}

REQUIRED_FIELDS = (
    "direction", "scheduled_pickup", "scheduled_dropoff",
    "pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon", "distance_km",
)


class UnparsableFile(ValueError):
    """CSV could not be read with the given mapping."""


class ProviderUnavailable(RuntimeError):
    """Travel-time provider failed and the cache cannot answer."""


class NegativeTime(ValueError):
    """Provider returned a negative travel time."""


@dataclass
class RawTripRecord:
    """One row of the trip log; every field may be missing (dirty data)."""

    trip_id: Optional[str] = None
    date: Optional[str] = None
    direction: Optional[str] = None
    scheduled_pickup: Optional[int] = None
    scheduled_dropoff: Optional[int] = None
    actual_pickup: Optional[int] = None
    actual_dropoff: Optional[int] = None
    appointment: Optional[int] = None
    pickup_lat: Optional[float] = None
    pickup_lon: Optional[float] = None
    dropoff_lat: Optional[float] = None
    dropoff_lon: Optional[float] = None
    distance_km: Optional[float] = None
    cost: Optional[float] = None
    mobility_aid: Optional[str] = None


@dataclass
class CleaningReport:
    total: int = 0
    kept: int = 0
    dropped_missing: int = 0
    dropped_same_od: int = 0
    dropped_negative_distance: int = 0

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "dropped_missing": self.dropped_missing,
            "dropped_same_od": self.dropped_same_od,
            "dropped_negative_distance": self.dropped_negative_distance,
        }


def parse_minutes(text: str) -> int:
    """Minutes of day from 'HH:MM', 'HH:MM:SS', or an ISO-8601 timestamp."""
    text = text.strip()
    if "T" in text or " " in text and "-" in text:
        clock = text.replace(" ", "T").split("T", 1)[1]
    else:
        clock = text
    parts = clock.split(":")
    if len(parts) < 2:
        raise ValueError(f"cannot parse time {text!r}")
    hours, minutes = int(parts[0]), int(parts[1])
    if not (0 <= hours < 24 and 0 <= minutes < 60):
        raise ValueError(f"time of day out of range: {text!r}")
    return hours * 60 + minutes


def read_trip_csv(path, mapping: Optional[dict] = None) -> list[RawTripRecord]:
    """Parse a trip-log CSV into raw records using the header mapping."""
    mapping = {**DEFAULT_MAPPING, **(mapping or {})}
    records = []
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise UnparsableFile(f"{path}: no header row")
            for lineno, row in enumerate(reader, start=2):
                records.append(_parse_row(row, mapping, lineno))
    except (OSError, csv.Error) as exc:
        raise UnparsableFile(f"{path}: {exc}") from exc
    return records


def _parse_row(row: dict, mapping: dict, lineno: int) -> RawTripRecord:
    def cell(logical: str) -> Optional[str]:
        column = mapping.get(logical)
        value = row.get(column) if column else None
        if value is None:
            return None
        value = value.strip()
        return value or None

    def as_minutes(logical: str) -> Optional[int]:
        value = cell(logical)
        if value is None:
            return None
        try:
            return parse_minutes(value)
        except ValueError:
            return None

    def as_float(logical: str) -> Optional[float]:
        value = cell(logical)
        if value is None:
            return None
        try:
            return float(value)
        except ValueError:
            return None

    return RawTripRecord(
        trip_id=cell("trip_id") or f"row{lineno}",
        date=cell("date"),
        direction=(cell("direction") or "").lower() or None,
        scheduled_pickup=as_minutes("scheduled_pickup"),
        scheduled_dropoff=as_minutes("scheduled_dropoff"),
        actual_pickup=as_minutes("actual_pickup"),
        actual_dropoff=as_minutes("actual_dropoff"),
        appointment=as_minutes("appointment"),
        pickup_lat=as_float("pickup_lat"),
        pickup_lon=as_float("pickup_lon"),
        dropoff_lat=as_float("dropoff_lat"),
        dropoff_lon=as_float("dropoff_lon"),
        distance_km=as_float("distance_km"),
        cost=as_float("cost"),
        mobility_aid=cell("mobility_aid"),
    )


def clean(records: Sequence[RawTripRecord]) -> tuple[list[RawTripRecord], CleaningReport]:
    """Apply the outlier rules; first matching rule claims the drop count."""
    report = CleaningReport(total=len(records))
    kept = []
    for rec in records:
        if any(getattr(rec, name) is None for name in REQUIRED_FIELDS):
            report.dropped_missing += 1
            continue
        if (round(rec.pickup_lat, 6), round(rec.pickup_lon, 6)) == (
                round(rec.dropoff_lat, 6), round(rec.dropoff_lon, 6)):
            report.dropped_same_od += 1
            continue
        if rec.distance_km < 0:
            report.dropped_negative_distance += 1
            continue
        kept.append(rec)
    report.kept = len(kept)
    return kept, report


def to_requests(records: Sequence[RawTripRecord]) -> list[TripRequest]:
    """Convert cleaned records to trip requests (records must be clean)."""
    requests = []
    for rec in records:
        direction = Direction.INBOUND if rec.direction.startswith("i") else Direction.OUTBOUND
        requests.append(TripRequest(
            id=rec.trip_id,
            direction=direction,
            pickup_location=(rec.pickup_lat, rec.pickup_lon),
            dropoff_location=(rec.dropoff_lat, rec.dropoff_lon),
            scheduled_pickup=rec.scheduled_pickup,
            scheduled_dropoff=rec.scheduled_dropoff,
            actual_pickup=rec.actual_pickup,
            actual_dropoff=rec.actual_dropoff,
        ))
    return requests


def bucket_by_period(
    trips: Sequence[TripRequest], interval_minutes: int
) -> dict[tuple[int, int], list[TripRequest]]:
    """Partition trips into half-open periods keyed by scheduled pickup time."""
    if interval_minutes <= 0 or 1440 % interval_minutes != 0:
        raise ValueError("interval must be a positive divisor of 1440")
    buckets: dict[tuple[int, int], list[TripRequest]] = {}
    for trip in trips:
        start = (trip.scheduled_pickup // interval_minutes) * interval_minutes
        period = (start, start + interval_minutes)
        buckets.setdefault(period, []).append(trip.with_period(*period))
    return dict(sorted(buckets.items()))


# -- travel-time providers ---------------------------------------------------


def _key(a: LatLon, b: LatLon) -> tuple[float, float, float, float]:
    return (round(a[0], 6), round(a[1], 6), round(b[0], 6), round(b[1], 6))


class TravelTimeCache:
    """Append-only JSON-lines store of origin/destination travel minutes."""

    def __init__(self, path):
        self.path = Path(path)
        self.entries: dict[tuple, float] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    key = (*doc["o"], *doc["d"])
                    self.entries[tuple(key)] = float(doc["minutes"])

    def get(self, a: LatLon, b: LatLon) -> Optional[float]:
        return self.entries.get(_key(a, b))

    def put(self, a: LatLon, b: LatLon, minutes: float) -> None:
        key = _key(a, b)
        if key in self.entries:
            return
        self.entries[key] = minutes
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(
                {"o": list(key[:2]), "d": list(key[2:]), "minutes": minutes}) + "\n")


class HaversineProvider:
    """Great-circle fallback at a constant driving speed."""

    def __init__(self, speed_kmh: float = 60.0):
        if speed_kmh <= 0:
            raise ValueError("speed must be positive")
        self.speed_kmh = speed_kmh

    def prefetch(self, locations: Sequence[LatLon]) -> None:
        pass

    def pair(self, a: LatLon, b: LatLon) -> float:
        return haversine_minutes(a, b, self.speed_kmh)


class MatrixFileProvider:
    """Travel times from a JSON file {locations: [[lat, lon]...], minutes: [[..]]}."""

    def __init__(self, path):
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
        self.locations = [tuple(loc) for loc in doc["locations"]]
        self.minutes = doc["minutes"]
        self.index = {(round(la, 6), round(lo, 6)): pos
                      for pos, (la, lo) in enumerate(self.locations)}

    def prefetch(self, locations: Sequence[LatLon]) -> None:
        missing = [loc for loc in locations
                   if (round(loc[0], 6), round(loc[1], 6)) not in self.index]
        if missing:
            raise ProviderUnavailable(f"matrix file lacks locations: {missing[:3]}")

    def pair(self, a: LatLon, b: LatLon) -> float:
        try:
            ia = self.index[(round(a[0], 6), round(a[1], 6))]
            ib = self.index[(round(b[0], 6), round(b[1], 6))]
        except KeyError as exc:
            raise ProviderUnavailable(f"matrix file lacks location {exc}") from exc
        return float(self.minutes[ia][ib])


class HttpMatrixProvider:
    """Distance-matrix HTTP client with a persistent cache.

    Issues GET requests with origins/destinations as pipe-separated
    "lat,lon" lists and reads Google-style duration seconds from the JSON
    response.  Results are cached before being returned, so a pair is never
    fetched twice; cold-cache failures abort rather than substitute.
    """

    def __init__(self, endpoint: str, cache_path, api_key: Optional[str] = None,
                 transport: Optional[httpx.BaseTransport] = None,
                 batch_size: int = 10, timeout: float = 30.0):
        self.endpoint = endpoint
        self.cache = TravelTimeCache(cache_path)
        self.api_key = api_key if api_key is not None else os.environ.get(MATRIX_KEY_ENV, "")
        self.client = httpx.Client(transport=transport, timeout=timeout)
        self.batch_size = batch_size
        self.request_count = 0

    def prefetch(self, locations: Sequence[LatLon]) -> None:
        """Fetch every missing ordered pair among the locations, batched."""
        unique: list[LatLon] = []
        seen = set()
        for loc in locations:
            key = (round(loc[0], 6), round(loc[1], 6))
            if key not in seen:
                seen.add(key)
                unique.append(loc)
        missing_src = [o for o in unique
                       if any(self.cache.get(o, d) is None for d in unique)]
        for block in _chunks(missing_src, self.batch_size):
            for dest_block in _chunks(unique, self.batch_size):
                wanted = [(o, d) for o in block for d in dest_block
                          if self.cache.get(o, d) is None]
                if not wanted:
                    continue
                self._fetch_block(block, dest_block)

    def pair(self, a: LatLon, b: LatLon) -> float:
        if _key(a, b)[:2] == _key(a, b)[2:]:
            return 0.0
        cached = self.cache.get(a, b)
        if cached is not None:
            return cached
        self._fetch_block([a], [b])
        cached = self.cache.get(a, b)
        if cached is None:
            raise ProviderUnavailable(f"no travel time for {a} -> {b}")
        return cached

    def _fetch_block(self, origins: Sequence[LatLon], dests: Sequence[LatLon]) -> None:
        params = {
            "origins": "|".join(f"{o[0]},{o[1]}" for o in origins),
            "destinations": "|".join(f"{d[0]},{d[1]}" for d in dests),
        }
        if self.api_key:
            params["key"] = self.api_key
        try:
            response = self.client.get(self.endpoint, params=params)
            response.raise_for_status()
            doc = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise ProviderUnavailable(f"distance-matrix request failed: {exc}") from exc
        rows = doc.get("rows", [])
        if len(rows) != len(origins):
            raise ProviderUnavailable("distance-matrix response shape mismatch")
        self.request_count += 1
        for o, row in zip(origins, rows):
            elements = row.get("elements", [])
            if len(elements) != len(dests):
                raise ProviderUnavailable("distance-matrix response shape mismatch")
            for d, element in zip(dests, elements):
                if element.get("status", "OK") != "OK":
                    raise ProviderUnavailable(f"element status {element.get('status')}")
                seconds = element["duration"]["value"]
                minutes = float(seconds) / 60.0
                if minutes < 0:
                    raise NegativeTime(f"provider returned {minutes} min for {o} -> {d}")
                self.cache.put(o, d, minutes)


def _chunks(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def resolve_travel_times(locations: Sequence[LatLon], provider) -> np.ndarray:
    """Full travel-time matrix in minutes; diagonal forced to zero."""
    provider.prefetch(locations)
    count = len(locations)
    matrix = np.zeros((count, count))
    for i, a in enumerate(locations):
        for j, b in enumerate(locations):
            if i == j:
                continue
            minutes = provider.pair(a, b)
            if minutes < 0:
                raise NegativeTime(f"provider returned {minutes} for {a} -> {b}")
            matrix[i, j] = minutes
    return matrix
