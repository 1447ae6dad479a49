"""Deterministic synthetic trip-log generator for a one-day case study.

Produces 58 trips across 11 hourly periods (5 am to 4 pm) around a rural
depot, with 32 inbound / 26 outbound legs, just over half of all trips
between 9 am and 1 pm, and roughly two thirds of trips shorter than 20 km.
Scheduled dropoffs are consistent with great-circle driving at the default
speed plus boarding time, so the generated day admits feasible operator
schedules; actual timestamps carry realistic lateness so the raw-data
benchmark is meaningfully worse than the optimized schedules.
"""

from __future__ import annotations

import csv
import math
import random
from pathlib import Path

from paradarp.instance import haversine_km

DEPOT = (34.9746, -80.0664)  # Wadesboro, NC area
SPEED_KMH = 60.0
BOARDING_MIN = 7

# (lat, lon, sampling weight); the last two clusters produce the long trips
HOME_CLUSTERS = [
    (34.968, -80.077, 0.34),   # Wadesboro
    (34.966, -79.984, 0.12),   # Lilesville
    (34.863, -80.010, 0.14),   # Morven
    (35.007, -80.201, 0.12),   # Polkton
    (35.104, -80.109, 0.08),   # Ansonville
    (34.995, -80.266, 0.06),   # Peachland
    (34.985, -80.549, 0.09),   # Monroe
    (34.939, -79.774, 0.05),   # Rockingham
]

FACILITIES = [
    (34.9604, -80.0560, 0.46),  # hospital
    (34.9780, -80.0900, 0.32),  # dialysis center
    (34.9950, -80.5200, 0.12),  # Monroe clinic
    (34.9320, -79.7800, 0.10),  # Rockingham clinic
]

# orders per hourly period starting 5 am .. 3 pm; 9 am - 1 pm holds 32/58
PERIOD_ORDERS = [1, 4, 5, 6, 8, 8, 8, 8, 6, 3, 1]
PERIOD_INBOUND = [1, 4, 5, 5, 6, 5, 4, 2, 0, 0, 0]
FIRST_HOUR = 5

DEFAULT_SEED = 20190103


def _pick(rng: random.Random, clusters):
    roll = rng.random()
    acc = 0.0
    for lat, lon, weight in clusters:
        acc += weight
        if roll <= acc:
            return lat, lon
    return clusters[-1][0], clusters[-1][1]


def _jitter(rng: random.Random, point, spread=0.008):
    return (round(point[0] + rng.uniform(-spread, spread), 6),
            round(point[1] + rng.uniform(-spread, spread), 6))


def _clock(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def _deviation(rng: random.Random) -> int:
    """Raw-data lateness in minutes: mostly moderate, occasionally severe."""
    roll = rng.random()
    if roll < 0.30:
        return rng.randint(2, 12)
    if roll < 0.80:
        return rng.randint(13, 45)
    return rng.randint(46, 95)


def generate_synthetic_day(seed: int = DEFAULT_SEED) -> list[dict]:
    """Rows for the synthetic trip-log CSV, in schedule order."""
    rng = random.Random(seed)
    rows = []
    trip_no = 0
    for slot, total in enumerate(PERIOD_ORDERS):
        hour = FIRST_HOUR + slot
        inbound_left = PERIOD_INBOUND[slot]
        for pos in range(total):
            trip_no += 1
            inbound = inbound_left > 0
            if inbound:
                inbound_left -= 1
            home = _jitter(rng, _pick(rng, HOME_CLUSTERS))
            facility = _jitter(rng, _pick(rng, FACILITIES), spread=0.003)
            origin, dest = (home, facility) if inbound else (facility, home)

            base = int(60 * (pos + 0.5) / total)
            minute = min(59, max(0, base + rng.randint(-4, 4)))
            pickup = hour * 60 + minute
            travel = haversine_km(origin, dest) / SPEED_KMH * 60.0
            dropoff = pickup + math.ceil(travel) + BOARDING_MIN + rng.randint(2, 9)

            late_pick = _deviation(rng)
            late_drop = late_pick + rng.randint(-6, 14)
            actual_pickup = max(0, pickup + late_pick)
            actual_dropoff = max(actual_pickup + 1, dropoff + late_drop)

            distance = round(haversine_km(origin, dest), 2)
            rows.append({
                "trip_id": f"T{trip_no:03d}",
                "date": "2019-01-03",
                "direction": "inbound" if inbound else "outbound",
                "scheduled_pickup_time": _clock(pickup),
                "scheduled_dropoff_time": _clock(dropoff),
                "actual_pickup_time": _clock(min(actual_pickup, 1439)),
                "actual_dropoff_time": _clock(min(actual_dropoff, 1439)),
                "appointment_time": _clock(min(1439, dropoff + 10 if inbound else pickup - 10)),
                "pickup_lat": f"{origin[0]:.6f}",
                "pickup_lon": f"{origin[1]:.6f}",
                "dropoff_lat": f"{dest[0]:.6f}",
                "dropoff_lon": f"{dest[1]:.6f}",
                "distance_km": f"{distance:.2f}",
                "cost": f"{2.5 + 1.1 * distance:.2f}",
                "mobility_aid": "yes" if rng.random() < 0.2 else "no",
            })
    return rows


def write_synthetic_day(path, seed: int = DEFAULT_SEED) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = generate_synthetic_day(seed)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path
