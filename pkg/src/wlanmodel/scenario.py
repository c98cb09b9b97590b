"""Deployment geometries: walls and AP/user placements on a quantized grid.

All coordinates are meters. Node positions are snapped to multiples of the
scenario grid step, and generators are pure functions of their parameters
and the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_GRID_STEP_M = 0.5
DEFAULT_WALL_ATTENUATION_DB = 5.0
DEFAULT_ANTENNAS = 4
DEFAULT_POWER_DB = 90.0

Point = tuple[float, float]


class ScenarioClass(str, Enum):
    CONFERENCE_HALL = "conference_hall"
    OPEN_FLOOR = "open_floor"
    WALLED_OFFICE = "walled_office"
    STADIUM = "stadium"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Sector:
    """Binary radiation sector: full gain inside, zero outside."""

    orientation_deg: float
    width_deg: float

    def __post_init__(self):
        if not 0.0 < self.width_deg <= 360.0:
            raise ValueError(f"sector width must be in (0, 360], got {self.width_deg}")


@dataclass(frozen=True)
class WallSegment:
    p1: Point
    p2: Point
    attenuation_db: float = DEFAULT_WALL_ATTENUATION_DB

    def __post_init__(self):
        if tuple(self.p1) == tuple(self.p2):
            raise ValueError("wall endpoints must be distinct")
        if self.attenuation_db < 0:
            raise ValueError("wall attenuation must be nonnegative")


@dataclass(frozen=True)
class ApNode:
    id: int
    position: Point
    antennas: int = DEFAULT_ANTENNAS
    power_db: float = DEFAULT_POWER_DB  # dB above unit noise PSD
    sector: Sector | None = None

    def __post_init__(self):
        if self.antennas < 1:
            raise ValueError("AP needs at least one antenna")

    @property
    def power_linear(self) -> float:
        return 10.0 ** (self.power_db / 10.0)


@dataclass(frozen=True)
class UtNode:
    id: int
    position: Point


@dataclass(frozen=True)
class Scenario:
    width_m: float
    height_m: float
    grid_step_m: float = DEFAULT_GRID_STEP_M
    walls: tuple[WallSegment, ...] = ()
    aps: tuple[ApNode, ...] = ()
    users: tuple[UtNode, ...] = ()
    scenario_class: ScenarioClass = ScenarioClass.CUSTOM

    def __post_init__(self):
        if self.width_m <= 0 or self.height_m <= 0 or self.grid_step_m <= 0:
            raise ValueError("region dimensions and grid step must be positive")
        if not self.aps or not self.users:
            raise ValueError("scenario needs at least one AP and one user")
        for kind, nodes in (("ap", self.aps), ("user", self.users)):
            ids = [n.id for n in nodes]
            if ids != list(range(len(nodes))):
                raise ValueError(f"{kind} ids must be dense from 0, got {ids}")
            for n in nodes:
                self._check_position(kind, n.id, n.position)

    def _check_position(self, kind: str, node_id: int, pos: Point):
        x, y = pos
        if not (0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m):
            raise ValueError(f"{kind} {node_id} at {pos} lies outside the region")
        for v in (x, y):
            if abs(v / self.grid_step_m - round(v / self.grid_step_m)) > 1e-9:
                raise ValueError(
                    f"{kind} {node_id} coordinate {v} is off the "
                    f"{self.grid_step_m} m grid"
                )

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def ap_positions(self) -> np.ndarray:
        return np.array([ap.position for ap in self.aps], dtype=float)

    def user_positions(self) -> np.ndarray:
        return np.array([ut.position for ut in self.users], dtype=float)

    # -- serialization (JSON tree; meters and dB) --------------------------

    def to_dict(self) -> dict:
        return {
            "width_m": self.width_m,
            "height_m": self.height_m,
            "grid_step_m": self.grid_step_m,
            "scenario_class": self.scenario_class.value,
            "walls": [
                {"p1": list(w.p1), "p2": list(w.p2), "attenuation_db": w.attenuation_db}
                for w in self.walls
            ],
            "aps": [
                {
                    "id": ap.id,
                    "position": list(ap.position),
                    "antennas": ap.antennas,
                    "power_db": ap.power_db,
                    "sector": (
                        {
                            "orientation_deg": ap.sector.orientation_deg,
                            "width_deg": ap.sector.width_deg,
                        }
                        if ap.sector
                        else None
                    ),
                }
                for ap in self.aps
            ],
            "users": [{"id": ut.id, "position": list(ut.position)} for ut in self.users],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        walls = tuple(
            WallSegment(tuple(w["p1"]), tuple(w["p2"]), w["attenuation_db"])
            for w in data.get("walls", [])
        )
        aps = tuple(
            ApNode(
                id=a["id"],
                position=tuple(a["position"]),
                antennas=a.get("antennas", DEFAULT_ANTENNAS),
                power_db=a.get("power_db", DEFAULT_POWER_DB),
                sector=Sector(**a["sector"]) if a.get("sector") else None,
            )
            for a in data["aps"]
        )
        users = tuple(UtNode(id=u["id"], position=tuple(u["position"])) for u in data["users"])
        return cls(
            width_m=data["width_m"],
            height_m=data["height_m"],
            grid_step_m=data.get("grid_step_m", DEFAULT_GRID_STEP_M),
            walls=walls,
            aps=aps,
            users=users,
            scenario_class=ScenarioClass(data.get("scenario_class", "custom")),
        )

    def save(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def snap(value: float, step: float) -> float:
    """Snap a coordinate to the nearest grid multiple."""
    return round(value / step) * step


def _clip_snap(value: float, step: float, upper: float) -> float:
    return min(max(snap(value, step), 0.0), snap(upper, step))


def _uniform_grid_points(rng: np.random.Generator, n: int, width: float, height: float,
                         step: float) -> list[Point]:
    nx = int(round(width / step))
    ny = int(round(height / step))
    xi = rng.integers(0, nx + 1, size=n)
    yi = rng.integers(0, ny + 1, size=n)
    return [(float(x * step), float(y * step)) for x, y in zip(xi, yi)]


def _make_aps(positions: list[Point], antennas: int, power_db: float) -> tuple[ApNode, ...]:
    return tuple(
        ApNode(id=i, position=p, antennas=antennas, power_db=power_db)
        for i, p in enumerate(positions)
    )


def _make_users(positions: list[Point]) -> tuple[UtNode, ...]:
    return tuple(UtNode(id=i, position=p) for i, p in enumerate(positions))


def _user_rng(seed: int) -> np.random.Generator:
    # Users get their own substream so user placements are identical across
    # runs that only change the AP count (sweep comparability).
    return np.random.default_rng([seed, 1])


def _lattice_positions(n: int, width: float, height: float, step: float) -> list[Point]:
    # Near-square lattice: rows = round(sqrt(n)), columns = ceil(n / rows),
    # APs at cell centers of the rows x cols partition, row-major, first n.
    rows = max(1, round(math.sqrt(n)))
    cols = math.ceil(n / rows)
    pts = []
    for r in range(rows):
        for c in range(cols):
            if len(pts) == n:
                break
            x = _clip_snap((c + 0.5) * width / cols, step, width)
            y = _clip_snap((r + 0.5) * height / rows, step, height)
            pts.append((x, y))
    return pts


def build_conference_hall(n_aps: int, n_users: int, seed: int, *,
                          antennas: int = DEFAULT_ANTENNAS,
                          power_db: float = DEFAULT_POWER_DB,
                          grid_step_m: float = DEFAULT_GRID_STEP_M) -> Scenario:
    """20 m x 20 m open hall: APs on a near-square lattice, users uniform."""
    if n_aps < 1 or n_users < 1:
        raise ValueError("need at least one AP and one user")
    width = height = 20.0
    ap_pos = _lattice_positions(n_aps, width, height, grid_step_m)
    user_pos = _uniform_grid_points(_user_rng(seed), n_users, width, height, grid_step_m)
    return Scenario(
        width_m=width, height_m=height, grid_step_m=grid_step_m,
        aps=_make_aps(ap_pos, antennas, power_db),
        users=_make_users(user_pos),
        scenario_class=ScenarioClass.CONFERENCE_HALL,
    )


def _two_row_positions(n: int, width: float, y_rows: tuple[float, float],
                       step: float) -> list[Point]:
    # Equally spaced in two rows; odd counts put the extra AP in the bottom row.
    n_bottom = math.ceil(n / 2)
    n_top = n - n_bottom
    pts = []
    for count, y in ((n_bottom, y_rows[0]), (n_top, y_rows[1])):
        for j in range(count):
            x = _clip_snap((j + 0.5) * width / count, step, width)
            pts.append((x, snap(y, step)))
    return pts


def build_open_floor(n_aps: int, n_users: int, seed: int, *,
                     antennas: int = DEFAULT_ANTENNAS,
                     power_db: float = DEFAULT_POWER_DB,
                     grid_step_m: float = DEFAULT_GRID_STEP_M) -> Scenario:
    """160 m x 23 m open office floor: APs equally spaced in two rows."""
    if n_aps < 1 or n_users < 1:
        raise ValueError("need at least one AP and one user")
    width, height = 160.0, 23.0
    ap_pos = _two_row_positions(n_aps, width, (height / 4, 3 * height / 4), grid_step_m)
    user_pos = _uniform_grid_points(_user_rng(seed), n_users, width, height, grid_step_m)
    return Scenario(
        width_m=width, height_m=height, grid_step_m=grid_step_m,
        aps=_make_aps(ap_pos, antennas, power_db),
        users=_make_users(user_pos),
        scenario_class=ScenarioClass.OPEN_FLOOR,
    )


def build_walled_office(n_rooms: int, n_aps: int, n_users: int, seed: int, *,
                        antennas: int = DEFAULT_ANTENNAS,
                        power_db: float = DEFAULT_POWER_DB,
                        wall_attenuation_db: float = DEFAULT_WALL_ATTENUATION_DB,
                        grid_step_m: float = DEFAULT_GRID_STEP_M) -> Scenario:
    """160 m office floor: two rows of rooms (10 m deep) around a 3 m corridor.

    Walls emitted: one full-length wall on each room-row/corridor boundary,
    plus the vertical partitions between adjacent rooms within each row.
    """
    if n_rooms < 2 or n_rooms % 2 != 0:
        raise ValueError("n_rooms must be even and >= 2")
    if n_aps < 1 or n_users < 1:
        raise ValueError("need at least one AP and one user")
    width, room_depth, corridor = 160.0, 10.0, 3.0
    height = 2 * room_depth + corridor
    rooms_per_row = n_rooms // 2
    room_len = width / rooms_per_row

    walls = [
        WallSegment((0.0, room_depth), (width, room_depth), wall_attenuation_db),
        WallSegment((0.0, room_depth + corridor), (width, room_depth + corridor),
                    wall_attenuation_db),
    ]
    for k in range(1, rooms_per_row):
        x = snap(k * room_len, grid_step_m)
        walls.append(WallSegment((x, 0.0), (x, room_depth), wall_attenuation_db))
        walls.append(WallSegment((x, room_depth + corridor), (x, height),
                                 wall_attenuation_db))

    y_rows = (room_depth / 2, room_depth + corridor + room_depth / 2)
    ap_pos = _two_row_positions(n_aps, width, y_rows, grid_step_m)
    user_pos = _uniform_grid_points(_user_rng(seed), n_users, width, height, grid_step_m)
    return Scenario(
        width_m=width, height_m=height, grid_step_m=grid_step_m,
        walls=tuple(walls),
        aps=_make_aps(ap_pos, antennas, power_db),
        users=_make_users(user_pos),
        scenario_class=ScenarioClass.WALLED_OFFICE,
    )


# Stadium layout constants: seating annulus for users, AP rings inside it,
# a fixed four APs per ring with alternate rings rotated by half a slot.
STADIUM_SIDE_M = 200.0
STADIUM_SEAT_INNER_M = 30.0
STADIUM_SEAT_OUTER_M = 95.0
STADIUM_AP_INNER_M = 35.0
STADIUM_AP_OUTER_M = 90.0
STADIUM_APS_PER_RING = 4


def build_stadium(n_aps: int, n_users: int, seed: int, *,
                  antennas: int = DEFAULT_ANTENNAS,
                  power_db: float = DEFAULT_POWER_DB,
                  grid_step_m: float = DEFAULT_GRID_STEP_M) -> Scenario:
    """200 m x 200 m stadium bowl: APs on concentric rings, users in the stands."""
    if n_aps < 1 or n_users < 1:
        raise ValueError("need at least one AP and one user")
    side = STADIUM_SIDE_M
    cx = cy = side / 2
    n_rings = math.ceil(n_aps / STADIUM_APS_PER_RING)
    ap_pos = []
    for ring in range(n_rings):
        r = STADIUM_AP_INNER_M + (ring + 0.5) * (
            STADIUM_AP_OUTER_M - STADIUM_AP_INNER_M) / n_rings
        offset = 0.5 * (ring % 2)
        for slot in range(STADIUM_APS_PER_RING):
            if len(ap_pos) == n_aps:
                break
            theta = 2 * math.pi * (slot + offset) / STADIUM_APS_PER_RING
            x = _clip_snap(cx + r * math.cos(theta), grid_step_m, side)
            y = _clip_snap(cy + r * math.sin(theta), grid_step_m, side)
            ap_pos.append((x, y))

    rng = _user_rng(seed)
    user_pos: list[Point] = []
    while len(user_pos) < n_users:
        batch = _uniform_grid_points(rng, 2 * (n_users - len(user_pos)) + 8, side, side,
                                     grid_step_m)
        for x, y in batch:
            d = math.hypot(x - cx, y - cy)
            if STADIUM_SEAT_INNER_M <= d <= STADIUM_SEAT_OUTER_M:
                user_pos.append((x, y))
                if len(user_pos) == n_users:
                    break
    return Scenario(
        width_m=side, height_m=side, grid_step_m=grid_step_m,
        aps=_make_aps(ap_pos, antennas, power_db),
        users=_make_users(user_pos),
        scenario_class=ScenarioClass.STADIUM,
    )


GENERATORS = {
    "conference_hall": build_conference_hall,
    "open_floor": build_open_floor,
    "walled_office": build_walled_office,
    "stadium": build_stadium,
}


def _orient(a: Point, b: Point, c: Point) -> float:
    """Signed area of triangle abc (exact for grid-snapped coordinates)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_properly_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    # Strict crossing only: endpoint touches and collinear overlaps are not
    # crossings, which encodes both tie rules at once.
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and \
           ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0


def wall_crossings(scenario: Scenario, p1: Point, p2: Point) -> float:
    """Total wall attenuation in dB along the open segment (p1, p2)."""
    total = 0.0
    for wall in scenario.walls:
        if _segments_properly_cross(p1, p2, wall.p1, wall.p2):
            total += wall.attenuation_db
    return total
