"""Occupancy-grid worlds, agent kinematics and depth sensing.

Cells are addressed as ``(ix, iy)`` with ``ix`` growing along world +x and
``iy`` along world +y.  Cell ``(0, 0)`` is centred on ``grid.origin``.  The
ASCII map format lists rows top (max y) first, so loaders flip the row order.
"""
from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from numba import njit

FORWARD_STEP = 0.25
TURN_ANGLE = math.radians(15.0)
TWO_PI = 2.0 * math.pi

DEFAULT_FOV = math.radians(90.0)
DEFAULT_N_RAYS = 64
DEFAULT_MAX_RANGE = 5.0

UNKNOWN = np.int8(-1)
FREE = np.int8(0)
OCCUPIED = np.int8(1)


class Action(enum.Enum):
    MOVE_FORWARD = "MOVE_FORWARD"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    STOP = "STOP"


class OutsideWorldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Closed 2-D world.  ``occupied[ix, iy]`` is True for blocked cells."""

    occupied: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool, copy=True)
        if occ.ndim != 2:
            raise ValueError("occupancy must be a 2-D array")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        w, h = occ.shape
        if w < 3 or h < 3:
            raise ValueError("grid must be at least 3x3")
        if not (occ[0, :].all() and occ[-1, :].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise ValueError("border cells must be occupied (closed world)")
        if _largest_component(~occ) < 2:
            raise ValueError("world needs a connected free region of at least two cells")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.occupied.shape[0]

    @property
    def height(self) -> int:
        return self.occupied.shape[1]

    @property
    def free(self) -> np.ndarray:
        return ~self.occupied

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.occupied, other.occupied)
        )

    def __hash__(self):
        return hash((self.resolution, self.origin, self.occupied.tobytes()))

    def grid_coords(self, x: float, y: float) -> tuple[float, float]:
        """Continuous coordinates in which cell ``i`` spans ``[i, i+1)``."""
        return (
            (x - self.origin[0]) / self.resolution + 0.5,
            (y - self.origin[1]) / self.resolution + 0.5,
        )

    def contains(self, point) -> bool:
        u, v = self.grid_coords(point[0], point[1])
        return 0.0 <= u < self.width and 0.0 <= v < self.height

    def world_to_cell(self, point) -> tuple[int, int]:
        u, v = self.grid_coords(point[0], point[1])
        if not (0.0 <= u < self.width and 0.0 <= v < self.height):
            raise OutsideWorldError(f"point {tuple(point)} is outside world")
        return int(math.floor(u)), int(math.floor(v))

    def cell_to_world(self, cell) -> tuple[float, float]:
        return (
            self.origin[0] + cell[0] * self.resolution,
            self.origin[1] + cell[1] * self.resolution,
        )

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free_cell(self, cell) -> bool:
        return self.in_bounds(cell) and not self.occupied[cell[0], cell[1]]

    def is_free_point(self, point) -> bool:
        if not self.contains(point):
            return False
        return self.is_free_cell(self.world_to_cell(point))

    def free_cells(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(~self.occupied)]

    # -- serialisation -------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Iterable[str], resolution: float, origin=(0.0, 0.0)) -> "OccupancyGrid":
        rows = [r.rstrip("\n") for r in rows]
        if not rows:
            raise ValueError("map has no rows")
        w = len(rows[0])
        if any(len(r) != w for r in rows):
            raise ValueError("map rows have unequal length")
        bad = set("".join(rows)) - {"#", "."}
        if bad:
            raise ValueError(f"unexpected map characters: {sorted(bad)}")
        h = len(rows)
        occ = np.zeros((w, h), dtype=bool)
        for r, line in enumerate(rows):
            iy = h - 1 - r
            occ[:, iy] = np.frombuffer(line.encode(), dtype=np.uint8) == ord("#")
        return cls(occ, resolution, origin)

    def to_rows(self) -> list[str]:
        return [
            "".join("#" if self.occupied[ix, iy] else "." for ix in range(self.width))
            for iy in range(self.height - 1, -1, -1)
        ]

    def to_ascii(self) -> str:
        return f"res {self.resolution!r}\n" + "\n".join(self.to_rows()) + "\n"

    def to_json(self) -> str:
        return json.dumps({"resolution": self.resolution, "rows": self.to_rows()})


def parse_ascii_map(text: str) -> OccupancyGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("res "):
        raise ValueError("ASCII map must start with 'res <meters-per-cell>'")
    res = float(lines[0].split()[1])
    return OccupancyGrid.from_rows(lines[1:], res)


def parse_json_map(text: str) -> OccupancyGrid:
    doc = json.loads(text)
    return OccupancyGrid.from_rows(doc["rows"], float(doc["resolution"]))


def load_map(path) -> OccupancyGrid:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_json_map(text)
    return parse_ascii_map(text)


def _largest_component(free: np.ndarray) -> int:
    seen = np.zeros_like(free, dtype=bool)
    best = 0
    w, h = free.shape
    for start in zip(*np.nonzero(free)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        size = 0
        while queue:
            i, j = queue.popleft()
            size += 1
            for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= ni < w and 0 <= nj < h and free[ni, nj] and not seen[ni, nj]:
                    seen[ni, nj] = True
                    queue.append((ni, nj))
        best = max(best, size)
    return best


# ----------------------------------------------------------------------
# Pose and kinematics
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def wrap_angle(theta: float) -> float:
    """Map an angle to [0, 2*pi)."""
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return theta


def _turn(heading: float, sign: int, turn: float) -> float:
    # Headings on the turn lattice stay exactly on it, so repeated turns never drift.
    k = heading / turn
    k_round = round(k)
    steps = round(TWO_PI / turn)
    if abs(k - k_round) < 1e-9 and abs(steps * turn - TWO_PI) < 1e-12:
        return ((k_round + sign) % steps) * turn
    return wrap_angle(heading + sign * turn)


def apply_action(
    grid: OccupancyGrid,
    pose: Pose,
    action: Action,
    step: float = FORWARD_STEP,
    turn: float = TURN_ANGLE,
) -> Pose:
    if action is Action.TURN_LEFT:
        return Pose(pose.x, pose.y, _turn(pose.heading, +1, turn))
    if action is Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, _turn(pose.heading, -1, turn))
    if action is Action.STOP:
        return pose
    nx = pose.x + step * math.cos(pose.heading)
    ny = pose.y + step * math.sin(pose.heading)
    if not grid.is_free_point((nx, ny)):
        return pose
    u0, v0 = grid.grid_coords(pose.x, pose.y)
    t = _cast(grid.occupied, u0, v0, math.cos(pose.heading), math.sin(pose.heading), step / grid.resolution, True)
    if t < step / grid.resolution:
        return pose
    return Pose(nx, ny, pose.heading)


# ----------------------------------------------------------------------
# Ray casting (grid traversal in cell units)
# ----------------------------------------------------------------------


CORNER_EPS = 1e-9


@njit(cache=True)
def _setup(u0, d, i):
    # per-axis DDA state: step direction, distance to first boundary, distance between boundaries
    if d > 0:
        return 1, (i + 1 - u0) / d, 1.0 / d
    if d < 0:
        return -1, (u0 - i) / -d, -1.0 / d
    return 0, np.inf, np.inf


@njit(cache=True)
def _cast(occ, u0, v0, dx, dy, max_t, graze):
    """Distance (cell units) along (dx, dy) to the first occupied cell, capped at max_t.

    A ray through an exact cell corner moves straight into the diagonal cell.
    With ``graze`` set it is stopped at the corner when either flanking cell
    is occupied, which is the rule used for motion.
    """
    w, h = occ.shape
    i = int(math.floor(u0))
    j = int(math.floor(v0))
    if i < 0 or j < 0 or i >= w or j >= h or occ[i, j]:
        return 0.0
    si, tx, ddx = _setup(u0, dx, i)
    sj, ty, ddy = _setup(v0, dy, j)
    while True:
        if abs(tx - ty) <= CORNER_EPS:
            t = min(tx, ty)
            if t >= max_t:
                return max_t
            if graze:
                fi, fj = i + si, j + sj
                if fi < 0 or fi >= w or occ[fi, j] or fj < 0 or fj >= h or occ[i, fj]:
                    return t
            i += si
            j += sj
            tx += ddx
            ty += ddy
        elif tx < ty:
            t = tx
            i += si
            tx += ddx
        else:
            t = ty
            j += sj
            ty += ddy
        if t >= max_t:
            return max_t
        if i < 0 or j < 0 or i >= w or j >= h or occ[i, j]:
            return t


@njit(cache=True)
def _trace(state, u0, v0, dx, dy, d, hit):
    """Mark cells entered before distance d free; the cell entered at d occupied if hit."""
    w, h = state.shape
    i = int(math.floor(u0))
    j = int(math.floor(v0))
    if i < 0 or j < 0 or i >= w or j >= h:
        return
    state[i, j] = 0
    si, tx, ddx = _setup(u0, dx, i)
    sj, ty, ddy = _setup(v0, dy, j)
    while True:
        if abs(tx - ty) <= CORNER_EPS:
            t = min(tx, ty)
            i += si
            j += sj
            tx += ddx
            ty += ddy
        elif tx < ty:
            t = tx
            i += si
            tx += ddx
        else:
            t = ty
            j += sj
            ty += ddy
        if i < 0 or j < 0 or i >= w or j >= h:
            return
        if t >= d - 1e-9:
            if hit:
                state[i, j] = 1
            return
        state[i, j] = 0


@dataclass(frozen=True)
class DepthScan:
    angles: np.ndarray
    distances: np.ndarray
    max_range: float


def ray_angles(heading: float, fov: float, n_rays: int) -> np.ndarray:
    if n_rays == 1:
        return np.array([heading])
    frac = np.arange(n_rays) / (n_rays - 1) - 0.5
    return heading + fov * frac


def raycast_depth(
    grid: OccupancyGrid,
    pose: Pose,
    fov: float = DEFAULT_FOV,
    n_rays: int = DEFAULT_N_RAYS,
    max_range: float = DEFAULT_MAX_RANGE,
) -> DepthScan:
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if not (0.0 < fov <= TWO_PI + 1e-12):
        raise ValueError("fov must lie in (0, 2*pi]")
    angles = ray_angles(pose.heading, fov, n_rays)
    u0, v0 = grid.grid_coords(pose.x, pose.y)
    max_t = max_range / grid.resolution
    dist = np.empty(n_rays)
    for k, a in enumerate(angles):
        dist[k] = _cast(grid.occupied, u0, v0, math.cos(a), math.sin(a), max_t, False) * grid.resolution
    return DepthScan(angles, dist, float(max_range))


@dataclass
class ObservedMap:
    """What the agent has seen so far: ``state`` holds UNKNOWN / FREE / OCCUPIED."""

    state: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def initial(cls, grid: OccupancyGrid, start: Pose) -> "ObservedMap":
        state = np.full(grid.occupied.shape, UNKNOWN, dtype=np.int8)
        i, j = grid.world_to_cell(start.position)
        state[i, j] = FREE
        return cls(state, grid.resolution, grid.origin)

    def copy(self) -> "ObservedMap":
        return ObservedMap(self.state.copy(), self.resolution, self.origin)

    def known(self) -> np.ndarray:
        return self.state != UNKNOWN

    def navigable(self) -> np.ndarray:
        """Optimistic traversability: unknown cells count as free."""
        return self.state != OCCUPIED

    def grid_coords(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.origin[0]) / self.resolution + 0.5,
            (y - self.origin[1]) / self.resolution + 0.5,
        )


def integrate_observation(observed: ObservedMap, pose: Pose, scan: DepthScan) -> ObservedMap:
    out = observed.copy()
    u0, v0 = out.grid_coords(pose.x, pose.y)
    for a, d in zip(scan.angles, scan.distances):
        hit = d < scan.max_range
        _trace(out.state, u0, v0, math.cos(a), math.sin(a), d / out.resolution, hit)
    return out
