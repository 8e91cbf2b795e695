"""Procedural multi-room layouts.

Rooms come from recursive binary splits of the interior.  Every split wall
gets one doorway, so the rooms form a tree and all free space is connected.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .gridworld import OccupancyGrid


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class LayoutParams:
    width: int = 48
    height: int = 48
    rooms: int = 4
    door_width: int = 4
    min_room: int = 8
    furniture: int = 0
    resolution: float = 0.25

    def validate(self):
        if self.width < 5 or self.height < 5:
            raise LayoutError("map must be at least 5x5 cells")
        if self.rooms < 1:
            raise LayoutError("need at least one room")
        if self.door_width < 1:
            raise LayoutError("door width must be >= 1")
        if self.door_width > self.min_room:
            raise LayoutError("door wider than the smallest room")
        if self.resolution <= 0:
            raise LayoutError("resolution must be positive")
        interior = (self.width - 2) * (self.height - 2)
        if self.rooms * self.min_room**2 > interior:
            raise LayoutError(f"{self.rooms} rooms of side >= {self.min_room} do not fit in {self.width}x{self.height}")


def _connected(free: np.ndarray) -> bool:
    cells = np.argwhere(free)
    if len(cells) == 0:
        return False
    w, h = free.shape
    seen = np.zeros_like(free)
    start = tuple(cells[0])
    seen[start] = True
    q = deque([start])
    count = 0
    while q:
        i, j = q.popleft()
        count += 1
        for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= ni < w and 0 <= nj < h and free[ni, nj] and not seen[ni, nj]:
                seen[ni, nj] = True
                q.append((ni, nj))
    return count == len(cells)


def _try_layout(p: LayoutParams, rng: np.random.Generator) -> np.ndarray | None:
    occ = np.zeros((p.width, p.height), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    # rooms as inclusive cell ranges (x0, x1, y0, y1)
    rooms = [(1, p.width - 2, 1, p.height - 2)]
    doors: list[tuple[int, int]] = []
    while len(rooms) < p.rooms:
        rooms.sort(key=lambda r: (-(r[1] - r[0] + 1) * (r[3] - r[2] + 1), r))
        for idx, (x0, x1, y0, y1) in enumerate(rooms):
            w, h = x1 - x0 + 1, y1 - y0 + 1
            vertical = w > h or (w == h and rng.random() < 0.5)
            lo, hi = (x0, x1) if vertical else (y0, y1)
            cands = list(range(lo + p.min_room, hi - p.min_room + 1))
            # keep new walls away from existing doorways on the room boundary
            def touches_door(c):
                for dx, dy in doors:
                    pos = dx if vertical else dy
                    if abs(pos - c) <= 1:
                        return True
                return False

            cands = [c for c in cands if not touches_door(c)]
            if cands:
                break
        else:
            return None
        x0, x1, y0, y1 = rooms.pop(idx)
        c = int(rng.choice(cands))
        if vertical:
            occ[c, y0:y1 + 1] = True
            start = int(rng.integers(y0, y1 - p.door_width + 2))
            occ[c, start:start + p.door_width] = False
            doors.extend((c, y) for y in range(start, start + p.door_width))
            rooms += [(x0, c - 1, y0, y1), (c + 1, x1, y0, y1)]
        else:
            occ[x0:x1 + 1, c] = True
            start = int(rng.integers(x0, x1 - p.door_width + 2))
            occ[start:start + p.door_width, c] = False
            doors.extend((x, c) for x in range(start, start + p.door_width))
            rooms += [(x0, x1, y0, c - 1), (x0, x1, c + 1, y1)]
    for x0, x1, y0, y1 in sorted(rooms):
        for _ in range(p.furniture):
            fw, fh = rng.integers(1, 4, size=2)
            if x1 - x0 - fw < 4 or y1 - y0 - fh < 4:
                continue
            fx = int(rng.integers(x0 + 2, x1 - fw - 1))
            fy = int(rng.integers(y0 + 2, y1 - fh - 1))
            trial = occ.copy()
            trial[fx:fx + fw, fy:fy + fh] = True
            if _connected(~trial):
                occ = trial
    return occ if _connected(~occ) else None


def generate_layout(params: LayoutParams, seed: int, attempts: int = 50) -> OccupancyGrid:
    """Deterministic multi-room map for ``seed``; raises LayoutError if the parameters cannot be met."""
    params.validate()
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        occ = _try_layout(params, rng)
        if occ is not None:
            return OccupancyGrid(occ, params.resolution)
    raise LayoutError(f"could not place {params.rooms} rooms after {attempts} attempts")


def open_room(width: int, height: int, resolution: float = 0.25) -> OccupancyGrid:
    occ = np.zeros((width, height), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return OccupancyGrid(occ, resolution)
