"""Fast marching geodesic distances on occupancy grids.

The solver is first-order with unit speed.  Each tentative value is the
smaller of two upwind updates: the axial 4-neighbour stencil and the same
stencil rotated 45 degrees onto the diagonal neighbours (spacing sqrt(2)).
Cells adjacent to a source start from their exact Euclidean distance.  Both
choices keep the error against true geodesic length under 10% near sources
and obstacle corners, where the axial stencil alone reaches about 20%.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .gridworld import ObservedMap, OccupancyGrid

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DistanceField:
    values: np.ndarray
    sources: tuple[tuple[int, int], ...]
    resolution: float

    @property
    def shape(self):
        return self.values.shape

    def __getitem__(self, cell) -> float:
        return float(self.values[cell[0], cell[1]])


def passable_mask(env) -> tuple[np.ndarray, float]:
    """Return (traversable mask, resolution) for a grid, an observed map or a raw mask."""
    if isinstance(env, OccupancyGrid):
        return ~env.occupied, env.resolution
    if isinstance(env, ObservedMap):
        # unknown space is planned through optimistically
        return env.navigable(), env.resolution
    if isinstance(env, tuple) and len(env) == 2:
        return np.asarray(env[0], dtype=bool), float(env[1])
    raise TypeError(f"cannot plan on {type(env).__name__}")


@njit(cache=True)
def _candidate(T, accepted, passable, i, j):
    """Upwind update for cell (i, j): the better of the axial and diagonal stencils."""
    w, h = T.shape
    a = np.inf
    if i > 0 and accepted[i - 1, j]:
        a = T[i - 1, j]
    if i < w - 1 and accepted[i + 1, j] and T[i + 1, j] < a:
        a = T[i + 1, j]
    b = np.inf
    if j > 0 and accepted[i, j - 1]:
        b = T[i, j - 1]
    if j < h - 1 and accepted[i, j + 1] and T[i, j + 1] < b:
        b = T[i, j + 1]
    if abs(a - b) >= 1.0:
        best = min(a, b) + 1.0
    else:
        best = 0.5 * (a + b + math.sqrt(2.0 - (a - b) * (a - b)))
    # rotated stencil along the two diagonals, spacing sqrt(2); no corner cutting
    a = np.inf
    b = np.inf
    for s in (-1, 1):
        ii = i + s
        if ii < 0 or ii >= w or not passable[ii, j]:
            continue
        for t in (-1, 1):
            jj = j + t
            if jj < 0 or jj >= h or not accepted[ii, jj] or not passable[i, jj]:
                continue
            if s == t:
                if T[ii, jj] < a:
                    a = T[ii, jj]
            elif T[ii, jj] < b:
                b = T[ii, jj]
    if abs(a - b) >= SQRT2:
        diag = min(a, b) + SQRT2
    else:
        diag = 0.5 * (a + b + math.sqrt(4.0 - (a - b) * (a - b)))
    return min(best, diag)


@njit(cache=True)
def _solve(passable, src_i, src_j):
    w, h = passable.shape
    T = np.full((w, h), np.inf)
    accepted = np.zeros((w, h), dtype=np.bool_)
    heap = [(0.0, 0, 0)]
    heap.pop()
    for k in range(src_i.shape[0]):
        i, j = src_i[k], src_j[k]
        T[i, j] = 0.0
        heapq.heappush(heap, (0.0, i, j))
    # exact distances for the ring around each source
    for k in range(src_i.shape[0]):
        i, j = src_i[k], src_j[k]
        for di in range(-1, 2):
            for dj in range(-1, 2):
                if di == 0 and dj == 0:
                    continue
                ni, nj = i + di, j + dj
                if ni < 0 or nj < 0 or ni >= w or nj >= h or not passable[ni, nj]:
                    continue
                if di != 0 and dj != 0:
                    if not (passable[i + di, j] and passable[i, j + dj]):
                        continue
                    d = SQRT2
                else:
                    d = 1.0
                if d < T[ni, nj]:
                    T[ni, nj] = d
                    heapq.heappush(heap, (d, ni, nj))
    while len(heap) > 0:
        t, i, j = heapq.heappop(heap)
        if accepted[i, j] or t > T[i, j]:
            continue
        accepted[i, j] = True
        for di in range(-1, 2):
            for dj in range(-1, 2):
                ni, nj = i + di, j + dj
                if ni < 0 or nj < 0 or ni >= w or nj >= h:
                    continue
                if accepted[ni, nj] or not passable[ni, nj]:
                    continue
                cand = _candidate(T, accepted, passable, ni, nj)
                if cand < T[ni, nj]:
                    T[ni, nj] = cand
                    heapq.heappush(heap, (cand, ni, nj))
    return T


def fmm_solve(env, sources) -> DistanceField:
    """Geodesic distance (metres) from the source cells to every cell.

    ``env`` may be an OccupancyGrid, an ObservedMap (unknown cells are
    treated as free) or a ``(mask, resolution)`` pair.  Occupied source cells
    are dropped; if none remain a ValueError is raised.
    """
    passable, res = passable_mask(env)
    srcs = sorted({(int(c[0]), int(c[1])) for c in sources})
    w, h = passable.shape
    srcs = [c for c in srcs if 0 <= c[0] < w and 0 <= c[1] < h and passable[c]]
    if not srcs:
        raise ValueError("no navigable source")
    si = np.array([c[0] for c in srcs], dtype=np.int64)
    sj = np.array([c[1] for c in srcs], dtype=np.int64)
    T = _solve(np.ascontiguousarray(passable), si, sj) * res
    T.setflags(write=False)
    return DistanceField(T, tuple(srcs), res)


def nearest_navigable(env, target) -> tuple[int, int]:
    """Closest navigable cell to ``target`` in 4-neighbour BFS hops.

    Ties within a BFS layer go to the lexicographically smallest cell.
    """
    passable, _ = passable_mask(env)
    w, h = passable.shape
    target = (int(target[0]), int(target[1]))
    if not passable.any():
        raise ValueError("map has no navigable cell")
    if not (0 <= target[0] < w and 0 <= target[1] < h):
        raise ValueError(f"target {target} outside map")
    if passable[target]:
        return target
    seen = np.zeros_like(passable)
    seen[target] = True
    layer = [target]
    while layer:
        nxt = []
        for i, j in layer:
            for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= ni < w and 0 <= nj < h and not seen[ni, nj]:
                    seen[ni, nj] = True
                    nxt.append((ni, nj))
        hits = [c for c in nxt if passable[c]]
        if hits:
            return min(hits)
        layer = nxt
    raise ValueError("map has no navigable cell")


_NEIGHBOURS8 = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]


def descend_step(field: DistanceField, current) -> tuple[int, int]:
    """Lowest-valued 8-neighbour of ``current``; ``current`` itself at a local minimum.

    A diagonal neighbour only counts when both cells flanking the corner are
    reachable, so a point agent never has to squeeze past a wall corner.
    """
    T = field.values
    w, h = T.shape
    ci, cj = int(current[0]), int(current[1])
    best_val = T[ci, cj]
    best = (ci, cj)
    for di, dj in _NEIGHBOURS8:
        ni, nj = ci + di, cj + dj
        if not (0 <= ni < w and 0 <= nj < h):
            continue
        if di and dj and not (np.isfinite(T[ci + di, cj]) and np.isfinite(T[ci, cj + dj])):
            continue
        v = T[ni, nj]
        if v < best_val or (v == best_val and best != (ci, cj) and (ni, nj) < best):
            best_val = v
            best = (ni, nj)
    return best


def descent_path(field: DistanceField, start, max_steps: int | None = None) -> list[tuple[int, int]]:
    """Follow descend_step from ``start`` until it stops moving."""
    if max_steps is None:
        max_steps = field.values.size
    path = [(int(start[0]), int(start[1]))]
    for _ in range(max_steps):
        nxt = descend_step(field, path[-1])
        if nxt == path[-1]:
            break
        path.append(nxt)
    return path


def field_to_csv(field: DistanceField) -> str:
    """Rows top (max y) first, matching the ASCII map layout; blank for unreachable."""
    T = field.values
    lines = []
    for iy in range(T.shape[1] - 1, -1, -1):
        lines.append(",".join(repr(float(v)) if math.isfinite(v) else "" for v in T[:, iy]))
    return "\n".join(lines) + "\n"
