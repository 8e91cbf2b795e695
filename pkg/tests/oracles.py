"""Independent reference computations used by the test-suite.

Nothing here imports the package's solvers; each oracle is a brute-force or
textbook construction of the quantity being checked.
"""
from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

# 16-connected move set: 4 axial, 4 diagonal, 8 knight moves
MOVES16 = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1),
]
MOVES4 = MOVES16[:4]


def _segment_cells(di, dj):
    """Cells (relative to origin cell) whose interior a straight move crosses."""
    cells = set()
    n = 64
    for k in range(1, n):
        t = k / n
        x, y = t * di, t * dj
        cells.add((math.floor(x + 0.5), math.floor(y + 0.5)))
    # corner-touching diagonal moves must not squeeze between blocked cells
    if abs(di) == 1 and abs(dj) == 1:
        cells.update({(di, 0), (0, dj)})
    cells.discard((0, 0))
    cells.add((di, dj))
    return cells


_SEG = {m: _segment_cells(*m) for m in MOVES16}


def dijkstra(free: np.ndarray, sources, res: float = 1.0, moves=MOVES16) -> np.ndarray:
    w, h = free.shape
    dist = np.full((w, h), np.inf)
    heap = []
    for s in sources:
        if free[s]:
            dist[s] = 0.0
            heap.append((0.0, s))
    heapq.heapify(heap)
    while heap:
        d, (i, j) = heapq.heappop(heap)
        if d > dist[i, j]:
            continue
        for di, dj in moves:
            ni, nj = i + di, j + dj
            if not (0 <= ni < w and 0 <= nj < h) or not free[ni, nj]:
                continue
            ok = True
            for ci, cj in _SEG[(di, dj)]:
                a, b = i + ci, j + cj
                if not (0 <= a < w and 0 <= b < h) or not free[a, b]:
                    ok = False
                    break
            if not ok:
                continue
            nd = d + math.hypot(di, dj)
            if nd < dist[ni, nj]:
                dist[ni, nj] = nd
                heapq.heappush(heap, (nd, (ni, nj)))
    return dist * res


def bfs_hops(free_or_all: np.ndarray, start):
    """Plain 4-neighbour BFS hop counts over every in-bounds cell."""
    w, h = free_or_all.shape
    hops = np.full((w, h), -1, dtype=int)
    hops[start] = 0
    q = deque([start])
    while q:
        i, j = q.popleft()
        for di, dj in MOVES4:
            ni, nj = i + di, j + dj
            if 0 <= ni < w and 0 <= nj < h and hops[ni, nj] < 0:
                hops[ni, nj] = hops[i, j] + 1
                q.append((ni, nj))
    return hops


def mirror_images(width, height, src, max_order):
    """Enumerate image sources by repeatedly mirroring across the four walls.

    Returns {position: reflection count}; positions are rounded to absorb
    floating-point differences between mirror sequences reaching the same image.
    """
    images = {(round(src[0], 9), round(src[1], 9)): 0}
    frontier = [(src[0], src[1])]
    for order in range(1, max_order + 1):
        nxt = []
        for x, y in frontier:
            for mx, my in ((-x, y), (2 * width - x, y), (x, -y), (x, 2 * height - y)):
                key = (round(mx, 9), round(my, 9))
                if key not in images:
                    images[key] = order
                    nxt.append((mx, my))
        frontier = nxt
    return images


def random_block_map(rng: np.random.Generator, w: int, h: int, n_blocks: int, max_size: int = 10) -> np.ndarray:
    """Closed map with random rectangular obstacles, returned as a free mask."""
    occ = np.zeros((w, h), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    for _ in range(n_blocks):
        bw, bh = rng.integers(1, max_size, size=2)
        x, y = rng.integers(1, w - 1), rng.integers(1, h - 1)
        occ[x:x + bw, y:y + bh] = True
    return ~occ


def largest_component(free: np.ndarray) -> np.ndarray:
    w, h = free.shape
    label = np.full((w, h), -1)
    best, best_size, lab = -1, 0, 0
    for s in zip(*np.nonzero(free)):
        if label[s] >= 0:
            continue
        label[s] = lab
        q = deque([s])
        size = 0
        while q:
            i, j = q.popleft()
            size += 1
            for di, dj in MOVES4:
                ni, nj = i + di, j + dj
                if 0 <= ni < w and 0 <= nj < h and free[ni, nj] and label[ni, nj] < 0:
                    label[ni, nj] = lab
                    q.append((ni, nj))
        if size > best_size:
            best, best_size = lab, size
        lab += 1
    return label == best
