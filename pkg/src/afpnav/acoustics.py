"""Per-band sound propagation and local acoustic fields.

Two propagation models share one interface:

* ``RoomEnv`` -- exact 2-D image sources in a rectangular room, each field
  value being the peak absolute tap amplitude of the impulse response;
* ``GridEnv`` -- arbitrary occupancy grids, where sound decays as
  ``a_b ** d / max(d, 0.1)`` along the geodesic distance ``d``.

Field arrays are indexed ``[ix, iy]`` like the occupancy grid.  The centre
cell sits on the receiver and the lattice is aligned with the world axes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .eikonal import DistanceField, fmm_solve
from .gridworld import OccupancyGrid

SPEED_OF_SOUND = 343.0
NEAR_FIELD = 0.1
FIELD_SIZE = 9
FIELD_PITCH = 0.5
N_BANDS = 5
DEFAULT_ABSORPTION = (0.92, 0.94, 0.96, 0.97, 0.98)
DEFAULT_REFLECTION = (0.55, 0.65, 0.75, 0.8, 0.85)


@dataclass(frozen=True, eq=False)
class BandSpectrum:
    energies: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float, copy=True)
        if e.ndim != 1 or e.size == 0:
            raise ValueError("spectrum must be a non-empty vector")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("spectrum energies must be finite and non-negative")
        if not np.any(e > 0):
            raise ValueError("spectrum needs at least one positive band")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    def __len__(self):
        return self.energies.size

    def __getitem__(self, i):
        return float(self.energies[i])

    def __eq__(self, other):
        return isinstance(other, BandSpectrum) and np.array_equal(self.energies, other.energies)

    def is_flat(self) -> bool:
        return bool(np.all(self.energies == self.energies[0]))

    def tolist(self) -> list[float]:
        return [float(v) for v in self.energies]


@dataclass(frozen=True)
class ImpulseResponse:
    taps: tuple[tuple[float, float], ...]

    def __post_init__(self):
        taps = tuple(sorted((float(d), float(a)) for d, a in self.taps))
        if any(d < 0 for d, _ in taps):
            raise ValueError("tap delays must be non-negative")
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return len(self.taps)


@dataclass(frozen=True)
class RoomSpec:
    width: float
    height: float
    reflection: tuple[float, ...] = DEFAULT_REFLECTION
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("room dimensions must be positive")
        if any(not (0.0 <= r < 1.0) for r in self.reflection):
            raise ValueError("reflection coefficients must lie in [0, 1)")
        object.__setattr__(self, "reflection", tuple(float(r) for r in self.reflection))

    def contains(self, p) -> bool:
        return 0.0 < p[0] < self.width and 0.0 < p[1] < self.height


def _axis_images(length: float, pos: float, max_order: int):
    """1-D image coordinates with their reflection counts."""
    out = []
    for n in range(-max_order, max_order + 1):
        if abs(2 * n) <= max_order:
            out.append((2 * n * length + pos, abs(2 * n)))
        if abs(2 * n - 1) <= max_order:
            out.append((2 * n * length - pos, abs(2 * n - 1)))
    return out


def _axis_offsets(length: float, s: float, r: float, max_order: int):
    """Image-minus-receiver offsets along one axis.

    Written as ``2nL + (s - r)`` and ``2nL - (s + r)`` so that swapping
    source and receiver maps every offset to an exact negation or to itself.
    """
    out = []
    for n in range(-max_order, max_order + 1):
        if abs(2 * n) <= max_order:
            out.append((2 * n * length + (s - r), abs(2 * n)))
        if abs(2 * n - 1) <= max_order:
            out.append((2 * n * length - (s + r), abs(2 * n - 1)))
    return out


def image_sources(room: RoomSpec, src, max_order: int) -> list[tuple[float, float, int]]:
    """All image positions ``(x, y, reflections)`` with ``reflections <= max_order``."""
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    xs = _axis_images(room.width, float(src[0]), max_order)
    ys = _axis_images(room.height, float(src[1]), max_order)
    return [(x, y, a + b) for (x, a), (y, b) in itertools.product(xs, ys) if a + b <= max_order]


def image_source_rir(
    room: RoomSpec,
    src,
    rcv,
    max_order: int,
    band: int,
    allow_coincident: bool = False,
) -> ImpulseResponse:
    if not (room.contains(src) and room.contains(rcv)):
        raise ValueError("source and receiver must lie strictly inside the room")
    if not allow_coincident and float(src[0]) == float(rcv[0]) and float(src[1]) == float(rcv[1]):
        raise ValueError("coincident source/receiver")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    rho = room.reflection[band]
    taps = []
    xs = _axis_offsets(room.width, float(src[0]), float(rcv[0]), max_order)
    ys = _axis_offsets(room.height, float(src[1]), float(rcv[1]), max_order)
    for (dx, a), (dy, b) in itertools.product(xs, ys):
        k = a + b
        if k > max_order:
            continue
        d = math.hypot(dx, dy)
        taps.append((d / room.c, rho**k / max(d, NEAR_FIELD)))
    return ImpulseResponse(tuple(taps))


def pressure_from_rir(ir: ImpulseResponse) -> float:
    """Sound pressure at a point: the largest absolute tap amplitude."""
    if len(ir.taps) == 0:
        raise ValueError("empty impulse response")
    return max(abs(a) for _, a in ir.taps)


def attenuation(d, absorption: float):
    """Geodesic decay ``a ** d / max(d, 0.1)``; zero where ``d`` is infinite."""
    d = np.asarray(d, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isfinite(d), absorption ** np.where(np.isfinite(d), d, 0.0) / np.maximum(d, NEAR_FIELD), 0.0)
    return out if out.ndim else float(out)


def geodesic_pressure(
    grid: OccupancyGrid,
    source,
    rcv,
    absorption: float,
    distance: DistanceField | None = None,
) -> float:
    if not 0.0 < absorption <= 1.0:
        raise ValueError("absorption must lie in (0, 1]")
    if not grid.is_free_point(source):
        raise ValueError("source lies on an occupied cell")
    if distance is None:
        distance = fmm_solve(grid, [grid.world_to_cell(source)])
    if not grid.contains(rcv):
        return 0.0
    d = distance[grid.world_to_cell(rcv)]
    return float(attenuation(d, absorption))


# ----------------------------------------------------------------------
# Environments
# ----------------------------------------------------------------------


class GridEnv:
    """Occupancy-grid scene with per-band geodesic absorption."""

    def __init__(self, grid: OccupancyGrid, absorption=DEFAULT_ABSORPTION, name: str = ""):
        if any(not 0.0 < a <= 1.0 for a in absorption):
            raise ValueError("absorption must lie in (0, 1]")
        self.grid = grid
        self.absorption = tuple(float(a) for a in absorption)
        self.name = name
        self._distance = lru_cache(maxsize=64)(self._solve)

    def __getstate__(self):
        # the distance cache is rebuilt on the other side
        return {"grid": self.grid, "absorption": self.absorption, "name": self.name}

    def __setstate__(self, state):
        self.__init__(state["grid"], state["absorption"], state["name"])

    @property
    def n_bands(self) -> int:
        return len(self.absorption)

    def _solve(self, cell) -> DistanceField:
        return fmm_solve(self.grid, [cell])

    def distance_from(self, source) -> DistanceField:
        if not self.grid.is_free_point(source):
            raise ValueError("source lies on an occupied cell")
        return self._distance(self.grid.world_to_cell(source))

    def is_open(self, point) -> bool:
        return self.grid.is_free_point(point)

    def pressure(self, source, point, band: int) -> float:
        return geodesic_pressure(self.grid, source, point, self.absorption[band], self.distance_from(source))

    def lattice_pressure(self, source, xs: np.ndarray, ys: np.ndarray, band: int) -> np.ndarray:
        T = self.distance_from(source).values
        g = self.grid
        u = (xs - g.origin[0]) / g.resolution + 0.5
        v = (ys - g.origin[1]) / g.resolution + 0.5
        inside = (u >= 0) & (u < g.width) & (v >= 0) & (v < g.height)
        d = np.full(xs.shape, np.inf)
        iu = np.floor(u[inside]).astype(int)
        iv = np.floor(v[inside]).astype(int)
        d[inside] = T[iu, iv]
        return attenuation(d, self.absorption[band])


class RoomEnv:
    """Empty rectangular room rendered with the image-source method."""

    def __init__(self, room: RoomSpec, max_order: int = 2, name: str = ""):
        self.room = room
        self.max_order = int(max_order)
        self.name = name

    @property
    def n_bands(self) -> int:
        return len(self.room.reflection)

    def is_open(self, point) -> bool:
        return self.room.contains(point)

    def pressure(self, source, point, band: int) -> float:
        if not self.room.contains(point):
            return 0.0
        ir = image_source_rir(self.room, source, point, self.max_order, band, allow_coincident=True)
        return pressure_from_rir(ir)

    def lattice_pressure(self, source, xs: np.ndarray, ys: np.ndarray, band: int) -> np.ndarray:
        out = np.zeros(xs.shape)
        for idx in np.ndindex(xs.shape):
            out[idx] = self.pressure(source, (float(xs[idx]), float(ys[idx])), band)
        return out


# ----------------------------------------------------------------------
# Fields
# ----------------------------------------------------------------------

ALL_BANDS = -1


@dataclass(frozen=True, eq=False)
class AcousticField:
    values: np.ndarray
    center: tuple[float, float]
    band: int = ALL_BANDS
    pitch: float = FIELD_PITCH

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("field must be square")
        if v.shape[0] < 3 or v.shape[0] % 2 == 0:
            raise ValueError("field size must be odd and >= 3")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def center_index(self) -> tuple[int, int]:
        c = self.size // 2
        return (c, c)

    def cell_position(self, cell) -> tuple[float, float]:
        c = self.size // 2
        return (
            self.center[0] + (cell[0] - c) * self.pitch,
            self.center[1] + (cell[1] - c) * self.pitch,
        )

    def with_values(self, values, band=None) -> "AcousticField":
        return AcousticField(values, self.center, self.band if band is None else band, self.pitch)


def field_lattice(center, size: int = FIELD_SIZE, pitch: float = FIELD_PITCH):
    offs = (np.arange(size) - size // 2) * pitch
    xs = center[0] + offs[:, None] + np.zeros((1, size))
    ys = center[1] + np.zeros((size, 1)) + offs[None, :]
    return xs, ys


def compute_field(env, source, receiver, band: int, size: int = FIELD_SIZE, pitch: float = FIELD_PITCH) -> AcousticField:
    """Noise-free pressure on the ``size x size`` lattice centred on ``receiver``."""
    if not env.is_open(receiver):
        raise ValueError("receiver must lie on a free cell")
    xs, ys = field_lattice(receiver, size, pitch)
    vals = env.lattice_pressure(source, xs, ys, band)
    return AcousticField(vals, receiver, band, pitch)


def received_band_energies(env, source, spectrum: BandSpectrum, receiver) -> np.ndarray:
    """Received energy per band, ``s_i * p_i(receiver)**2``.  May be all zero (silence)."""
    if len(spectrum) != env.n_bands:
        raise ValueError("spectrum length does not match the number of bands")
    xs = np.array([[float(receiver[0])]])
    ys = np.array([[float(receiver[1])]])
    p = np.array([env.lattice_pressure(source, xs, ys, b)[0, 0] for b in range(env.n_bands)])
    return spectrum.energies * p**2


# ----------------------------------------------------------------------
# Field dataset records
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FieldRecord:
    scene: str
    source: tuple[float, float]
    receiver: tuple[float, float]
    band: int
    values: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, FieldRecord)
            and (self.scene, self.source, self.receiver, self.band) == (other.scene, other.source, other.receiver, other.band)
            and np.array_equal(self.values, other.values)
        )

    def to_row(self) -> str:
        nums = [self.source[0], self.source[1], self.receiver[0], self.receiver[1]]
        head = [self.scene] + [repr(float(v)) for v in nums] + [str(self.band)]
        return ",".join(head + [repr(float(v)) for v in np.asarray(self.values).ravel()])


def field_csv_header(size: int) -> str:
    return ",".join(["scene", "src_x", "src_y", "rcv_x", "rcv_y", "band"] + [f"v{k:02d}" for k in range(size * size)])


def write_field_records(records) -> str:
    """CSV text for ``records``; values are flattened ix-major (``values[ix, iy]``)."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    size = records[0].values.shape[0]
    if any(r.values.shape != (size, size) for r in records):
        raise ValueError("all records must share one field size")
    return "\n".join([field_csv_header(size)] + [r.to_row() for r in records]) + "\n"


def read_field_records(text: str) -> list[FieldRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty field file")
    header = lines[0].split(",")
    n = len(header) - 6
    size = math.isqrt(n)
    if header[:6] != ["scene", "src_x", "src_y", "rcv_x", "rcv_y", "band"] or size * size != n:
        raise ValueError("malformed field header")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"expected {len(header)} columns, got {len(parts)}")
        vals = np.array([float(v) for v in parts[6:]]).reshape(size, size)
        out.append(FieldRecord(parts[0], (float(parts[1]), float(parts[2])), (float(parts[3]), float(parts[4])), int(parts[5]), vals))
    return out


def downsample_field(values: np.ndarray, size: int) -> np.ndarray:
    """Centre-preserving subsample of an odd square field to ``size`` cells per side."""
    values = np.asarray(values)
    big = values.shape[0]
    if size % 2 == 0 or size > big:
        raise ValueError("target size must be odd and no larger than the field")
    stride = big // size
    c = big // 2
    idx = c + (np.arange(size) - size // 2) * stride
    return values[np.ix_(idx, idx)]
