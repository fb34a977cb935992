"""Sensor arrays, time axes and recorded boundary data."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInput
from .grid import GridSpec

GEOMETRIES = ("one_sided", "two_sided", "full_view", "incremental")


def ring_indices(n: int) -> list:
    """Outer pixel ring, counterclockwise from the bottom-left corner.

    Rows grow downwards, so "bottom" is row ``n - 1``.  The walk goes right
    along the bottom edge, up the right edge, left along the top edge and
    down the left edge, ending next to the starting corner.
    """
    if n == 1:
        return [(0, 0)]
    out = [(n - 1, c) for c in range(n)]
    out += [(r, n - 1) for r in range(n - 2, -1, -1)]
    out += [(0, c) for c in range(n - 2, -1, -1)]
    out += [(r, 0) for r in range(1, n - 1)]
    return out


@dataclass(frozen=True)
class SensorArray:
    grid: GridSpec
    pixel_indices: Tuple[Tuple[int, int], ...]
    geometry_tag: str = "full_view"

    def __post_init__(self):
        idx = tuple((int(r), int(c)) for r, c in self.pixel_indices)
        n = self.grid.n
        if self.geometry_tag not in GEOMETRIES:
            raise InvalidInput(f"unknown geometry {self.geometry_tag!r}")
        for r, c in idx:
            if not (0 <= r < n and 0 <= c < n):
                raise InvalidInput(f"sensor ({r}, {c}) lies outside the {n}x{n} grid")
            if r not in (0, n - 1) and c not in (0, n - 1):
                raise InvalidInput(f"sensor ({r}, {c}) is not on the boundary ring")
        if len(set(idx)) != len(idx):
            raise InvalidInput("sensor positions must be distinct")
        object.__setattr__(self, "pixel_indices", idx)

    def __len__(self) -> int:
        return len(self.pixel_indices)

    @property
    def rows(self) -> np.ndarray:
        return np.array([r for r, _ in self.pixel_indices], dtype=np.intp)

    @property
    def cols(self) -> np.ndarray:
        return np.array([c for _, c in self.pixel_indices], dtype=np.intp)

    def flat_indices(self) -> np.ndarray:
        return self.rows * self.grid.n + self.cols


@dataclass(frozen=True)
class TimeAxis:
    n_t: int
    dt: float

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise InvalidInput("time axis needs n_t >= 1")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidInput("time step must be positive")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    @property
    def duration(self) -> float:
        return (self.n_t - 1) * self.dt

    @classmethod
    def covering(cls, grid: GridSpec, n_t: int, crossings: float = 1.0) -> "TimeAxis":
        """``n_t`` samples spanning ``crossings`` diagonal transit times of the domain."""
        t_end = crossings * np.sqrt(2.0) * grid.physical_size / grid.sound_speed
        return cls(n_t, t_end / max(n_t - 1, 1))


@dataclass(frozen=True)
class SensorData:
    """Boundary pressure samples, one row per sensor and one column per time.

    ``sensors`` may be ``None`` for data read back from disk; the PATB layout
    stores only the matrix and the time axis.
    """

    sensors: Optional[SensorArray]
    times: TimeAxis
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[1] != self.times.n_t:
            raise InvalidInput(f"data shape {v.shape} does not match n_t={self.times.n_t}")
        if self.sensors is not None and v.shape[0] != len(self.sensors):
            raise InvalidInput(f"data has {v.shape[0]} rows but {len(self.sensors)} sensors")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("sensor data must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    def with_values(self, values) -> "SensorData":
        return SensorData(self.sensors, self.times, values)

    def with_sensors(self, sensors: SensorArray) -> "SensorData":
        return SensorData(sensors, self.times, self.values)


def _pick(positions: Sequence, count: int) -> list:
    """Equidistant picks along ``positions`` using cell-centred fractions."""
    m = len(positions)
    return [positions[int(np.floor((k + 0.5) * m / count))] for k in range(count)]


def sensor_layout(grid: GridSpec, geometry: str, count: int, total: Optional[int] = None) -> SensorArray:
    """Place ``count`` sensors on the boundary ring.

    one_sided: bottom edge.  two_sided: bottom and left edges, the larger half
    on the bottom.  full_view: equidistant over the ring starting at the
    bottom-left corner.  incremental: first ``count`` entries of the full-view
    ordering with ``total`` sensors (defaults to the whole ring).
    """
    n = grid.n
    ring = ring_indices(n)
    if count < 1:
        raise InvalidInput("sensor count must be >= 1")
    if geometry == "one_sided":
        if count > n:
            raise InvalidInput(f"{count} sensors exceed the {n} pixels of one edge")
        idx = _pick([(n - 1, c) for c in range(n)], count)
    elif geometry == "two_sided":
        if count > 2 * n - 1:
            raise InvalidInput(f"{count} sensors exceed the {2 * n - 1} pixels of two edges")
        bottom = (count + 1) // 2
        left = count - bottom
        idx = _pick([(n - 1, c) for c in range(n)], bottom)
        if left:
            idx += _pick([(r, 0) for r in range(n - 1)], left)
    elif geometry in ("full_view", "incremental"):
        if geometry == "full_view":
            total = count
        elif total is None:
            total = len(ring)
        if total > len(ring) or count > total:
            raise InvalidInput(f"{max(count, total)} sensors exceed the {len(ring)} ring pixels")
        m = len(ring)
        idx = [ring[(k * m) // total] for k in range(count)]
    else:
        raise InvalidInput(f"unknown geometry {geometry!r}")
    return SensorArray(grid, tuple(idx), geometry)
