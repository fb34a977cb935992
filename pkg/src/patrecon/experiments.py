"""Phantoms, data simulation, error measures and the numerical studies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates

from .acoustic import DEFAULT_MEMORY_BUDGET, AcousticOperator, assemble_dense
from .errors import InvalidInput
from .grid import Field, GridSpec
from .sensors import SensorArray, SensorData, TimeAxis, sensor_layout
from .smoothing import SmoothingConfig
from .solver import ReconConfig, ReconResult, reconstruct
from .wavelet import WaveletSpec

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- phantoms
# Shape coordinates are fractions of the domain side: x to the right, y downwards.

@dataclass(frozen=True)
class Circle:
    center: Tuple[float, float]
    radius: float
    value: float = 1.0

    def bounds(self):
        (x, y), r = self.center, self.radius
        return x - r, y - r, x + r, y + r

    def contains(self, x, y):
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 <= self.radius**2


@dataclass(frozen=True)
class Rectangle:
    corner: Tuple[float, float]
    width: float
    height: float
    value: float = 1.0

    def bounds(self):
        x, y = self.corner
        return x, y, x + self.width, y + self.height

    def contains(self, x, y):
        x0, y0, x1, y1 = self.bounds()
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


Shape = Union[Circle, Rectangle]


@dataclass(frozen=True)
class Phantom:
    shapes: Tuple[Shape, ...] = ()
    background: float = 0.0


PAPER_LIKE = Phantom((
    Circle((0.32, 0.34), 0.11, 0.8),
    Circle((0.66, 0.27), 0.07, 1.0),
    Circle((0.58, 0.66), 0.13, 0.5),
    Rectangle((0.14, 0.58), 0.26, 0.035, 1.0),
    Rectangle((0.78, 0.42), 0.035, 0.36, 0.7),
    Circle((0.26, 0.80), 0.05, 0.9),
    Rectangle((0.45, 0.47), 0.12, 0.02, 0.6),
))

PRESETS = {"paper-like": PAPER_LIKE, "empty": Phantom()}


def make_phantom(grid: GridSpec, phantom: Phantom) -> Field:
    """Rasterize by pixel-centre membership; later shapes overwrite earlier ones."""
    for shape in phantom.shapes:
        x0, y0, x1, y1 = shape.bounds()
        if x0 < 0 or y0 < 0 or x1 > 1 or y1 > 1 or min(x1 - x0, y1 - y0) < 0:
            raise InvalidInput(f"shape {shape} does not lie inside the unit domain")
    c = (np.arange(grid.n) + 0.5) / grid.n
    y, x = np.meshgrid(c, c, indexing="ij")
    img = np.full((grid.n, grid.n), float(phantom.background))
    for shape in phantom.shapes:
        img[shape.contains(x, y)] = shape.value
    return Field(grid, img)


# ---------------------------------------------------------------- data

@dataclass(frozen=True)
class NoiseModel:
    std_fraction: float = 0.0
    seed: int = 0
    kind: str = "gaussian_white"

    def __post_init__(self):
        if not self.std_fraction >= 0:
            raise InvalidInput("noise level must be >= 0")
        if self.kind != "gaussian_white":
            raise InvalidInput(f"unsupported noise model {self.kind!r}")


def simulate_data(p0: Field, sensors: SensorArray, times: TimeAxis,
                  noise: NoiseModel = NoiseModel()) -> SensorData:
    """Noisy boundary data; the noise std is ``std_fraction * max|clean signal|``."""
    clean = AcousticOperator(sensors, times).forward(p0)
    if noise.std_fraction == 0:
        return clean
    rng = np.random.default_rng(noise.seed)
    sigma = noise.std_fraction * float(np.max(np.abs(clean.values)))
    return clean.with_values(clean.values + rng.normal(0.0, sigma, clean.values.shape))


def resample_time(data: SensorData, target: TimeAxis) -> SensorData:
    """Per-sensor linear interpolation onto ``target``; extrapolation is refused."""
    src = data.times.times
    dst = target.times
    if dst[-1] > src[-1] * (1 + 1e-12) + 1e-300:
        raise InvalidInput(
            f"target axis ends at {dst[-1]:.6g} s, beyond the recorded {src[-1]:.6g} s"
        )
    if target == data.times:
        return SensorData(data.sensors, target, data.values)
    vals = np.empty((data.n_sensors, target.n_t))
    for i, row in enumerate(data.values):
        vals[i] = np.interp(dst, src, row)
    return SensorData(data.sensors, target, vals)


def resample_field(f: Field, grid: GridSpec) -> Field:
    """Bilinear interpolation between pixel-centre lattices (edge values held)."""
    if f.grid.n == grid.n:
        return Field(grid, f.values)
    u = (np.arange(grid.n) + 0.5) / grid.n * f.grid.n - 0.5
    rr, cc = np.meshgrid(u, u, indexing="ij")
    vals = map_coordinates(f.values, [rr, cc], order=1, mode="nearest")
    return Field(grid, vals)


def relative_error(estimate: Field, truth: Field) -> float:
    """``||estimate - truth|| / ||truth||`` after bilinear resampling onto the truth grid."""
    t = truth.norm()
    if t == 0:
        raise InvalidInput("relative error is undefined for a zero reference")
    est = resample_field(estimate, truth.grid)
    return float(np.linalg.norm(est.values - truth.values) / t)


def cross_section(f: Field, row: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0 <= row < f.grid.n:
        raise InvalidInput(f"row {row} outside 0..{f.grid.n - 1}")
    return f.grid.coordinates(), f.values[row].copy()


# ---------------------------------------------------------------- conditioning

def condition_number(mat: np.ndarray) -> float:
    """Largest over smallest nonzero singular value, rank cut at ``max(s) * max(shape) * eps``."""
    if mat.size == 0:
        return float("nan")
    sv = np.linalg.svd(mat, compute_uv=False)
    cut = sv[0] * max(mat.shape) * np.finfo(float).eps
    nonzero = sv[sv > cut]
    return float(sv[0] / nonzero[-1]) if nonzero.size else float("inf")


def condition_study(grid: GridSpec, max_count: int, times: TimeAxis,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET) -> List[Tuple[int, float]]:
    """Condition number of ``K`` as sensors are added one by one from the bottom-left corner.

    The incremental layouts are nested, so ``K`` is assembled once for all
    ``max_count`` sensors and sliced by rows (sensor-major ordering).
    """
    sensors = sensor_layout(grid, "incremental", max_count, total=max_count)
    mat = assemble_dense(grid, sensors, times, memory_budget)
    nt = times.n_t
    curve = []
    for k in range(1, max_count + 1):
        curve.append((k, condition_number(mat[: k * nt])))
        log.debug("condition study: %d sensors -> %.3e", k, curve[-1][1])
    return curve


# ---------------------------------------------------------------- reconstruction study

GEOMETRY_ALIASES = {"one": "one_sided", "two": "two_sided", "full": "full_view",
                    "one_sided": "one_sided", "two_sided": "two_sided", "full_view": "full_view",
                    "incremental": "incremental"}


@dataclass
class StudySetup:
    """Desk-scale version of the limited-view reconstruction experiment."""

    sim_n: int = 256
    recon_n: int = 128
    physical_size: float = 0.05
    sound_speed: float = 1500.0
    pad_factor: int = 2
    sensors: int = 80
    noise: float = 0.05
    seed: int = 1
    alpha: float = 1e-5
    iters: int = 15
    backend: str = "wavelet"
    depth: int = 4
    recon_dt_fraction: float = 0.5
    sim_dt_fraction: float = 0.25
    crossings: float = 1.0
    geometries: Sequence[str] = ("one_sided", "two_sided")
    smoothness: Sequence[float] = (0.0, 1.5, 3.0)
    phantom: Phantom = dc_field(default_factory=lambda: PAPER_LIKE)

    def sim_grid(self) -> GridSpec:
        return GridSpec(self.sim_n, self.physical_size, self.sound_speed, self.pad_factor)

    def recon_grid(self) -> GridSpec:
        return GridSpec(self.recon_n, self.physical_size, self.sound_speed, self.pad_factor)

    def time_axis(self, grid: GridSpec, dt_fraction: float) -> TimeAxis:
        """Covers ``crossings`` diagonal transits with ``dt = dt_fraction * dx / v``."""
        dt = dt_fraction * grid.pixel_size / grid.sound_speed
        t_end = self.crossings * np.sqrt(2.0) * grid.physical_size / grid.sound_speed
        return TimeAxis(int(np.ceil(t_end / dt)) + 1, dt)


def smoothing_for(s: float, backend: str, depth: int = 4) -> SmoothingConfig:
    if backend == "wavelet":
        return SmoothingConfig(s, "wavelet", WaveletSpec.default_for(s, depth))
    return SmoothingConfig(s, backend)


@dataclass
class StudyRun:
    geometry: str
    s: float
    error: float
    result: ReconResult


def run_study(setup: StudySetup) -> Tuple[Field, List[StudyRun]]:
    """Simulate on the fine grid, resample in time, reconstruct on the coarse grid."""
    if setup.sim_n < 2 * setup.recon_n:
        log.warning("simulation grid is not at least twice the reconstruction grid")
    sim_grid, rec_grid = setup.sim_grid(), setup.recon_grid()
    truth = make_phantom(sim_grid, setup.phantom)
    sim_times = setup.time_axis(sim_grid, setup.sim_dt_fraction)
    rec_times = setup.time_axis(rec_grid, setup.recon_dt_fraction)
    rec_times = TimeAxis(min(rec_times.n_t, int(sim_times.duration / rec_times.dt) + 1), rec_times.dt)
    runs = []
    for geometry in setup.geometries:
        geometry = GEOMETRY_ALIASES[geometry]
        sim_sensors = sensor_layout(sim_grid, geometry, setup.sensors)
        data = simulate_data(truth, sim_sensors, sim_times, NoiseModel(setup.noise, setup.seed))
        data = resample_time(data, rec_times).with_sensors(sensor_layout(rec_grid, geometry, setup.sensors))
        for s in setup.smoothness:
            cfg = ReconConfig(smoothing_for(s, setup.backend, setup.depth), setup.alpha, setup.iters)
            res = reconstruct(data, cfg)
            err = relative_error(res.estimate, truth)
            log.info("study %s s=%g: RE=%.4f (%d evaluations)", geometry, s, err, res.evaluations)
            runs.append(StudyRun(geometry, s, err, res))
    return truth, runs


def error_table(runs: Sequence[StudyRun]) -> Dict[Tuple[str, float], float]:
    return {(r.geometry, r.s): r.error for r in runs}
