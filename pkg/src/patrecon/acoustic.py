"""Wave propagation in a homogeneous medium and the boundary sampling operator.

The initial-value problem ``p_tt = v^2 lap p``, ``p(0) = p0``, ``p_t(0) = 0``
is solved exactly on a periodic domain: each Fourier mode evolves as
``cos(v |k| t)``.  The image is zero-embedded in the centre of a domain
``pad_factor`` times larger so that waves leaving the image do not re-enter
it through the periodic boundary during the recording window.

Spectra use the real-FFT half layout ``(P, P // 2 + 1)`` of the padded grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import InvalidInput, MemoryBudgetExceeded
from .grid import Field, GridSpec
from .sensors import SensorArray, SensorData, TimeAxis

DEFAULT_MEMORY_BUDGET = 2 * 2**30


@lru_cache(maxsize=16)
def angular_frequency(grid: GridSpec) -> np.ndarray:
    """``v |k|`` on the padded real-FFT grid, in rad/s (read-only, cached)."""
    p = grid.padded_n
    dx = grid.pixel_size
    ky = 2 * np.pi * np.fft.fftfreq(p, dx)
    kx = 2 * np.pi * np.fft.rfftfreq(p, dx)
    w = grid.sound_speed * np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)
    w.flags.writeable = False
    return w


def _offset(grid: GridSpec) -> int:
    return (grid.padded_n - grid.n) // 2


def embed(grid: GridSpec, x: np.ndarray) -> np.ndarray:
    """Zero-embed (..., n, n) images into the centre of the padded domain."""
    p, n, o = grid.padded_n, grid.n, _offset(grid)
    out = np.zeros(x.shape[:-2] + (p, p))
    out[..., o:o + n, o:o + n] = x
    return out


def crop(grid: GridSpec, x: np.ndarray) -> np.ndarray:
    n, o = grid.n, _offset(grid)
    return x[..., o:o + n, o:o + n]


def _rfft(grid: GridSpec, x: np.ndarray) -> np.ndarray:
    return scipy.fft.rfft2(x, axes=(-2, -1))


def _irfft(grid: GridSpec, x: np.ndarray) -> np.ndarray:
    p = grid.padded_n
    return scipy.fft.irfft2(x, s=(p, p), axes=(-2, -1))


def _check_field(p0: Field) -> None:
    if not isinstance(p0, Field):
        raise InvalidInput("expected a Field")


def propagate(p0: Field, t: float) -> Field:
    """Pressure at time ``t`` from the initial pressure ``p0`` (zero initial velocity)."""
    _check_field(p0)
    if not np.isfinite(t) or t < 0:
        raise InvalidInput("propagation time must be finite and >= 0; use p(-t) = p(t) for negative times")
    g = p0.grid
    spec = _rfft(g, embed(g, p0.values)) * np.cos(angular_frequency(g) * t)
    return Field(g, crop(g, _irfft(g, spec)))


@dataclass(frozen=True)
class WaveState:
    """Per-mode pressure ``p_hat`` and conjugate velocity ``q_hat = -p_t_hat / (v|k|)``.

    Propagation by ``dt`` rotates each ``(p_hat, q_hat)`` pair by the angle
    ``v |k| dt``, so ``|p_hat|^2 + |q_hat|^2`` is conserved mode by mode.
    """

    grid: GridSpec
    p_hat: np.ndarray
    q_hat: np.ndarray

    @classmethod
    def from_field(cls, p0: Field) -> "WaveState":
        g = p0.grid
        p_hat = _rfft(g, embed(g, p0.values))
        return cls(g, p_hat, np.zeros_like(p_hat))

    def pressure(self) -> Field:
        return Field(self.grid, crop(self.grid, _irfft(self.grid, self.p_hat)))


def _rotation(grid: GridSpec, dt: float):
    theta = angular_frequency(grid) * dt
    return np.cos(theta), np.sin(theta)


def propagate_state(state: WaveState, dt: float) -> WaveState:
    if not np.isfinite(dt) or dt < 0:
        raise InvalidInput("time step must be finite and >= 0")
    c, s = _rotation(state.grid, dt)
    return WaveState(state.grid, c * state.p_hat + s * state.q_hat, c * state.q_hat - s * state.p_hat)


class AcousticOperator:
    """Matrix-free forward map ``K`` and its adjoint for fixed sensors and times.

    ``forward`` steps one spectral state through the time axis, sampling the
    sensors after each rotation; ``adjoint`` accumulates the transposed
    rotations in Horner form.  Both accept a leading batch axis.
    """

    def __init__(self, sensors: SensorArray, times: TimeAxis):
        self.grid = sensors.grid
        self.sensors = sensors
        self.times = times
        o = _offset(self.grid)
        self._rows = sensors.rows + o
        self._cols = sensors.cols + o
        self._cos, self._sin = _rotation(self.grid, times.dt)

    @property
    def shape(self):
        return (len(self.sensors) * self.times.n_t, self.grid.n_pixels)

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        """(..., n, n) images -> (..., N_s, N_t) sensor traces."""
        x = np.asarray(x, dtype=np.float64)
        g = self.grid
        batch = x.shape[:-2]
        out = np.empty(batch + (len(self.sensors), self.times.n_t))
        if len(self.sensors) == 0:
            return out
        p = _rfft(g, embed(g, x))
        q = np.zeros_like(p)
        c, s = self._cos, self._sin
        for j in range(self.times.n_t):
            if j:
                p, q = c * p + s * q, c * q - s * p
            out[..., j] = _irfft(g, p)[..., self._rows, self._cols]
        return out

    def adjoint_array(self, y: np.ndarray) -> np.ndarray:
        """(..., N_s, N_t) traces -> (..., n, n) images."""
        y = np.asarray(y, dtype=np.float64)
        g = self.grid
        batch = y.shape[:-2]
        if len(self.sensors) == 0:
            return np.zeros(batch + (g.n, g.n))
        pn = g.padded_n
        scratch = np.zeros(batch + (pn, pn))
        c, s = self._cos, self._sin
        a = b = None
        for j in range(self.times.n_t - 1, -1, -1):
            scratch[..., self._rows, self._cols] = y[..., j]
            src = _rfft(g, scratch)
            if a is None:
                a, b = src, np.zeros_like(src)
            else:
                a, b = c * a - s * b + src, s * a + c * b
        return crop(g, _irfft(g, a)).copy()

    def forward(self, p0: Field) -> SensorData:
        _check_field(p0)
        if p0.grid.n != self.grid.n:
            raise InvalidInput("field grid does not match the sensor grid")
        return SensorData(self.sensors, self.times, self.forward_array(p0.values))

    def adjoint(self, data: SensorData) -> Field:
        v = data.values
        if v.shape != (len(self.sensors), self.times.n_t):
            raise InvalidInput(f"data shape {v.shape} does not match the operator")
        return Field(self.grid, self.adjoint_array(v))


def forward(p0: Field, sensors: SensorArray, times: TimeAxis) -> SensorData:
    return AcousticOperator(sensors, times).forward(p0)


def adjoint(data: SensorData) -> Field:
    if data.sensors is None:
        raise InvalidInput("adjoint needs sensor positions; attach them with with_sensors()")
    return AcousticOperator(data.sensors, data.times).adjoint(data)


def assemble_dense(grid: GridSpec, sensors: SensorArray, times: TimeAxis,
                   memory_budget: int = DEFAULT_MEMORY_BUDGET, batch: int = 64) -> np.ndarray:
    """Dense ``(N_s * N_t, n^2)`` matrix of ``K``, rows ordered sensor-major."""
    if sensors.grid != grid:
        raise InvalidInput("sensor array belongs to a different grid")
    rows = len(sensors) * times.n_t
    cols = grid.n_pixels
    need = 8 * rows * cols
    if need > memory_budget:
        raise MemoryBudgetExceeded(need, memory_budget, "dense forward matrix")
    mat = np.empty((rows, cols))
    if rows == 0:
        return mat
    op = AcousticOperator(sensors, times)
    n = grid.n
    for start in range(0, cols, batch):
        stop = min(start + batch, cols)
        basis = np.zeros((stop - start, n * n))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        mat[:, start:stop] = op.forward_array(basis.reshape(-1, n, n)).reshape(stop - start, rows).T
    return mat
