"""Pixel grids, fields and the Fourier-multiplier primitive.

Frequency convention: along each axis the DFT index ``k`` in ``0..n-1`` maps
to the signed integer frequency ``k`` for ``k <= n/2`` and ``k - n`` otherwise
(``numpy.fft.fftfreq(n) * n``).  Fields are stored row-major with row index
increasing downwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft

from .errors import InvalidInput

IMAG_TOL = 1e-10
SYMMETRY_TOL = 1e-12


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Square periodic pixel grid.

    ``pad_factor`` controls the periodic domain used for wave propagation
    (``pad_factor * n`` pixels per side); it has no effect on smoothing.
    ``dyadic=False`` admits any ``n >= 2`` for purely acoustic work such as
    the conditioning study; wavelet smoothing still requires ``2**m | n``.
    """

    n: int
    physical_size: float = 0.05
    sound_speed: float = 1500.0
    pad_factor: int = 2
    dyadic: bool = True

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidInput(f"grid size n={self.n!r} must be a positive integer")
        if self.dyadic and not is_power_of_two(int(self.n)):
            raise InvalidInput(f"grid size n={self.n} must be a power of two")
        if not self.dyadic and self.n < 2:
            raise InvalidInput("grid size must be at least 2")
        if not (self.physical_size > 0 and np.isfinite(self.physical_size)):
            raise InvalidInput("physical_size must be positive and finite")
        if not (self.sound_speed > 0 and np.isfinite(self.sound_speed)):
            raise InvalidInput("sound_speed must be positive and finite")
        if int(self.pad_factor) != self.pad_factor or self.pad_factor < 1:
            raise InvalidInput("pad_factor must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "pad_factor", int(self.pad_factor))

    @property
    def pixel_size(self) -> float:
        return self.physical_size / self.n

    @property
    def padded_n(self) -> int:
        return self.pad_factor * self.n

    @property
    def n_pixels(self) -> int:
        return self.n * self.n

    def coordinates(self) -> np.ndarray:
        """Pixel-centre coordinates (metres) along one axis."""
        return (np.arange(self.n) + 0.5) * self.pixel_size

    def with_n(self, n: int) -> "GridSpec":
        return GridSpec(n, self.physical_size, self.sound_speed, self.pad_factor,
                        self.dyadic or is_power_of_two(n))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Field:
    grid: GridSpec
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise InvalidInput("field values must be real")
        if v.shape != (self.grid.n, self.grid.n):
            raise InvalidInput(
                f"field shape {v.shape} does not match grid ({self.grid.n}, {self.grid.n})"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInput("field values must be finite")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros((grid.n, grid.n)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "Field":
        return Field(self.grid, a * self.values)

    __rmul__ = __mul__


def signed_frequencies(n: int) -> np.ndarray:
    """Integer frequencies in DFT order: 0, 1, ..., n/2, -n/2+1, ..., -1."""
    return np.fft.fftfreq(n, d=1.0 / n)


def negate_frequency_index(a: np.ndarray) -> np.ndarray:
    """Return ``b`` with ``b[k1, k2] = a[-k1 mod n, -k2 mod n]``."""
    return np.roll(a[::-1, ::-1], 1, axis=(0, 1))


@dataclass(frozen=True)
class SpectralMultiplier:
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v) or v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInput("multiplier must be a real square array")
        scale = max(float(np.max(np.abs(v))), 1.0)
        if np.max(np.abs(v - negate_frequency_index(v))) > SYMMETRY_TOL * scale:
            raise InvalidInput("multiplier is not even under frequency negation")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]


def spectral_multiply(f: Field, mult: SpectralMultiplier) -> Field:
    """Apply ``ifft2(mult * fft2(f))`` and return the real part.

    The imaginary residue is checked before being dropped; a large residue
    means the multiplier is not Hermitian-compatible.
    """
    if mult.n != f.grid.n:
        raise InvalidInput(f"multiplier size {mult.n} does not match field size {f.grid.n}")
    out = scipy.fft.ifft2(mult.values * scipy.fft.fft2(f.values))
    scale = max(float(np.max(np.abs(out.real))),
                float(np.max(np.abs(f.values))) * float(np.max(np.abs(mult.values))))
    resid = float(np.max(np.abs(out.imag)))
    if resid > IMAG_TOL * scale:
        raise InvalidInput(f"imaginary residue {resid:.3e} after spectral multiply")
    return Field(f.grid, out.real)
