"""Adjoint Sobolev embedding E_s^*, Matern covariances and the Bessel-potential filter.

All smoothing operators work in pixel units (grid spacing 1).  The Fourier
weight of E_s^* is ``(1 + 4 pi^2 |xi|^2)^(-s)`` with ``xi`` in cycles per
pixel, equivalently ``(1 + |k|^2)^(-s)`` in angular wavenumber; the spatial
kernels below are written in the same (angular) units, so that
``E_s^* u = G_{2s} * u`` holds with ``r`` measured in pixels.

Backends:

``fourier``
    Exact periodic Fourier multiplier.
``wavelet``
    Diagonal weighting of periodized wavelet coefficients.  The
    approximation block and the coarsest detail level carry weight 1, detail
    level ``i`` carries ``2**(-2 s (m - i))``.  Equivalent to, not equal to,
    the Fourier operator.
``dense_kernel``
    The kernel sampled on the pixel lattice and stored as an ``n^2 x n^2``
    matrix (non-periodic).  Memory grows like ``n^4`` and is guarded by a
    budget; this is the baseline the other two backends avoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional

import numpy as np

from .acoustic import DEFAULT_MEMORY_BUDGET
from .bessel import macdonald_bessel
from .errors import ConstraintViolation, InvalidInput, MemoryBudgetExceeded
from .grid import Field, SpectralMultiplier, signed_frequencies, spectral_multiply
from .wavelet import WaveletSpec, coeff_layout, dwt2_array, idwt2_array

BACKENDS = ("dense_kernel", "fourier", "wavelet")
DYADIC_TOL = 1e-12


@dataclass(frozen=True)
class MaternParams:
    nu: float
    rho: float
    dim: int = 2

    def __post_init__(self):
        if not (self.nu > 0 and self.rho > 0):
            raise InvalidInput("Matern parameters nu and rho must be positive")
        if self.dim not in (1, 2):
            raise InvalidInput("Matern dimension must be 1 or 2")

    @property
    def smoothness(self) -> float:
        """Sobolev index ``nu + d/2`` of the matching embedding."""
        return self.nu + self.dim / 2.0

    @property
    def scale(self) -> float:
        """``sqrt(2 nu) / rho``: the argument scaling of the kernel."""
        return math.sqrt(2.0 * self.nu) / self.rho

    def constant(self) -> float:
        """``2^d pi^(d/2) G(nu + d/2) / G(nu)`` relating k_{nu,rho} to G_{2nu+d}."""
        d = self.dim
        return 2.0**d * math.pi ** (d / 2.0) * math.gamma(self.nu + d / 2.0) / math.gamma(self.nu)

    def dyadic_level(self) -> int:
        """Integer ``m' >= 0`` with ``sqrt(2 nu)/rho = 2^(-m')``, or raise."""
        level = -math.log2(self.scale)
        m = round(level)
        if m < 0 or abs(self.scale - 2.0 ** (-m)) > DYADIC_TOL * self.scale:
            raise ConstraintViolation(
                f"wavelet Matern needs sqrt(2 nu)/rho = 2^(-m) for an integer m >= 0; "
                f"got sqrt(2*{self.nu})/{self.rho} = {self.scale:.15g}"
            )
        return int(m)


@dataclass(frozen=True)
class SmoothingConfig:
    s: float = 1.5
    backend: str = "fourier"
    wavelet_spec: Optional[WaveletSpec] = None
    memory_budget: int = dc_field(default=DEFAULT_MEMORY_BUDGET, compare=False)

    def __post_init__(self):
        if not (self.s >= 0) or not math.isfinite(self.s):
            raise InvalidInput("smoothness index s must be finite and >= 0")
        if self.backend not in BACKENDS:
            raise InvalidInput(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend == "wavelet":
            if self.wavelet_spec is None:
                object.__setattr__(self, "wavelet_spec", WaveletSpec.default_for(self.s))
            check_regularity(self.wavelet_spec, self.s)

    @classmethod
    def from_matern(cls, params: MaternParams, backend: str = "fourier",
                    wavelet_spec: Optional[WaveletSpec] = None) -> "SmoothingConfig":
        return cls(params.smoothness, backend, wavelet_spec)


def check_regularity(spec: WaveletSpec, s: float) -> None:
    if s > 0 and not spec.regularity > s:
        raise ConstraintViolation(
            f"wavelet {spec.name} has Sobolev regularity r={spec.regularity} but the "
            f"smoothing needs r > s={s}; choose a higher-order Daubechies wavelet"
        )


# ---------------------------------------------------------------- kernels

def matern_kernel(params: MaternParams, r: float) -> float:
    r = float(r)
    if r < 0:
        raise InvalidInput("distance must be >= 0")
    if r == 0.0:
        return 1.0
    nu = params.nu
    z = params.scale * r
    if z > 745.0:
        return 0.0
    return 2.0 ** (1.0 - nu) / math.gamma(nu) * z**nu * macdonald_bessel(nu, z)


def spatial_filter_G(s: float, dim: int, r: float) -> float:
    """Bessel-potential kernel with angular Fourier transform ``(1 + |k|^2)^(-s/2)``."""
    if not s > 0:
        raise InvalidInput("filter index s must be > 0")
    if not r > 0:
        raise InvalidInput("G_s is evaluated directly only for r > 0")
    d = dim
    if r > 745.0:
        return 0.0
    c = 2.0 ** (1.0 - (d + s) / 2.0) / (math.pi ** (d / 2.0) * math.gamma(s / 2.0))
    return c * macdonald_bessel((d - s) / 2.0, r) * r ** ((s - d) / 2.0)


def spatial_filter_G_origin(s: float, dim: int) -> float:
    """Limit ``G_s(0) = G((s-d)/2) / ((4 pi)^(d/2) G(s/2))``, finite only for ``s > d``."""
    if not s > dim:
        raise InvalidInput(f"G_s is singular at the origin unless s > d (s={s}, d={dim})")
    return math.gamma((s - dim) / 2.0) / ((4.0 * math.pi) ** (dim / 2.0) * math.gamma(s / 2.0))


# ---------------------------------------------------------------- Fourier backend

def sobolev_weight(xi_sq, s: float):
    """``(1 + 4 pi^2 |xi|^2)^(-s)`` for squared frequency in cycles per pixel."""
    return (1.0 + 4.0 * math.pi**2 * np.asarray(xi_sq, dtype=np.float64)) ** (-s)


@lru_cache(maxsize=32)
def _xi_sq(n: int) -> np.ndarray:
    f = signed_frequencies(n) / n
    out = f[:, None] ** 2 + f[None, :] ** 2
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def sobolev_multiplier(grid_n: int, s: float) -> SpectralMultiplier:
    if not s >= 0:
        raise InvalidInput("s must be >= 0")
    return SpectralMultiplier(sobolev_weight(_xi_sq(grid_n), s))


def embed_adjoint_fourier(field: Field, s: float) -> Field:
    return spectral_multiply(field, sobolev_multiplier(field.grid.n, float(s)))


def sobolev_norm(field: Field, s: float) -> float:
    """``|| (E_s^*)^(-1/2) x ||_2`` evaluated with the Fourier weight."""
    if not s >= 0:
        raise InvalidInput("s must be >= 0")
    mult = SpectralMultiplier(sobolev_weight(_xi_sq(field.grid.n), -s / 2.0))
    return spectral_multiply(field, mult).norm()


# ---------------------------------------------------------------- wavelet backend

@lru_cache(maxsize=32)
def wavelet_weights(spec: WaveletSpec, n: int, s: float) -> np.ndarray:
    """Diagonal of E_s^* in the wavelet basis, in coefficient-vector order.

    Detail level ``i`` gets ``2**(-2 s (m - i))``; the approximation block
    and the coarsest details get 1.
    """
    m = spec.depth
    w = np.empty(n * n)
    for b in coeff_layout(spec, n):
        j = 0 if b.name.startswith("cA") else m - b.level
        w[b.offset:b.offset + b.length] = 2.0 ** (-2.0 * s * j)
    w.flags.writeable = False
    return w


def embed_adjoint_wavelet(field: Field, s: float, spec: WaveletSpec) -> Field:
    check_regularity(spec, s)
    n = field.grid.n
    spec.validate(n)
    c = dwt2_array(field.values, spec)
    c *= wavelet_weights(spec, n, float(s))
    return Field(field.grid, idwt2_array(c, spec, n))


# ---------------------------------------------------------------- dense backend

def _lattice_matrix(n: int, kernel_at, budget: int, what: str) -> np.ndarray:
    need = 8 * n**4
    if need > budget:
        raise MemoryBudgetExceeded(need, budget, what)
    dy, dx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    table = kernel_at(np.hypot(dy, dx))
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    return table[diff[:, None, :, None], diff[None, :, None, :]].reshape(n * n, n * n)


@lru_cache(maxsize=4)
def _dense_embed_matrix(n: int, s: float, budget: int) -> np.ndarray:
    g0 = spatial_filter_G_origin(2.0 * s, 2)

    def kernel(r):
        out = np.empty_like(r)
        for i, v in np.ndenumerate(r):
            out[i] = g0 if v == 0 else spatial_filter_G(2.0 * s, 2, v)
        return out

    mat = _lattice_matrix(n, kernel, budget, "dense E_s^* kernel matrix")
    mat.flags.writeable = False
    return mat


def embed_adjoint_dense(field: Field, s: float, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> Field:
    """E_s^* as an explicit ``n^2 x n^2`` matrix of sampled ``G_{2s}``; needs ``s > 1``."""
    if not 2.0 * s > 2:
        raise ConstraintViolation(
            f"the dense kernel backend needs s > d/2 = 1 (G_2s singular at 0); got s={s}"
        )
    n = field.grid.n
    mat = _dense_embed_matrix(n, float(s), int(memory_budget))
    return Field(field.grid, (mat @ field.values.ravel()).reshape(n, n))


def dense_matern_matrix(n: int, params: MaternParams,
                        memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    def kernel(r):
        out = np.empty_like(r)
        for i, v in np.ndenumerate(r):
            out[i] = matern_kernel(params, v)
        return out

    return _lattice_matrix(n, kernel, memory_budget, "dense Matern covariance matrix")


# ---------------------------------------------------------------- dispatch

def embed_adjoint(field: Field, cfg: SmoothingConfig) -> Field:
    if cfg.s == 0:
        return field
    if cfg.backend == "fourier":
        return embed_adjoint_fourier(field, cfg.s)
    if cfg.backend == "wavelet":
        return embed_adjoint_wavelet(field, cfg.s, cfg.wavelet_spec)
    return embed_adjoint_dense(field, cfg.s, cfg.memory_budget)


def matern_apply(field: Field, params: MaternParams, backend: str = "wavelet",
                 spec: Optional[WaveletSpec] = None,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET) -> Field:
    """Convolution with the Matern kernel ``k_{nu,rho}`` in pixel units."""
    if params.dim != 2:
        raise InvalidInput("fields are two-dimensional; use dim=2")
    n = field.grid.n
    if backend == "dense_kernel":
        mat = dense_matern_matrix(n, params, memory_budget)
        return Field(field.grid, (mat @ field.values.ravel()).reshape(n, n))
    if backend == "fourier":
        a = params.scale
        xi_sq = _xi_sq(n) / a**2
        w = params.constant() * a ** (-params.dim) * sobolev_weight(xi_sq, params.smoothness)
        return spectral_multiply(field, SpectralMultiplier(w))
    if backend == "wavelet":
        shift = params.dyadic_level()
        s = params.smoothness
        base = spec or WaveletSpec.default_for(s)
        check_regularity(base, s)
        spec = WaveletSpec(base.order, base.depth + shift)
        spec.validate(n)
        c = dwt2_array(field.values, spec) * wavelet_weights(spec, n, s)
        scale = params.constant() * 2.0 ** (shift * params.dim)
        return Field(field.grid, scale * idwt2_array(c, spec, n))
    raise InvalidInput(f"backend must be one of {BACKENDS}, got {backend!r}")
