"""Kernel and smoother identity suite behind the ``filters-check`` command."""

from __future__ import annotations

import math
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .bessel import macdonald_bessel
from .grid import Field, GridSpec
from .smoothing import (MaternParams, embed_adjoint_fourier, embed_adjoint_wavelet,
                        matern_apply, matern_kernel, spatial_filter_G)
from .wavelet import WaveletSpec

TOL = 1e-10
FAULTS = ("wrong-constant", "wrong-bessel")


class CheckResult(NamedTuple):
    name: str
    deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.deviation < self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<44s} max dev {self.deviation:.3e}  (tol {self.tol:.0e})"


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def run_checks(fault: Optional[str] = None, seed: int = 0) -> List[CheckResult]:
    """Evaluate every identity; ``fault`` deliberately corrupts one ingredient."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    const_factor = 1.001 if fault == "wrong-constant" else 1.0
    bessel: Callable[[float, float], float] = macdonald_bessel
    if fault == "wrong-bessel":
        bessel = lambda nu, z: macdonald_bessel(nu + 1e-3, z)

    r = np.linspace(0.0, 10.0, 201)[1:]
    ou = MaternParams(0.5, 1.0)
    out = []
    out.append(CheckResult("k_{1/2,1}(1) = exp(-1)", _rel(matern_kernel(ou, 1.0), math.exp(-1.0)), TOL))
    out.append(CheckResult("k_{1/2,1}(r) = exp(-r), r in (0,10]",
                           _rel([matern_kernel(ou, v) for v in r], np.exp(-r)), TOL))
    out.append(CheckResult("k_{3/2,sqrt3}(1) = 2 exp(-1)",
                           _rel(matern_kernel(MaternParams(1.5, math.sqrt(3.0)), 1.0), 2 * math.exp(-1.0)), TOL))
    g3 = np.array([spatial_filter_G(3.0, 2, v) for v in r])
    out.append(CheckResult("G_3(r) = exp(-r)/(2 pi), d=2", _rel(g3, np.exp(-r) / (2 * math.pi)), TOL))
    c = ou.constant() * const_factor
    out.append(CheckResult("constant for nu=1/2, d=2 equals 2 pi", _rel(c, 2 * math.pi), TOL))
    out.append(CheckResult("C * G_3(r) = k_{1/2,1}(r)", _rel(c * g3, [matern_kernel(ou, v) for v in r]), TOL))
    pref = math.sqrt(math.pi / 2.0) * math.exp(-1.0)
    out.append(CheckResult("K_{1/2}(1) = sqrt(pi/2) e^-1", _rel(bessel(0.5, 1.0), pref), TOL))
    out.append(CheckResult("K_{3/2}(1) = 2 sqrt(pi/2) e^-1", _rel(bessel(1.5, 1.0), 2 * pref), TOL))

    rng = np.random.default_rng(seed)
    grid = GridSpec(32)
    f = Field(grid, rng.standard_normal((32, 32)))
    scale = f.norm()
    dev_f = (embed_adjoint_fourier(f, 0.0) - f).norm() / scale
    out.append(CheckResult("Fourier E_0^* = identity", dev_f, 1e-11))
    dev_w = (embed_adjoint_wavelet(f, 0.0, WaveletSpec(6, 3)) - f).norm() / scale
    out.append(CheckResult("wavelet E_0^* = identity", dev_w, 1e-11))
    # Matern with rho = sqrt(2 nu) against the s = nu + 1 wavelet smoother
    spec = WaveletSpec(10, 3)
    nu = 1.0
    k = matern_apply(f, MaternParams(nu, math.sqrt(2 * nu)), "wavelet", spec)
    e = embed_adjoint_wavelet(f, nu + 1.0, spec)
    cm = MaternParams(nu, math.sqrt(2 * nu)).constant() * const_factor
    out.append(CheckResult("wavelet Matern = C * E_{nu+1}^*, nu=1", (k - e * cm).norm() / k.norm(), TOL))
    return out
