"""Periodized orthonormal 2D fast wavelet transform (Daubechies family).

Coefficients are stored as one flat vector of length ``n**2``::

    [cA_m, cH_m, cV_m, cD_m, cH_{m-1}, cV_{m-1}, cD_{m-1}, ..., cH_1, cV_1, cD_1]

each block being the row-major flattening of an ``(n/2**i, n/2**i)`` array.
``cH`` is low-pass along columns and high-pass along rows (horizontal
edges), ``cV`` the opposite, ``cD`` high-pass in both directions.

Periodization keeps the transform exactly orthogonal, so the inverse is the
transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import List, NamedTuple

import numpy as np

from .errors import InvalidInput
from .grid import Field, GridSpec

# L2-Sobolev regularity of the Daubechies scaling function with D vanishing moments.
SOBOLEV_REGULARITY = {
    1: 0.5,
    2: 1.0,
    3: 1.415,
    4: 1.775,
    5: 2.096,
    6: 2.388,
    7: 2.658,
    8: 2.914,
    9: 3.161,
    10: 3.402,
}


@lru_cache(maxsize=None)
def daubechies_lowpass(order: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with ``order`` vanishing moments.

    Obtained by spectral factorization of the Daubechies polynomial
    ``P(y) = sum_k C(D-1+k, k) y^k`` with ``y = sin^2(w/2)``; the roots inside
    the unit circle are kept.  Normalised so that ``sum(h) = sqrt(2)``.
    """
    if not 1 <= order <= 10:
        raise InvalidInput(f"Daubechies order must be in 1..10, got {order}")
    poly = [comb(order - 1 + k, k) for k in range(order)]
    h = np.array([1.0])
    for _ in range(order):
        h = np.convolve(h, [0.5, 0.5])
    if order > 1:
        y_roots = np.roots(poly[::-1])
        # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
        for y in y_roots:
            zs = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            z = zs[np.argmin(np.abs(zs))]
            h = np.convolve(h, [1.0, -z])
        h = np.real_if_close(h, tol=1e6)
        if np.iscomplexobj(h):
            raise ArithmeticError("spectral factorization produced a complex filter")
    h = np.asarray(h, dtype=np.float64)
    h *= np.sqrt(2.0) / h.sum()
    h = _polish(h)
    h.flags.writeable = False
    return h


def _polish(h: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Newton refinement of the orthonormality conditions ``sum h_k h_{k+2l} = delta_l``."""
    L = len(h)
    half = L // 2
    for _ in range(sweeps):
        res = np.array([np.dot(h[: L - 2 * l], h[2 * l:]) - (1.0 if l == 0 else 0.0) for l in range(half)])
        if np.max(np.abs(res)) < 1e-16:
            break
        jac = np.zeros((half, L))
        for l in range(half):
            for k in range(L - 2 * l):
                jac[l, k] += h[k + 2 * l]
                jac[l, k + 2 * l] += h[k]
        h = h - np.linalg.lstsq(jac, res, rcond=None)[0]
    return h


def highpass_from_lowpass(h: np.ndarray) -> np.ndarray:
    """Quadrature mirror partner ``g_k = (-1)^k h_{L-1-k}``."""
    return h[::-1] * (-1.0) ** np.arange(len(h))


def _parse_family(family) -> int:
    if isinstance(family, (int, np.integer)):
        return int(family)
    text = str(family).lower().strip()
    if text.startswith("db"):
        text = text[2:]
    try:
        return int(text)
    except ValueError:
        raise InvalidInput(f"unrecognised wavelet family {family!r}; use e.g. 'db6'") from None


@dataclass(frozen=True)
class WaveletSpec:
    order: int = 6
    depth: int = 4

    def __post_init__(self):
        order = _parse_family(self.order)
        if not 1 <= order <= 10:
            raise InvalidInput(f"Daubechies order must be in 1..10, got {order}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidInput("wavelet depth must be an integer >= 1")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "depth", int(self.depth))

    @classmethod
    def from_name(cls, name: str, depth: int = 4) -> "WaveletSpec":
        return cls(_parse_family(name), depth)

    @classmethod
    def default_for(cls, s: float, depth: int = 4) -> "WaveletSpec":
        """Daubechies-6 when it is regular enough for ``s``, otherwise Daubechies-10."""
        if s < SOBOLEV_REGULARITY[6]:
            return cls(6, depth)
        if s < SOBOLEV_REGULARITY[10]:
            return cls(10, depth)
        raise InvalidInput(f"no supported Daubechies wavelet has regularity above s={s}")

    @property
    def name(self) -> str:
        return f"db{self.order}"

    @property
    def regularity(self) -> float:
        return SOBOLEV_REGULARITY[self.order]

    @property
    def lowpass(self) -> np.ndarray:
        return daubechies_lowpass(self.order)

    @property
    def highpass(self) -> np.ndarray:
        return highpass_from_lowpass(self.lowpass)

    def validate(self, n: int) -> None:
        if self.depth > int(np.log2(n)) or n % (2**self.depth):
            raise InvalidInput(f"depth {self.depth} is too large for n={n} (need 2**depth | n)")


class Block(NamedTuple):
    name: str
    level: int
    offset: int
    length: int
    side: int


def coeff_layout(spec: WaveletSpec, n: int) -> List[Block]:
    """Book-keeping table: name, level, offset and length ``l(i) = (n / 2**i)**2`` of each block."""
    spec.validate(n)
    m = spec.depth
    blocks = []
    offset = 0
    side = n >> m
    blocks.append(Block(f"cA{m}", m, offset, side * side, side))
    offset += side * side
    for level in range(m, 0, -1):
        side = n >> level
        for kind in "HVD":
            blocks.append(Block(f"c{kind}{level}", level, offset, side * side, side))
            offset += side * side
    return blocks


def _analysis_1d(x: np.ndarray, h: np.ndarray, g: np.ndarray, axis: int):
    """One periodized analysis step along ``axis``: ``a_k = sum_j h_j x_{(2k+j) mod N}``."""
    x = np.moveaxis(x, axis, -1)
    N = x.shape[-1]
    base = 2 * np.arange(N // 2)
    lo = np.zeros(x.shape[:-1] + (N // 2,))
    hi = np.zeros_like(lo)
    for j in range(len(h)):
        xs = x[..., (base + j) % N]
        lo += h[j] * xs
        hi += g[j] * xs
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)


def _synthesis_1d(lo: np.ndarray, hi: np.ndarray, h: np.ndarray, g: np.ndarray, axis: int):
    """Transpose of :func:`_analysis_1d`."""
    lo = np.moveaxis(lo, axis, -1)
    hi = np.moveaxis(hi, axis, -1)
    half = lo.shape[-1]
    N = 2 * half
    out = np.zeros(lo.shape[:-1] + (N,))
    base = 2 * np.arange(half)
    # each residue class (2k + j) mod N is hit once per tap, so direct += is safe
    for j in range(len(h)):
        out[..., (base + j) % N] += h[j] * lo + g[j] * hi
    return np.moveaxis(out, -1, axis)


def dwt2_array(x: np.ndarray, spec: WaveletSpec) -> np.ndarray:
    n = x.shape[-1]
    if x.shape[-2:] != (n, n):
        raise InvalidInput("dwt2 needs square images")
    spec.validate(n)
    h, g = spec.lowpass, spec.highpass
    details = []
    a = np.asarray(x, dtype=np.float64)
    for _ in range(spec.depth):
        lo_c, hi_c = _analysis_1d(a, h, g, axis=-1)
        ll, hl = _analysis_1d(lo_c, h, g, axis=-2)
        lh, hh = _analysis_1d(hi_c, h, g, axis=-2)
        # hl: low along columns, high along rows -> horizontal detail
        details.append((hl, lh, hh))
        a = ll
    batch = x.shape[:-2]
    parts = [a.reshape(batch + (-1,))]
    for cH, cV, cD in reversed(details):
        parts += [cH.reshape(batch + (-1,)), cV.reshape(batch + (-1,)), cD.reshape(batch + (-1,))]
    return np.concatenate(parts, axis=-1)


def idwt2_array(c: np.ndarray, spec: WaveletSpec, n: int) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape[-1] != n * n:
        raise InvalidInput(f"coefficient vector of length {c.shape[-1]} does not match n={n}")
    layout = coeff_layout(spec, n)
    h, g = spec.lowpass, spec.highpass
    batch = c.shape[:-1]

    def block(b: Block) -> np.ndarray:
        return c[..., b.offset:b.offset + b.length].reshape(batch + (b.side, b.side))

    a = block(layout[0])
    for i in range(spec.depth):
        bH, bV, bD = layout[1 + 3 * i: 4 + 3 * i]
        lo_c = _synthesis_1d(a, block(bH), h, g, axis=-2)
        hi_c = _synthesis_1d(block(bV), block(bD), h, g, axis=-2)
        a = _synthesis_1d(lo_c, hi_c, h, g, axis=-1)
    return a


def dwt2(field: Field, spec: WaveletSpec) -> np.ndarray:
    return dwt2_array(field.values, spec)


def idwt2(coeffs: np.ndarray, spec: WaveletSpec, grid: GridSpec) -> Field:
    return Field(grid, idwt2_array(coeffs, spec, grid.n))
