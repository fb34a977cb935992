"""Modified Bessel function of the second kind (Macdonald function) K_nu.

Half-integer orders use the terminating closed form.  Other orders reduce
to ``|mu| <= 1/2`` and use Temme's series for ``z <= 2`` or Steed's
continued fraction for ``z > 2``, followed by forward recurrence in the
order, which is stable for K.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInput

_EPS = 1e-16
_MAX_ITER = 10000

# Taylor coefficients of 1/Gamma(z) about 0 (index = power of z).
_RGAMMA = (0.0, 1.0, 0.57721566490153286, -0.65587807152025388, -0.042002635034095236,
           0.16653861138229149, -0.042197734555544337, -0.0096219715278769736,
           0.0072189432466630995)


def _is_half_integer(nu: float) -> bool:
    return abs(nu - 0.5 - round(nu - 0.5)) < 1e-15


def _k_half_integer(n: int, z: float) -> float:
    # K_{n+1/2}(z) = sqrt(pi / 2z) e^{-z} sum_k (n+k)! / (k! (n-k)!) (2z)^{-k}
    total = 0.0
    for k in range(n + 1):
        total += math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k)) / (2.0 * z) ** k
    return math.sqrt(math.pi / (2.0 * z)) * math.exp(-z) * total


def _gam12(mu: float):
    """``(1/G(1-mu) - 1/G(1+mu)) / (2 mu)`` and ``(1/G(1-mu) + 1/G(1+mu)) / 2``."""
    if abs(mu) < 1e-3:
        m2 = mu * mu
        gam1 = -(_RGAMMA[2] + _RGAMMA[4] * m2 + _RGAMMA[6] * m2 * m2)
        gam2 = _RGAMMA[1] + _RGAMMA[3] * m2 + _RGAMMA[5] * m2 * m2
        return gam1, gam2
    gm, gp = 1.0 / math.gamma(1.0 - mu), 1.0 / math.gamma(1.0 + mu)
    return (gm - gp) / (2.0 * mu), 0.5 * (gm + gp)


def _k_temme(mu: float, z: float):
    """K_mu(z), K_{mu+1}(z) by Temme's series; ``|mu| <= 1/2``, small ``z``."""
    x2 = 0.5 * z
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
    gam1, gam2 = _gam12(mu)
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d / i
        p /= i - mu
        q /= i + mu
        term = c * ff
        total += term
        total1 += c * (p - i * ff)
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError("Temme series failed to converge")
    return total, total1 * 2.0 / z


def _k_steed(mu: float, z: float):
    """K_mu(z), K_{mu+1}(z) by Steed's continued fraction; ``z >= 2``."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAX_ITER):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise ArithmeticError("Steed continued fraction failed to converge")
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * z)) * math.exp(-z) / s
    k1 = kmu * (mu + z + 0.5 - h) / z
    return kmu, k1


def macdonald_bessel(nu: float, z: float) -> float:
    """K_nu(z) for real order ``nu`` and ``z > 0``; ``K_{-nu} = K_nu``."""
    nu = abs(float(nu))
    z = float(z)
    if not (z > 0) or not math.isfinite(z):
        raise InvalidInput(f"K_nu(z) needs finite z > 0, got {z}")
    if z > 745.0:
        return 0.0
    if _is_half_integer(nu):
        return _k_half_integer(int(round(nu - 0.5)), z)
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu, k1 = _k_temme(mu, z) if z <= 2.0 else _k_steed(mu, z)
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / z) * k1 + kmu
    return kmu


def macdonald_bessel_array(nu: float, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    flat = np.array([macdonald_bessel(nu, v) for v in z.ravel()])
    return flat.reshape(z.shape)
