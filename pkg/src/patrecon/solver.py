"""GMRES and the smoothness-regularized reconstruction.

The reconstruction solves ``(E_s^* K^* K + alpha I) x = E_s^* K^* p`` with
full (unrestarted) GMRES.  The operator is a product of two self-adjoint
operators and is not symmetric in general, hence GMRES rather than CG.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional

import numpy as np

from .acoustic import AcousticOperator
from .errors import GmresBreakdown, InvalidInput
from .grid import Field
from .sensors import SensorArray, SensorData, TimeAxis
from .smoothing import MaternParams, SmoothingConfig, embed_adjoint, sobolev_norm
from .wavelet import WaveletSpec

log = logging.getLogger(__name__)


@dataclass
class GmresResult:
    x: np.ndarray
    residuals: List[float]
    iterations: int
    converged: bool
    breakdown: bool


def gmres(apply_A: Callable[[np.ndarray], np.ndarray], b: np.ndarray, max_iters: int = 15,
          tol: float = 1e-8, callback: Optional[Callable] = None) -> GmresResult:
    """Minimal-residual solution of ``A x = b`` over growing Krylov spaces, ``x0 = 0``.

    Arnoldi uses modified Gram-Schmidt followed by one re-orthogonalization
    pass.  ``residuals[i]`` is ``||b - A x_i||`` from the Givens-rotated
    Hessenberg system, ``residuals[0] = ||b||``.  If given, ``callback(i, x_i, y_i)``
    runs after each iteration where ``x_i = V[:, :i] @ y_i``.
    """
    b = np.asarray(b, dtype=np.float64).ravel()
    if not np.all(np.isfinite(b)):
        raise InvalidInput("right-hand side contains non-finite values")
    if max_iters < 1:
        raise InvalidInput("max_iters must be >= 1")
    N = b.size
    beta = float(np.linalg.norm(b))
    residuals = [beta]
    if beta == 0.0:
        return GmresResult(np.zeros(N), residuals, 0, True, False)

    k_max = min(max_iters, N)
    V = np.zeros((k_max + 1, N))
    H = np.zeros((k_max + 1, k_max))
    cs = np.zeros(k_max)
    sn = np.zeros(k_max)
    g = np.zeros(k_max + 1)
    g[0] = beta
    V[0] = b / beta
    y = np.zeros(0)
    converged = breakdown = False
    k = 0
    for k in range(1, k_max + 1):
        j = k - 1
        w = np.array(apply_A(V[j].copy()), dtype=np.float64).ravel()
        if not np.all(np.isfinite(w)):
            raise GmresBreakdown(
                f"operator returned non-finite values at iteration {k} "
                f"(input norm {np.linalg.norm(V[j]):.3e}, last residual {residuals[-1]:.3e})"
            )
        w_norm0 = np.linalg.norm(w)
        for _ in range(2):
            for i in range(k):
                hij = np.dot(V[i], w)
                H[i, j] += hij
                w -= hij * V[i]
        h_next = float(np.linalg.norm(w))
        H[k, j] = h_next
        lucky = h_next <= 1e-14 * max(w_norm0, 1e-300)
        if not lucky:
            V[k] = w / h_next

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        r = math.hypot(H[j, j], H[k, j])
        if r == 0.0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j], sn[j] = H[j, j] / r, H[k, j] / r
        H[j, j] = r
        H[k, j] = 0.0
        g[k] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        residuals.append(abs(float(g[k])))

        y = _back_substitute(H[:k, :k], g[:k])
        if callback is not None:
            callback(k, V[:k].T @ y, y)
        if residuals[-1] <= tol * beta:
            converged = True
            break
        if lucky:
            breakdown = True
            log.debug("GMRES happy breakdown at iteration %d", k)
            break
    return GmresResult(V[:k].T @ y, residuals, k, converged, breakdown)


def _back_substitute(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = len(g)
    y = np.zeros(n)
    for i in range(n - 1, -1, -1):
        if R[i, i] == 0.0:
            raise GmresBreakdown(f"singular Hessenberg diagonal at row {i}")
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


@dataclass(frozen=True)
class ReconConfig:
    smoothing: SmoothingConfig = dc_field(default_factory=SmoothingConfig)
    alpha: float = 1e-5
    max_iters: int = 15
    tol: float = 1e-8
    noise_mean: float = 0.0
    prior_mean: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0) or not math.isfinite(self.alpha):
            raise InvalidInput("alpha must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidInput("max_iters must be an integer >= 1")
        if not self.tol >= 0:
            raise InvalidInput("tol must be >= 0")


class TikhonovOperator:
    """``x -> E_s^* K^* K x + alpha x`` on flattened images, counting wave solves.

    The forward traces ``K v`` of every applied vector are kept so that the
    data misfit of any Krylov combination can be formed without extra solves.
    """

    def __init__(self, sensors: SensorArray, times: TimeAxis, cfg: ReconConfig):
        self.acoustic = AcousticOperator(sensors, times)
        self.grid = sensors.grid
        self.cfg = cfg
        self.evaluations = 0
        self.traces: List[np.ndarray] = []

    def _smooth(self, img: np.ndarray) -> np.ndarray:
        return embed_adjoint(Field(self.grid, img), self.cfg.smoothing).values

    def forward(self, img: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        return self.acoustic.forward_array(img)

    def adjoint(self, traces: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        return self.acoustic.adjoint_array(traces)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        n = self.grid.n
        img = np.asarray(x, dtype=np.float64).reshape(n, n)
        kx = self.forward(img)
        self.traces.append(kx)
        return (self._smooth(self.adjoint(kx)) + self.cfg.alpha * img).ravel()

    def rhs(self, data: np.ndarray) -> np.ndarray:
        return self._smooth(self.adjoint(data)).ravel()


def tikhonov_operator(sensors: SensorArray, times: TimeAxis, cfg: ReconConfig) -> TikhonovOperator:
    return TikhonovOperator(sensors, times, cfg)


@dataclass
class ReconResult:
    estimate: Field
    residual_history: List[float]
    objective_history: List[float]
    evaluations: int
    iterations: int
    converged: bool = False
    breakdown: bool = False

    def history_rows(self):
        return [(i, r, j) for i, (r, j) in enumerate(zip(self.residual_history, self.objective_history))]


def objective_J(x: Field, data: SensorData, s: float, alpha: float) -> float:
    """``1/2 ||K x - p||^2 + alpha ||x||_{H^s}^2`` with the Fourier H^s norm."""
    if data.sensors is None:
        raise InvalidInput("objective needs sensor positions")
    op = AcousticOperator(data.sensors, data.times)
    misfit = op.forward_array(x.values) - data.values
    return 0.5 * float(np.sum(misfit**2)) + alpha * sobolev_norm(x, s) ** 2


def reconstruct(data: SensorData, cfg: ReconConfig) -> ReconResult:
    """Run GMRES on the regularized normal equation and record per-iterate diagnostics.

    Evaluations count wave solves: one adjoint for the right-hand side and a
    forward/adjoint pair per iteration.  A nonzero ``prior_mean`` costs one
    extra forward solve to shift the data.
    """
    if data.sensors is None:
        raise InvalidInput("reconstruction needs sensor positions; attach them with with_sensors()")
    op = TikhonovOperator(data.sensors, data.times, cfg)
    grid = data.sensors.grid
    n = grid.n
    p = data.values - cfg.noise_mean
    if cfg.prior_mean:
        p = p - op.forward(np.full((n, n), cfg.prior_mean))
    s, alpha = cfg.smoothing.s, cfg.alpha

    def objective(img: np.ndarray, kx: np.ndarray) -> float:
        x_total = Field(grid, img + cfg.prior_mean)
        reg = sobolev_norm(x_total, s) ** 2
        return 0.5 * float(np.sum((kx - p) ** 2)) + alpha * reg

    objectives = [objective(np.zeros((n, n)), np.zeros_like(p))]

    def record(i, x, y):
        kx = sum(c * t for c, t in zip(y, op.traces))
        objectives.append(objective(x.reshape(n, n), kx))

    b = op.rhs(p)
    res = gmres(op, b, cfg.max_iters, cfg.tol, callback=record)
    if any(r1 > r0 for r0, r1 in zip(res.residuals, res.residuals[1:])):
        raise AssertionError("GMRES residual history increased")
    estimate = Field(grid, res.x.reshape(n, n) + cfg.prior_mean)
    log.info("reconstruct: %d iterations, %d wave evaluations, residual %.3e -> %.3e",
             res.iterations, op.evaluations, res.residuals[0], res.residuals[-1])
    return ReconResult(estimate, res.residuals, objectives, op.evaluations, res.iterations,
                       res.converged, res.breakdown)


def map_to_tikhonov(noise_std: float, prior: MaternParams, backend: str = "fourier",
                    wavelet_spec: Optional[WaveletSpec] = None, **kwargs) -> ReconConfig:
    """Tikhonov configuration equivalent to the MAP estimate with a Matern prior.

    ``s = nu + d/2`` and ``alpha = 1 / (beta^2 C)`` where ``C`` is the factor by
    which the Matern covariance exceeds E_s^* (``2^d pi^(d/2) G(nu+d/2)/G(nu)``
    times ``(rho / sqrt(2 nu))^d``).
    """
    if not noise_std > 0:
        raise InvalidInput("noise standard deviation must be positive")
    if backend == "wavelet":
        prior.dyadic_level()
    c = prior.constant() * prior.scale ** (-prior.dim)
    smoothing = SmoothingConfig(prior.smoothness, backend, wavelet_spec)
    return ReconConfig(smoothing, alpha=1.0 / (noise_std**2 * c), **kwargs)
