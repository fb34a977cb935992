"""Independent reference computations shared by the tests."""

import numpy as np

from patrecon.acoustic import crop, embed

# central-difference weights for the second derivative, 8th order
_LAP8 = (-205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560)


def fd_leapfrog(grid, p0, t_end, cfl=0.05):
    """Leapfrog in time, 8th-order finite differences in space, on the padded periodic domain."""
    h, v = grid.pixel_size, grid.sound_speed

    def lap(u):
        out = 2 * _LAP8[0] * u
        for k, a in enumerate(_LAP8[1:], 1):
            for ax in (0, 1):
                out += a * (np.roll(u, k, ax) + np.roll(u, -k, ax))
        return out / h**2

    steps = int(np.ceil(t_end / (cfl * h / v)))
    dt = t_end / steps
    c2 = (v * dt) ** 2
    prev = embed(grid, p0)
    cur = prev + 0.5 * c2 * lap(prev)
    for _ in range(steps - 1):
        prev, cur = cur, 2 * cur - prev + c2 * lap(cur)
    return crop(grid, cur)


def brute_dft2(x):
    """O(n^4) 2D DFT by explicit sums."""
    n = x.shape[0]
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x @ w.T
