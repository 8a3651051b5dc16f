"""Quadrature helpers shared by the continuum modules.

Composite Simpson weights on a uniform grid, and Filon-type weights for
oscillatory integrals ``int f(w) exp(i t w) dw`` with a piecewise-quadratic
amplitude.  Both schemes return per-node weights so callers can assemble
integrals as plain dot products.
"""

from __future__ import annotations

import numpy as np

# Above this phase budget plain Simpson under-resolves exp(i t w); switch to
# Filon weights.
OSCILLATORY_THRESHOLD = 50.0


def simpson_weights(grid: np.ndarray) -> np.ndarray:
    """Composite Simpson weights for a uniform grid with an odd node count."""
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of nodes (>= 3)")
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-12, atol=1e-12 * max(1.0, abs(h))):
        raise ValueError("Simpson weights require a uniform grid")
    w = np.empty(n)
    w[0] = w[-1] = h / 3.0
    w[1:-1:2] = 4.0 * h / 3.0
    w[2:-1:2] = 2.0 * h / 3.0
    return w


def _filon_coeffs(theta: float) -> tuple[float, float, float]:
    """Classic Filon alpha/beta/gamma for panel phase theta = t*h."""
    if abs(theta) < 0.05:
        # Series expansions; the closed forms cancel catastrophically near 0.
        t2 = theta * theta
        alpha = theta * t2 * (2.0 / 45.0 - t2 * 2.0 / 315.0 + t2 * t2 * 2.0 / 4725.0)
        beta = 2.0 / 3.0 + t2 * (2.0 / 15.0 - t2 * 4.0 / 105.0 + t2 * t2 * 2.0 / 567.0)
        gamma = 4.0 / 3.0 - t2 * (2.0 / 15.0 - t2 / 210.0 + t2 * t2 / 11340.0)
        return alpha, beta, gamma
    s, c = np.sin(theta), np.cos(theta)
    t2, t3 = theta * theta, theta * theta * theta
    alpha = 1.0 / theta + s * c / t2 - 2.0 * s * s / t3
    beta = 2.0 * ((1.0 + c * c) / t2 - 2.0 * s * c / t3)
    gamma = 4.0 * (s / t3 - c / t2)
    return alpha, beta, gamma


def filon_weights(grid: np.ndarray, t: float) -> np.ndarray:
    """Complex node weights c_k with sum_k c_k f(w_k) ~ int f(w) e^{i t w} dw.

    Exact for piecewise-quadratic f against the oscillatory factor; reduces
    to Simpson-times-phase as t -> 0.  Use conj(filon_weights(grid, t)) for
    the e^{-i t w} kernel.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n < 3 or n % 2 == 0:
        raise ValueError("Filon rule needs an odd number of nodes (>= 3)")
    h = grid[1] - grid[0]
    alpha, beta, gamma = _filon_coeffs(t * h)
    phase = np.exp(1j * t * grid)
    c = np.zeros(n, dtype=complex)
    c[0::2] = h * beta * phase[0::2]
    c[1::2] = h * gamma * phase[1::2]
    c[0] = h * (1j * alpha + beta / 2.0) * phase[0]
    c[-1] = h * (-1j * alpha + beta / 2.0) * phase[-1]
    return c


def oscillatory_weights(grid: np.ndarray, t: float) -> np.ndarray:
    """Node weights for int f e^{i t w} dw, Simpson below the phase
    threshold and Filon above it."""
    if abs(t) * (abs(grid[-1]) + abs(grid[0])) <= OSCILLATORY_THRESHOLD:
        return simpson_weights(grid) * np.exp(1j * t * grid)
    return filon_weights(grid, t)
