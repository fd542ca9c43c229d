"""Shared numerical primitives: quadrature, special-function inverses,
1-D maximization, and symmetric-matrix square roots.

All routines are pure and deterministic.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .errors import QuadratureFailure, SingularKernel

__all__ = [
    "adaptive_simpson",
    "simpson_doubling",
    "erf_inverse",
    "golden_section_max",
    "log_grid",
    "sym_sqrt",
    "sym_sqrt_pair",
]


def adaptive_simpson(f, a: float, b: float, rel_tol: float = 1e-10,
                     panel_budget: int = 1_000_000) -> float:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson subdivision.

    The tolerance is relative to the running magnitude of the integral.
    Raises :class:`QuadratureFailure` when the panel budget is exhausted
    before every interval meets its share of the tolerance.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, rel_tol, panel_budget)

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = simpson(a, b, fa, fm, fb)
    # Crude magnitude scale; refreshed as the estimate improves.
    scale = max(abs(whole), 1e-300)

    # Stack of (x0, x2, f0, f1, f2, coarse_estimate, local_tol).
    stack = [(a, b, fa, fm, fb, whole, rel_tol * scale)]
    total = 0.0
    panels = 0
    while stack:
        x0, x2, f0, f1, f2, coarse, tol = stack.pop()
        panels += 1
        if panels > panel_budget:
            raise QuadratureFailure(
                f"panel budget {panel_budget} exhausted on [{a}, {b}]")
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        fine = left + right
        err = (fine - coarse) / 15.0
        if abs(err) <= tol or (x2 - x0) < 1e-14 * (b - a):
            total += fine + err
        else:
            half = 0.5 * tol
            stack.append((x0, xm, f0, fl, f1, left, half))
            stack.append((xm, x2, f1, fr, f2, right, half))
    return total


def simpson_doubling(f_nodes: Callable[[np.ndarray], np.ndarray],
                     a: float, b: float, rel_tol: float = 1e-8,
                     n_start: int = 129, n_max: int = 1 << 20):
    """Composite-Simpson integral with grid doubling until convergence.

    ``f_nodes`` receives the full node vector and must return the integrand
    evaluated at every node (vectorized form used for likelihood integrands).
    Returns ``(value, nodes_used)``; raises :class:`QuadratureFailure` if the
    doubling never stabilizes to ``rel_tol``.
    """
    if b <= a:
        return 0.0, 0

    def composite(n):
        x = np.linspace(a, b, n)
        y = f_nodes(x)
        h = (b - a) / (n - 1)
        return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum()
                          + 2.0 * y[2:-2:2].sum())

    n = n_start
    prev = composite(n)
    while n < n_max:
        n = 2 * n - 1
        cur = composite(n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur, n
        prev = cur
    raise QuadratureFailure(f"composite Simpson did not converge by n={n}")


def erf_inverse(y: float) -> float:
    """Inverse error function by a bracketed root solve on ``erf``.

    Solved to ~1e-14 absolute in the argument; avoids relying on any
    particular closed-form approximation and is directly testable against
    forward ``erf``.
    """
    if not -1.0 < y < 1.0:
        raise ValueError(f"erf_inverse argument must be in (-1, 1), got {y}")
    if y == 0.0:
        return 0.0
    hi = 1.0
    while erf(hi) < abs(y):
        hi *= 2.0
        if hi > 64.0:  # erf saturates long before this
            break
    x = brentq(lambda t: erf(t) - abs(y), 0.0, hi, xtol=1e-15, rtol=8.9e-16)
    return math.copysign(x, y)


def golden_section_max(f, lo: float, hi: float, abs_tol: float = 1e-8):
    """Maximize a unimodal ``f`` on ``[lo, hi]`` by golden-section search.

    Returns ``(x_best, f_best)``. Tolerance is absolute in ``x``.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > abs_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc
    return d, fd


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Logarithmically spaced grid on ``[lo, hi]`` (both positive)."""
    return np.geomspace(lo, hi, n)


def sym_sqrt_pair(kernel: np.ndarray, floor: float = 1e-12):
    """Symmetric square root ``T`` of a positive-definite matrix and ``T^-1``.

    Eigenvalues below ``floor * max_eigenvalue`` raise
    :class:`SingularKernel`: the whitening transform they would define is
    numerically degenerate and the caller should regularize first.
    """
    kernel = np.asarray(kernel, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (kernel + kernel.T))
    vmax = float(vals.max(initial=0.0))
    if vmax <= 0.0 or vals.min() <= floor * vmax:
        raise SingularKernel(
            f"kernel eigenvalues {vals} below floor {floor} * {vmax}")
    root = np.sqrt(vals)
    t = (vecs * root) @ vecs.T
    t_inv = (vecs / root) @ vecs.T
    return t, t_inv


def sym_sqrt(kernel: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Symmetric square root of a positive-definite matrix."""
    return sym_sqrt_pair(kernel, floor)[0]
