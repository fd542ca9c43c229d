"""Box-constrained minimization, batched over multi-start points.

Deterministic solvers back the estimators:

* :func:`minimize_box_batch` -- projected gradient descent with a
  Barzilai-Borwein step and Armijo backtracking (c = 1e-4, shrink 0.5);
  used for likelihood maximization, where the parameter count is small.
* the projected Levenberg-Marquardt engine for sum-of-squares objectives
  lives next to the estimators (see ``crbkit.estimators``); plain projected
  gradient stalls on the badly conditioned least-squares problems that show
  up near the resolution limit, so bounded least squares uses the damped
  Gauss-Newton direction instead.

Both advance a whole batch of starting points simultaneously (multi-start
is the outer robustness layer) and terminate per start on a small projected
gradient, the iteration cap, or a numerical stall -- stall exits are
required in practice because count-scaled objectives put tiny gradient
targets below double-precision round-off.
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

__all__ = ["minimize_box_batch", "spread_starts"]

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MAX_BACKTRACKS = 45


def spread_starts(lower, upper, n_random: int, rng: np.random.Generator):
    """Box center plus ``n_random`` uniform feasible starting points."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    center = 0.5 * (lower + upper)
    if n_random <= 0:
        return center[None, :]
    rand = rng.uniform(lower, upper, size=(n_random, lower.size))
    return np.vstack([center[None, :], rand])


def minimize_box_batch(fun_grad: Callable[[np.ndarray],
                                          Tuple[np.ndarray, np.ndarray]],
                       x0: np.ndarray, lower, upper,
                       max_iterations: int = 5000,
                       pg_tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Minimize ``fun_grad`` over a box from a batch of starts.

    ``fun_grad(X)`` takes points stacked as ``(B, n)`` and returns
    ``(values (B,), gradients (B, n))``. Returns the final points and
    values, one row per start. Fully deterministic.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    if x.ndim == 1:
        x = x[None, :]
    n_batch = x.shape[0]
    f, g = fun_grad(x)
    f = f.copy()
    g = g.copy()

    extent = float(np.max(upper - lower))
    if not np.isfinite(extent) or extent <= 0.0:
        extent = 1.0
    g_inf = np.maximum(np.abs(g).max(axis=1), 1e-300)
    alpha = np.minimum(0.1 * extent / g_inf, 1e6)

    active = np.ones(n_batch, dtype=bool)
    for _ in range(max_iterations):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        xa, fa, ga, aa = x[idx], f[idx], g[idx], alpha[idx]

        step = np.clip(xa - aa[:, None] * ga, lower, upper) - xa
        descent = np.einsum("bi,bi->b", ga, step)
        pg = np.abs(np.clip(xa - ga, lower, upper) - xa).max(axis=1)
        done_now = (pg <= pg_tol) | (np.abs(step).max(axis=1) == 0.0) \
            | (descent >= 0.0)
        search = ~done_now

        t = np.ones(idx.size)
        new_x = xa.copy()
        new_f = fa.copy()
        accepted = np.zeros(idx.size, dtype=bool)
        for _bt in range(MAX_BACKTRACKS):
            trial_mask = search & ~accepted
            if not np.any(trial_mask):
                break
            rows = np.flatnonzero(trial_mask)
            trial = xa[rows] + t[rows, None] * step[rows]
            ft, _ = fun_grad(trial)
            ok = ft <= fa[rows] + ARMIJO_C * t[rows] * descent[rows]
            ok_rows = rows[ok]
            new_x[ok_rows] = trial[ok]
            new_f[ok_rows] = ft[ok]
            accepted[ok_rows] = True
            t[rows[~ok]] *= ARMIJO_SHRINK

        fail = search & ~accepted           # numerically stalled
        moved = accepted & (np.abs(new_x - xa).max(axis=1) > 0.0)
        improve = fa - new_f
        stalled = accepted & (improve <= 1e-15 * (1.0 + np.abs(fa))) & \
            (np.abs(new_x - xa).max(axis=1) <= 1e-13 * (1.0 + np.abs(xa).max(axis=1)))

        if np.any(moved):
            rows = np.flatnonzero(moved)
            _, g_new = fun_grad(new_x[rows])
            s = new_x[rows] - xa[rows]
            yv = g_new - ga[rows]
            sy = np.einsum("bi,bi->b", s, yv)
            ss = np.einsum("bi,bi->b", s, s)
            bb = np.where(sy > 1e-300, ss / np.maximum(sy, 1e-300), aa[rows] * 2.0)
            alpha[idx[rows]] = np.clip(bb, 1e-14, 1e8)
            g[idx[rows]] = g_new

        x[idx] = new_x
        f[idx] = new_f
        finished = done_now | fail | stalled
        active[idx[finished]] = False

    return x, f
