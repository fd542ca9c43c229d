"""Regularization of ill-defined Fisher information near dark objects.

Coincidence-based signals scale as ``A**(2n)``, so the Fisher information of
a dark pixel vanishes and the plain error bound ``1/sqrt(F)`` diverges. The
repair probes the information at shifted parameter values and charges the
shift against the error budget:

    Delta(theta') = |theta' - theta| + F(theta')**-0.5
    F_reg(theta)  = 1 / min_theta' Delta(theta')^2
                  = max_theta' F(theta') / (1 + |theta' - theta| sqrt(F(theta')))^2

In the multiparameter case the same one-dimensional search runs along each
eigenvector of the matrix at ``theta`` (eigenvectors are frozen; only the
eigenvalues are lifted), so the output commutes with the input.

The module also carries two analytic peak profiles with flat tops whose
half-widths have closed forms; they double as oracles for the numeric
search machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigError, EmptyDomain, NonSymmetricInput
from .fisher import FisherMatrix
from .models import BoxDomain
from .numerics import golden_section_max

__all__ = [
    "Y1Profile",
    "Y2Profile",
    "ProbeProfile",
    "profile_width_numeric",
    "profile_width_closed",
    "regularize_1d",
    "regularize_fim",
]

GRID_POINTS = 200          # log-grid probes per search direction
GRID_FLOOR = 1e-4          # smallest probe as a fraction of the domain extent
REFINE_TOL = 1e-8          # absolute golden-section tolerance in the shift


@dataclass(frozen=True)
class Y1Profile:
    """Flat-top Gaussian: ``exp(-max(0, |x| - x0)^2 / (2 sigma^2))``."""

    x0: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0 or self.x0 < 0:
            raise ConfigError("Y1 profile needs sigma > 0 and x0 >= 0")

    def log_curvature(self, x: float) -> float:
        """Second derivative of the log profile at ``x``."""
        return -1.0 / self.sigma ** 2 if abs(x) >= self.x0 else 0.0


@dataclass(frozen=True)
class Y2Profile:
    """Super-Gaussian: ``exp(-|x|^k / (2 sigma^k))`` with ``k > 2``."""

    k: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0 or self.k <= 2:
            raise ConfigError("Y2 profile needs sigma > 0 and k > 2")

    def log_curvature(self, x: float) -> float:
        k, sig = self.k, self.sigma
        return -k * (k - 1.0) * abs(x) ** (k - 2.0) / (2.0 * sig ** k)


ProbeProfile = Union[Y1Profile, Y2Profile]


def _shifted_width(profile: ProbeProfile, x: float) -> float:
    """``Delta(x) = |x| + |curvature|^-1/2`` (inf where curvature vanishes)."""
    c = profile.log_curvature(x)
    if c == 0.0:
        return math.inf
    return abs(x) + 1.0 / math.sqrt(abs(c))


def profile_width_numeric(profile: ProbeProfile) -> float:
    """Half-width estimate by numerically minimizing the shifted width."""
    sig = profile.sigma
    hi = (profile.x0 + 10.0 * sig) if isinstance(profile, Y1Profile) else 10.0 * sig
    xs = np.geomspace(1e-8 * sig, hi, 600)
    vals = np.array([_shifted_width(profile, x) for x in xs])
    best = int(np.argmin(vals))
    lo_b = xs[max(best - 1, 0)]
    hi_b = xs[min(best + 1, xs.size - 1)]
    x_min, neg = golden_section_max(lambda x: -_shifted_width(profile, x),
                                    lo_b, hi_b, abs_tol=1e-10 * (sig + hi))
    return min(-neg, float(vals[best]))


def profile_width_closed(profile: ProbeProfile) -> float:
    """Closed-form half-width estimate for the two model profiles."""
    if isinstance(profile, Y1Profile):
        return profile.x0 + profile.sigma
    k = profile.k
    factor = ((k - 2.0) ** 2 / (2.0 * k * (k - 1.0))) ** (1.0 / k) * k / (k - 2.0)
    return factor * profile.sigma


def _axis_search(fi_along: Callable[[np.ndarray], np.ndarray],
                 travel_pos: float, travel_neg: float, extent: float,
                 fi_at_center: float, n_grid: int, refine_tol: float,
                 collect=None):
    """Maximize ``f(d) / (1 + |d| sqrt(f(d)))^2`` over feasible shifts.

    ``fi_along`` maps an array of signed shifts to information values.
    Returns the lifted information value (never below ``fi_at_center``).
    """
    best = fi_at_center

    def objective(deltas: np.ndarray) -> np.ndarray:
        f = np.maximum(fi_along(deltas), 0.0)
        vals = f / (1.0 + np.abs(deltas) * np.sqrt(f)) ** 2
        if collect is not None:
            collect.extend(zip(deltas.tolist(), f.tolist()))
        return vals

    for sign, travel in ((1.0, travel_pos), (-1.0, travel_neg)):
        if travel <= 0.0:
            continue
        grid = np.geomspace(GRID_FLOOR * extent, extent, n_grid)
        grid = grid[grid <= travel]
        grid = np.append(grid, travel)
        deltas = sign * grid
        vals = objective(deltas)
        idx = int(np.argmax(vals))
        if vals[idx] > best:
            best = float(vals[idx])
        lo = grid[idx - 1] if idx > 0 else 0.0
        hi = grid[idx + 1] if idx + 1 < grid.size else grid[idx]
        if hi > lo:
            d_ref, v_ref = golden_section_max(
                lambda t: float(objective(np.array([sign * t]))[0]),
                lo, hi, abs_tol=refine_tol)
            if v_ref > best:
                best = float(v_ref)
    return best


def regularize_1d(fi_of: Callable[[float], float], theta: float,
                  domain: Sequence[float], n_grid: int = GRID_POINTS,
                  refine_tol: float = REFINE_TOL,
                  return_trace: bool = False):
    """Regularized scalar Fisher information at ``theta``.

    ``fi_of`` must return a nonnegative information value for any probe in
    ``domain`` (an interval containing ``theta``). The result equals
    ``fi_of(theta)`` whenever the center already attains the maximum, and is
    never smaller.

    With ``return_trace=True`` also returns the list of probed
    ``(theta', F(theta'))`` pairs for diagnostic checks.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not lo <= theta <= hi or hi <= lo:
        raise EmptyDomain(f"domain [{lo}, {hi}] does not contain {theta}")
    trace: list | None = [] if return_trace else None

    def fi_along(deltas: np.ndarray) -> np.ndarray:
        return np.array([max(float(fi_of(theta + d)), 0.0) for d in deltas])

    collect = None
    if trace is not None:
        collect = []

    f0 = max(float(fi_of(theta)), 0.0)
    best = _axis_search(fi_along, hi - theta, theta - lo, hi - lo, f0,
                        n_grid, refine_tol, collect=collect)
    if trace is not None:
        trace = [(theta + d, f) for d, f in collect]
        return max(best, f0), trace
    return max(best, f0)


def _eigendecompose_with_zero_rows(matrix: np.ndarray):
    """Eigen-pairs with coordinate vectors assigned to exactly-zero rows.

    A dark pixel produces an exactly zero row/column, and its coordinate
    axis is then an exact eigenvector. Using it directly (instead of an
    arbitrary solver basis of the degenerate null space) keeps the probe
    directions feasible from a box corner.
    """
    n = matrix.shape[0]
    row_norm = np.abs(matrix).sum(axis=1)
    zero = np.flatnonzero(row_norm == 0.0)
    live = np.flatnonzero(row_norm > 0.0)
    vals = np.zeros(n)
    vecs = np.zeros((n, n))
    for col, idx in enumerate(zero):
        vecs[idx, col] = 1.0
    if live.size:
        sub = matrix[np.ix_(live, live)]
        sub_vals, sub_vecs = np.linalg.eigh(sub)
        vals[zero.size:] = sub_vals
        vecs[np.ix_(live, np.arange(zero.size, n))] = sub_vecs
    return vals, vecs


def regularize_fim(fim_of: Callable[[np.ndarray], "FisherMatrix | np.ndarray"],
                   theta, domain: BoxDomain,
                   axis_fi: Callable | None = None,
                   probe_domain: BoxDomain | None = None,
                   n_grid: int = GRID_POINTS,
                   refine_tol: float = REFINE_TOL) -> FisherMatrix:
    """Regularize a Fisher matrix along its eigen-axes.

    Decomposes ``F(theta)`` into eigen-pairs, runs the one-dimensional
    shifted-probe search along every eigenvector (both signs, probes that
    leave the probe domain are skipped), and reassembles the matrix from
    the lifted eigenvalues. Eigenvectors are frozen to those of the input,
    so the output commutes with it.

    ``probe_domain`` defaults to ``domain``. When the expansion point sits
    on a corner of the physical box and the soft eigenvectors mix signs,
    in-box travel is zero and no lift is possible; callers whose forward
    model extends smoothly past the box (polynomial amplitudes do) should
    pass an inflated probe domain instead.

    ``axis_fi(theta, v, deltas)`` may supply a batched evaluation of
    ``v^T F(theta + v * delta) v`` (see :func:`crbkit.fisher.fim_axis_lambda`);
    by default each probe calls ``fim_of`` once.
    """
    theta = np.asarray(theta, dtype=float)
    if not domain.contains(theta, atol=1e-12):
        raise EmptyDomain("domain does not contain theta")
    if probe_domain is None:
        probe_domain = domain
    elif not probe_domain.contains(theta, atol=1e-12):
        raise EmptyDomain("probe domain does not contain theta")
    f0 = fim_of(theta)
    labels = getattr(f0, "labels", None)
    matrix = np.asarray(getattr(f0, "matrix", f0), dtype=float)
    if matrix.shape != (theta.size, theta.size):
        raise NonSymmetricInput(
            f"FIM shape {matrix.shape} does not match theta size {theta.size}")
    scale = float(np.abs(matrix).max(initial=0.0))
    if scale > 0 and np.abs(matrix - matrix.T).max() > 1e-10 * scale:
        raise NonSymmetricInput("input FIM is not symmetric")
    matrix = 0.5 * (matrix + matrix.T)

    vals, vecs = _eigendecompose_with_zero_rows(matrix)

    if axis_fi is None:
        def axis_fi(th, v, deltas):
            out = np.empty(deltas.size)
            for i, dlt in enumerate(deltas):
                fm = fim_of(th + dlt * v)
                fm = np.asarray(getattr(fm, "matrix", fm), dtype=float)
                out[i] = float(v @ fm @ v)
            return out

    lifted = np.empty_like(vals)
    for i in range(vals.size):
        v = vecs[:, i]

        def travel(direction):
            with np.errstate(divide="ignore", invalid="ignore"):
                step_up = np.where(direction > 0,
                                   (probe_domain.upper - theta) / direction,
                                   np.inf)
                step_dn = np.where(direction < 0,
                                   (probe_domain.lower - theta) / direction,
                                   np.inf)
            lim = float(np.min(np.minimum(step_up, step_dn)))
            return max(lim, 0.0)

        lifted[i] = _axis_search(
            lambda deltas, vv=v: axis_fi(theta, vv, np.asarray(deltas, dtype=float)),
            travel(v), travel(-v), domain.extent, max(float(vals[i]), 0.0),
            n_grid, refine_tol)

    out = (vecs * lifted) @ vecs.T
    return FisherMatrix(0.5 * (out + out.T), labels)
