"""Constraint-aware correction of Fisher information.

A positive-definite information matrix defines the Gaussian approximation
``p(theta) ~ exp(-0.5 (theta - theta0)^T F (theta - theta0))`` of the
estimate distribution. Physical constraints ``a^T theta <= b`` cut
probability mass away; this module iteratively reshapes the Gaussian until
every constraint's violation probability drops below a stop threshold,
while preserving the in-domain variance along each shrink direction. The
final kernel acts as an effective information matrix for the constrained
problem and can be fed to the ordinary error bound ``Tr F^{-1}``.

Each iteration whitens the Gaussian, picks the most severely violated
constraint, and applies a rank-1 kernel update plus a center shift whose
two defining requirements are solved in closed form:

* the violation probability moves to ``P' = max(P/2, P - eta)``;
* the variance of the kept (feasible) part of the marginal along the
  shrink direction is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .errors import (DomainError, IterationBudgetExceeded, NoConstraint,
                     NonSymmetricInput, SingularKernel, TwoActiveConstraints)
from .fisher import FisherMatrix
from .models import BoxDomain
from .numerics import erf_inverse, sym_sqrt_pair

__all__ = [
    "LinearConstraint",
    "GaussianApprox",
    "ShrinkStep",
    "ShrinkReport",
    "box_constraints",
    "violation_probability",
    "truncated_variance_V",
    "shrink_step",
    "correct_fim",
    "correct_fim_1d_closed",
]

STOP_THRESHOLD = 0.01    # terminal violation probability per constraint
ETA_STEP = 0.1           # at most this much violation probability per step
ITERATION_BUDGET = 10_000


@dataclass(frozen=True)
class LinearConstraint:
    """Half-space constraint ``a^T theta <= b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if not np.any(a != 0.0):
            raise NoConstraint("constraint normal must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))


@dataclass
class GaussianApprox:
    """Gaussian ``exp(-0.5 d^T kernel d)`` centered at ``center``."""

    center: np.ndarray
    kernel: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        k = np.asarray(getattr(self.kernel, "matrix", self.kernel), dtype=float)
        if k.shape != (c.size, c.size):
            raise NonSymmetricInput(
                f"kernel shape {k.shape} does not match center size {c.size}")
        scale = float(np.abs(k).max(initial=0.0))
        if scale > 0 and np.abs(k - k.T).max() > 1e-10 * scale:
            raise NonSymmetricInput("kernel is not symmetric")
        self.center = c
        self.kernel = 0.5 * (k + k.T)

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True)
class ShrinkStep:
    """One rank-1 shrink: which constraint, how much, and the targets."""

    constraint: int
    xi: float
    delta: float
    p_before: float
    p_target: float


@dataclass
class ShrinkReport:
    """Iteration log of :func:`correct_fim`."""

    iterations: int
    final_violation_probs: np.ndarray
    steps: list

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_violation_probs": [float(p) for p in
                                      self.final_violation_probs],
            "steps": [
                {"constraint": s.constraint, "xi": s.xi, "delta": s.delta,
                 "p_before": s.p_before, "p_target": s.p_target}
                for s in self.steps
            ],
        }


def box_constraints(domain: BoxDomain) -> list[LinearConstraint]:
    """Linear constraints equivalent to a box (finite bounds only).

    Per parameter: the lower bound first (``-theta_i <= -lo_i``), then the
    upper (``theta_i <= hi_i``).
    """
    out = []
    n = domain.dim
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if np.isfinite(domain.lower[i]):
            out.append(LinearConstraint(-e, -float(domain.lower[i])))
        if np.isfinite(domain.upper[i]):
            out.append(LinearConstraint(e, float(domain.upper[i])))
    return out


def _gauss_upper_tail(x: float) -> float:
    return 0.5 * (1.0 - erf(x / math.sqrt(2.0)))


def _whitened_margins(g: GaussianApprox, constraints) :
    """Boundary coordinates ``x0_k = b'_k / |a'_k|`` in whitened space."""
    if not constraints:
        raise NoConstraint("at least one constraint is required")
    t, t_inv = sym_sqrt_pair(g.kernel)
    x0 = np.empty(len(constraints))
    dirs = []
    for k, c in enumerate(constraints):
        a_w = t_inv @ c.a
        norm = float(np.linalg.norm(a_w))
        if norm == 0.0:
            raise SingularKernel("constraint normal vanishes after whitening")
        x0[k] = (c.b - float(c.a @ g.center)) / norm
        dirs.append(a_w / norm)
    return t, t_inv, x0, dirs


def violation_probability(g: GaussianApprox, c: LinearConstraint) -> float:
    """Gaussian mass on the infeasible side of ``a^T theta <= b``."""
    _, _, x0, _ = _whitened_margins(g, [c])
    return _gauss_upper_tail(float(x0[0]))


def truncated_variance_V(p: float, x: float) -> float:
    """Variance of a standard normal truncated to ``t <= x``.

    ``p`` is the truncated-away upper-tail mass; when the pair is consistent
    (``x = sqrt(2) erfinv(1 - 2p)``) this equals the exact conditional
    variance of the kept part.
    """
    if not 0.0 <= p < 1.0:
        raise DomainError(f"tail mass must lie in [0, 1), got {p}")
    q = 1.0 - p
    return (1.0 - x * math.exp(-0.5 * x * x) / (math.sqrt(2.0 * math.pi) * q)
            - math.exp(-x * x) / (2.0 * math.pi * q * q))


def _shrink_parameters(p: float, p_target: float, x0: float):
    """Closed-form (xi, delta) taking violation ``p`` at ``x0`` to target."""
    x0_new = math.sqrt(2.0) * erf_inverse(1.0 - 2.0 * p_target)
    ratio = truncated_variance_V(p_target, x0_new) / truncated_variance_V(p, x0)
    xi = ratio - 1.0
    delta = x0_new / math.sqrt(1.0 + xi) - x0
    return xi, delta


def shrink_step(g: GaussianApprox, constraints: Sequence[LinearConstraint],
                eta_step: float = ETA_STEP):
    """One iteration against the most severely violated constraint.

    Returns ``(GaussianApprox, ShrinkStep)``. After the step, the selected
    constraint's violation probability equals ``max(P/2, P - eta_step)`` and
    the in-domain variance along the shrink direction is preserved (both in
    closed form, reproducible to quadrature accuracy).
    """
    t, t_inv, x0, dirs = _whitened_margins(g, list(constraints))
    j = int(np.argmin(x0))
    p = _gauss_upper_tail(float(x0[j]))
    p_target = max(p / 2.0, p - eta_step)
    xi, delta = _shrink_parameters(p, p_target, float(x0[j]))
    d = dirs[j]
    td = t @ d
    kernel = g.kernel + xi * np.outer(td, td)
    center = g.center - delta * (t_inv @ d)
    record = ShrinkStep(constraint=j, xi=xi, delta=delta,
                        p_before=p, p_target=p_target)
    return GaussianApprox(center, kernel), record


def correct_fim(f: "FisherMatrix | np.ndarray", theta,
                constraints: Sequence[LinearConstraint],
                threshold: float = STOP_THRESHOLD,
                eta: float = ETA_STEP,
                max_iterations: int = ITERATION_BUDGET):
    """Iterate :func:`shrink_step` until every constraint is satisfied.

    ``f`` must be positive definite (regularize first if needed) and
    ``theta`` feasible or near-feasible. Returns the corrected kernel
    (interpreted as the effective information matrix of the constrained
    problem), the shifted center, and a :class:`ShrinkReport`.
    """
    labels = getattr(f, "labels", None)
    kernel = np.asarray(getattr(f, "matrix", f), dtype=float)
    g = GaussianApprox(np.asarray(theta, dtype=float), kernel)
    constraints = list(constraints)
    steps: list[ShrinkStep] = []
    for _ in range(max_iterations):
        _, _, x0, _ = _whitened_margins(g, constraints)
        probs = 0.5 * (1.0 - erf(x0 / math.sqrt(2.0)))
        if probs.max() <= threshold:
            report = ShrinkReport(len(steps), probs, steps)
            return FisherMatrix(g.kernel, labels), g.center, report
        g, record = shrink_step(g, constraints, eta)
        steps.append(record)
    raise IterationBudgetExceeded(
        f"constraint violation still above {threshold} after "
        f"{max_iterations} iterations")


def _target_probability(p: float, eta: float, threshold: float) -> float:
    """Final violation probability the iterative loop lands on."""
    while p > threshold:
        p = max(p / 2.0, p - eta)
    return p


def correct_fim_1d_closed(f: float, a: float, domain=(0.0, 1.0),
                          threshold: float = STOP_THRESHOLD,
                          eta: float = ETA_STEP) -> float:
    """One-step closed-form correction for a scalar information value.

    Valid when at most one box constraint is active. Successive shrinks
    along a fixed direction compose exactly (the variance ratios telescope),
    so a single step to the loop's terminal probability reproduces the
    iterative result.
    """
    if f <= 0.0:
        raise SingularKernel("information value must be positive")
    lo, hi = float(domain[0]), float(domain[1])
    root = math.sqrt(f)
    x0_upper = root * (hi - a)
    x0_lower = root * (a - lo)
    p_upper = _gauss_upper_tail(x0_upper)
    p_lower = _gauss_upper_tail(x0_lower)
    if p_upper > threshold and p_lower > threshold:
        raise TwoActiveConstraints(
            f"both box constraints active (P={p_lower:.3g}, {p_upper:.3g})")
    p, x0 = max((p_upper, x0_upper), (p_lower, x0_lower))
    if p <= threshold:
        return float(f)
    p_final = _target_probability(p, eta, threshold)
    xi, _ = _shrink_parameters(p, p_final, x0)
    return float((1.0 + xi) * f)
