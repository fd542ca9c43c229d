"""Fisher information matrices for Poisson-count signal models.

The production path (:func:`fim_poisson`) uses the shot-noise form

    F_mu_nu = sum_i (1 / S_i) dS_i/dtheta_mu dS_i/dtheta_nu

while :func:`fim_bruteforce` re-derives the same matrix from first
principles (expectation of the score outer product by explicit summation
over integer outcomes) and serves as an independent oracle in tests.
:func:`fim_gaussian_noise` carries the continuous-Gaussian comparison whose
small-signal asymptotics differ from the Poisson case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson as _poisson

from .errors import (NonSymmetricInput, SingularFIM, SingularTermError,
                     TruncationBudgetExceeded)
from .models import ModelSpec, eval_jacobian, eval_signal

__all__ = [
    "FisherMatrix",
    "fim_poisson",
    "fim_bruteforce",
    "fim_gaussian_noise",
    "fim_function",
    "fim_axis_lambda",
    "total_variance",
]

# Signal components below this mean are "dark": they carry no events in any
# realistic sample and their information contribution is taken in the limit.
DARK_EPS = 1e-30
# A dark component whose gradient does not also vanish signals a genuinely
# divergent information term (inconsistent model), not a removable limit.
DARK_GRAD_FACTOR = 1e6

EIG_FLOOR = 1e-12


@dataclass
class FisherMatrix:
    """Symmetric positive-semidefinite information matrix with labels."""

    matrix: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NonSymmetricInput(f"matrix must be square, got {m.shape}")
        scale = float(np.abs(m).max(initial=0.0))
        if scale > 0 and np.abs(m - m.T).max() > 1e-12 * scale:
            raise NonSymmetricInput("matrix is not symmetric to 1e-12 relative")
        m = 0.5 * (m + m.T)
        vals = np.linalg.eigvalsh(m)
        vmax = float(vals.max(initial=0.0))
        if vals.min(initial=0.0) < -1e-10 * max(vmax, 1e-300):
            raise NonSymmetricInput(
                f"matrix is not PSD up to round-off: eigenvalues {vals}")
        self.matrix = m
        if self.labels is not None:
            self.labels = tuple(self.labels)
            if len(self.labels) != m.shape[0]:
                raise NonSymmetricInput("label count does not match dimension")
        self._eig = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigh(self):
        """Cached symmetric eigendecomposition (values ascending)."""
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "labels": list(self.labels) if self.labels else None,
            "matrix": [float(x) for x in self.matrix.ravel(order="C")],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FisherMatrix":
        n = int(doc["dim"])
        m = np.asarray(doc["matrix"], dtype=float).reshape(n, n)
        labels = doc.get("labels")
        return cls(m, tuple(labels) if labels else None)


def _dark_mask(s: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """Boolean mask of components kept in the information sum.

    Components with S_i < DARK_EPS contribute zero iff their gradient row
    also vanishes (||row||^2 <= S_i * DARK_GRAD_FACTOR); otherwise the model
    is inconsistent and :class:`SingularTermError` is raised.
    """
    dark = s < DARK_EPS
    if np.any(dark):
        row_sq = np.einsum("...im,...im->...i", jac, jac)
        bad = dark & (row_sq > s * DARK_GRAD_FACTOR)
        if np.any(bad):
            raise SingularTermError(
                "signal component vanishes while its gradient does not")
    return ~dark


def _weighted_fim(s, jac, weights, labels):
    keep = _dark_mask(s, jac)
    if not np.any(keep):
        return FisherMatrix(np.zeros((jac.shape[1], jac.shape[1])), labels)
    w = np.sqrt(weights[keep])
    rows = jac[keep] * w[:, None]
    f = rows.T @ rows
    return FisherMatrix(0.5 * (f + f.T), labels)


def fim_poisson(model: ModelSpec, theta) -> FisherMatrix:
    """Shot-noise Fisher matrix ``J^T diag(1/S) J`` of a model at theta."""
    s = eval_signal(model, theta)
    jac = eval_jacobian(model, theta)
    keep = _dark_mask(s, jac)
    weights = np.zeros_like(s)
    weights[keep] = 1.0 / s[keep]
    return _weighted_fim(s, jac, weights, model.labels)


def fim_gaussian_noise(model: ModelSpec, theta) -> FisherMatrix:
    """Fisher matrix for the continuous-Gaussian noise approximation.

    Per-component weight ``1/S + 1/(2 S^2)``; agrees with the Poisson form
    for bright components but diverges for genuinely dark ones, so a signal
    component that is exactly zero raises :class:`SingularTermError`.
    """
    s = eval_signal(model, theta)
    if np.any(s == 0.0):
        raise SingularTermError(
            "Gaussian-noise information diverges for a zero signal component")
    jac = eval_jacobian(model, theta)
    weights = 1.0 / s + 0.5 / s ** 2
    return _weighted_fim(s, jac, weights, model.labels)


def fim_bruteforce(model: ModelSpec, theta, tail_mass: float = 1e-12,
                   outcome_budget: int = 2_000_000) -> FisherMatrix:
    """Oracle Fisher matrix by explicit expectation of the score product.

    For each signal component the score is evaluated as a central finite
    difference of the Poisson log-likelihood (using only ``eval_signal``),
    and E[s_mu s_nu] is summed over integer outcomes until the truncated
    tail mass drops below ``tail_mass``. Independent components add.
    """
    theta = np.asarray(theta, dtype=float)
    s = eval_signal(model, theta)
    jac = eval_jacobian(model, theta)
    keep = _dark_mask(s, jac)
    dim = theta.size

    h = np.maximum(1e-6, 1e-4 * np.abs(theta))
    s_plus = np.empty((dim, s.size))
    s_minus = np.empty((dim, s.size))
    for mu in range(dim):
        step = np.zeros(dim)
        step[mu] = h[mu]
        s_plus[mu] = eval_signal(model, theta + step)
        s_minus[mu] = eval_signal(model, theta - step)

    f = np.zeros((dim, dim))
    for i in np.flatnonzero(keep):
        if np.any(s_plus[:, i] <= 0.0) or np.any(s_minus[:, i] <= 0.0):
            raise SingularTermError(
                "signal component vanishes inside the finite-difference stencil")
        y_max = int(_poisson.isf(tail_mass, s[i])) + 2
        if y_max + 1 > outcome_budget:
            raise TruncationBudgetExceeded(
                f"component {i} needs {y_max + 1} outcomes (budget {outcome_budget})")
        y = np.arange(y_max + 1, dtype=float)
        log_pmf = y * np.log(s[i]) - s[i] - gammaln(y + 1.0)
        pmf = np.exp(log_pmf)
        # score_mu(y) = d/dtheta_mu [y log S_i - S_i], central difference
        alpha = (np.log(s_plus[:, i]) - np.log(s_minus[:, i])) / (2.0 * h)
        beta = (s_plus[:, i] - s_minus[:, i]) / (2.0 * h)
        scores = y[:, None] * alpha[None, :] - beta[None, :]
        f += (scores * pmf[:, None]).T @ scores
    return FisherMatrix(0.5 * (f + f.T), model.labels)


def fim_function(model: ModelSpec) -> Callable[[np.ndarray], FisherMatrix]:
    """Convenience closure ``theta -> fim_poisson(model, theta)``."""
    return lambda theta: fim_poisson(model, theta)


def fim_axis_lambda(model: ModelSpec, theta, v, deltas,
                    flops_budget: int = 20_000_000) -> np.ndarray:
    """Batched quadratic form ``v^T F(theta + v * delta) v`` over deltas.

    Equivalent to projecting :func:`fim_poisson` on a fixed direction but
    evaluated with batched model calls; used by the eigen-axis
    regularization search, where thousands of probe offsets are scanned.
    Probes are processed in chunks so the intermediate Jacobian stack stays
    within a fixed memory budget.
    """
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if hasattr(model, "axis_information"):
        return model.axis_information(theta, v, deltas)
    n_comp = model.signal(theta[None, :]).shape[1]
    chunk = max(1, flops_budget // max(n_comp * theta.size, 1))
    out = np.empty(deltas.size)
    for start in range(0, deltas.size, chunk):
        sl = slice(start, min(start + chunk, deltas.size))
        batch = theta[None, :] + deltas[sl, None] * v[None, :]
        s = model.signal(batch)
        jac = model.jacobian(batch)
        g = jac @ v
        keep = _dark_mask(s, jac)
        terms = np.where(keep, g * g / np.where(keep, s, 1.0), 0.0)
        out[sl] = terms.sum(axis=1)
    return out


def total_variance(f: FisherMatrix) -> float:
    """Aggregate error bound ``Tr F^{-1}`` via symmetric eigendecomposition.

    Raises :class:`SingularFIM` when the smallest eigenvalue falls below
    ``1e-12`` of the largest: the inverse is then meaningless and the caller
    should regularize first.
    """
    vals, _ = f.eigh()
    vmax = float(vals.max(initial=0.0))
    if vmax <= 0.0 or vals.min() <= EIG_FLOOR * vmax:
        raise SingularFIM(
            f"eigenvalue range [{vals.min()}, {vmax}] is numerically singular")
    return float(np.sum(1.0 / vals))
