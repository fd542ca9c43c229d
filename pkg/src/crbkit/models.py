"""Forward signal models for photon-coincidence imaging.

Four model variants sit behind one informal interface (``dim``, ``labels``,
``box``, ``signal``, ``jacobian``):

* ``Uniform1Model`` -- uniform object, one transmission amplitude, n-photon
  coincidences: ``S = N * eta**n * A**(2n)``.
* ``TwoPixelModel`` -- two pixels observed through a symmetric 2x2 real
  kernel ``(h0, h1)``; two autocorrelation components.
* ``SlitArrayModel`` -- M slit-like pixels, ideally correlated photon pairs,
  diagonal second-order correlations sampled on a detector grid with step
  d/2; kernel coefficients are sinc^2 integrals over each pixel.
* ``BiphotonG2Model`` -- same geometry but the full correlation matrix
  G2(x_i, x_j) and a finite transverse correlation length ``sigma_c``:
  photon partners may cross different pixels, which couples pixel pairs.

``signal``/``jacobian`` accept a single parameter vector ``(n,)`` or a batch
``(B, n)`` and return matching shapes. All models are pure and safe for
concurrent use; coefficient tables are computed once and never mutated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonFiniteParameter
from .numerics import adaptive_simpson

__all__ = [
    "BoxDomain",
    "Uniform1Model",
    "TwoPixelModel",
    "SlitArrayModel",
    "BiphotonG2Model",
    "ModelSpec",
    "eval_signal",
    "eval_jacobian",
    "slit_kernel_coeff",
    "biphoton_g2_coeffs",
    "model_from_json",
    "model_to_json",
]

# Momentum cut-off of the optical system in units of the Rayleigh limit.
KMAX_FACTOR = 3.83


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``lower <= theta <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("box bounds must be 1-D and congruent")
        if np.any(lo > hi):
            raise ConfigError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, theta, atol: float = 0.0) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - atol)
                    and np.all(theta <= self.upper + atol))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    @property
    def extent(self) -> float:
        return float(np.max(self.upper - self.lower))

    def inflate(self, margin: float) -> "BoxDomain":
        """Box grown by ``margin`` times its extent on every side."""
        pad = margin * self.extent
        return BoxDomain(self.lower - pad, self.upper + pad)


def unit_box(dim: int) -> BoxDomain:
    """Physical domain 0 <= A_i <= 1 for transmission amplitudes."""
    return BoxDomain(np.zeros(dim), np.ones(dim))


def _sinc(x):
    """Unnormalized sinc: sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


def _as_batch(theta, dim: int):
    arr = np.asarray(theta, dtype=float)
    if arr.ndim == 1:
        if arr.size != dim:
            raise DimensionMismatch(f"expected {dim} parameters, got {arr.size}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != dim:
            raise DimensionMismatch(
                f"expected batch of {dim}-vectors, got shape {arr.shape}")
        return arr, False
    raise DimensionMismatch(f"parameter array must be 1-D or 2-D, got {arr.ndim}-D")


@dataclass
class Uniform1Model:
    """Uniform object, ``S(A) = N * eta**n * A**(2n)`` (single component)."""

    N: float
    eta: float
    n: int = 2

    def __post_init__(self):
        if self.N <= 0:
            raise ConfigError("N must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be an integer >= 1")
        self.n = int(self.n)

    dim = 1
    labels = ("A",)

    def box(self) -> BoxDomain:
        return unit_box(1)

    @property
    def prefactor(self) -> float:
        return self.N * self.eta ** self.n

    def signal(self, theta):
        a, single = _as_batch(theta, 1)
        s = self.prefactor * a[:, 0] ** (2 * self.n)
        s = s[:, None]
        return s[0] if single else s

    def jacobian(self, theta):
        a, single = _as_batch(theta, 1)
        j = 2 * self.n * self.prefactor * a[:, 0] ** (2 * self.n - 1)
        j = j[:, None, None]
        return j[0] if single else j


@dataclass
class TwoPixelModel:
    """Two pixels through a symmetric real kernel.

    ``S_1 = N eta^2 (h0 A1^2 + h1 A2^2)^2`` and ``S_2`` with h0/h1 swapped.
    """

    N: float
    eta: float
    h0: float
    h1: float

    def __post_init__(self):
        if self.N <= 0:
            raise ConfigError("N must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")

    dim = 2
    labels = ("A1", "A2")

    def box(self) -> BoxDomain:
        return unit_box(2)

    @property
    def kernel(self) -> np.ndarray:
        return np.array([[self.h0, self.h1], [self.h1, self.h0]])

    def signal(self, theta):
        a, single = _as_batch(theta, 2)
        psi = a ** 2 @ self.kernel.T
        s = self.N * self.eta ** 2 * psi ** 2
        return s[0] if single else s

    def jacobian(self, theta):
        a, single = _as_batch(theta, 2)
        psi = a ** 2 @ self.kernel.T                     # (B, 2)
        # dS_i/dA_m = 4 N eta^2 psi_i h_im A_m
        j = (4.0 * self.N * self.eta ** 2
             * psi[:, :, None] * self.kernel[None, :, :] * a[:, None, :])
        return j[0] if single else j


def _detector_positions(m_pixels: int, d: float, d_r: float, pad: float,
                        step: float) -> np.ndarray:
    """Detector grid covering the object support padded on both sides."""
    lo = -pad
    hi = m_pixels * d + pad
    j_min = math.ceil(lo / step - 1e-12)
    j_max = math.floor(hi / step + 1e-12)
    return np.arange(j_min, j_max + 1) * step


def slit_kernel_coeff(m: int, j: int, spec: "SlitArrayModel") -> float:
    """Sinc^2 kernel coefficient of pixel ``m`` seen by detector ``j``.

    ``m`` is the 1-based pixel index covering ``[(m-1) d, m d]`` and ``j``
    indexes the detector position ``x_j = j * step`` (step defaults to d/2).
    Evaluated by adaptive Simpson quadrature at 1e-10 relative tolerance.
    """
    k = KMAX_FACTOR / spec.d_R
    x_j = j * spec.step

    def integrand(s):
        return _sinc(k * (s - x_j)) ** 2

    lo = (m - 1) * spec.d
    hi = m * spec.d
    return 4.0 * k * k * adaptive_simpson(integrand, lo, hi, rel_tol=1e-10)


@dataclass
class SlitArrayModel:
    """Slit-array object under ideally correlated photon pairs.

    Only the diagonal of the correlation matrix is recorded:
    ``S_j = scale * (sum_m D_jm A_m^2)^2``. The overall ``scale`` is chosen
    so that the reference object produces ``N`` expected events in total.
    """

    N: float
    M: int
    d: float
    d_R: float = 1.0
    reference: np.ndarray | None = None
    pad_factor: float = 2.0      # detector grid padding in units of d_R
    step_factor: float = 0.5     # detector step in units of d

    def __post_init__(self):
        if self.N <= 0 or self.d <= 0 or self.d_R <= 0:
            raise ConfigError("N, d and d_R must be positive")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.reference is None:
            self.reference = np.ones(self.M)
        self.reference = np.asarray(self.reference, dtype=float)
        if self.reference.shape != (self.M,):
            raise ConfigError("reference amplitudes must have length M")
        self._coeffs = None
        self._scale = None

    @property
    def dim(self) -> int:
        return self.M

    @property
    def labels(self):
        return tuple(f"A{m}" for m in range(1, self.M + 1))

    def box(self) -> BoxDomain:
        return unit_box(self.M)

    @property
    def step(self) -> float:
        return self.step_factor * self.d

    @property
    def detectors(self) -> np.ndarray:
        return _detector_positions(self.M, self.d, self.d_R,
                                   self.pad_factor * self.d_R, self.step)

    @property
    def coeffs(self) -> np.ndarray:
        """Kernel table ``D[j, m]``, detectors x pixels."""
        if self._coeffs is None:
            xs = self.detectors
            j_idx = np.round(xs / self.step).astype(int)
            table = np.empty((xs.size, self.M))
            for jj, j in enumerate(j_idx):
                for m in range(1, self.M + 1):
                    table[jj, m - 1] = slit_kernel_coeff(m, j, self)
            self._coeffs = table
        return self._coeffs

    @property
    def scale(self) -> float:
        if self._scale is None:
            psi_ref = self.coeffs @ self.reference ** 2
            total = float(np.sum(psi_ref ** 2))
            if total <= 0.0:
                raise ConfigError("reference object produces no signal")
            self._scale = self.N / total
        return self._scale

    def signal(self, theta):
        a, single = _as_batch(theta, self.M)
        psi = a ** 2 @ self.coeffs.T                     # (B, J)
        s = self.scale * psi ** 2
        return s[0] if single else s

    def jacobian(self, theta):
        a, single = _as_batch(theta, self.M)
        psi = a ** 2 @ self.coeffs.T
        j = (4.0 * self.scale
             * psi[:, :, None] * self.coeffs[None, :, :] * a[:, None, :])
        return j[0] if single else j


def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def biphoton_g2_coeffs(spec: "BiphotonG2Model") -> np.ndarray:
    """Four-index coupling table ``D[i, j, m, l]`` for the biphoton model.

    ``D^(ij)_ml`` integrates the product of the two sinc-kernel point-spread
    amplitudes against a normalized Gaussian pump-correlation factor of width
    ``sigma_c`` in the coordinate difference of the photon pair:

        D^(ij)_ml = int_{pix m} ds1 int_{pix l} ds2
                      g(s1 - s2; sigma_c) h(s1 - x_i) h(s2 - x_j)

    with ``h(u) = 2 k_max sinc(k_max u)``. In the ideal-correlation limit
    (sigma_c -> 0) the Gaussian acts as a delta function and the table
    becomes diagonal in (m, l) with ``D^(jj)_mm`` equal to the slit-array
    coefficient for the same geometry.

    The exact swap symmetry ``D^(ij)_ml == D^(ji)_lm`` is enforced by
    construction (blocks with i > j are mirrored, the diagonal symmetrized).
    """
    if spec.sigma_c <= 0:
        raise ConfigError("sigma_c must be positive")
    xs = spec.detectors
    n_det = xs.size
    mm = spec.M
    d = spec.d
    sig = spec.sigma_c
    k = KMAX_FACTOR / spec.d_R
    u_cut = 8.0 * sig
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * sig)

    gl_u, gw_u = _gauss_legendre(16)
    gl_s, gw_s = _gauss_legendre(24)

    out = np.zeros((n_det, n_det, mm, mm))
    for m in range(mm):
        lo_m = m * d
        hi_m = lo_m + d
        for l in range(mm):
            c_ml = (m - l) * d
            u_lo = max(c_ml - d, -u_cut)
            u_hi = min(c_ml + d, u_cut)
            if u_lo >= u_hi:
                continue
            # The overlap length is piecewise linear in u with a kink at
            # u = c_ml; integrate each smooth piece separately.
            pieces = []
            if u_lo < c_ml < u_hi:
                pieces = [(u_lo, c_ml), (c_ml, u_hi)]
            else:
                pieces = [(u_lo, u_hi)]
            s1_nodes, s2_nodes, weights = [], [], []
            for pa, pb in pieces:
                if pb - pa <= 0:
                    continue
                u_nodes = 0.5 * (pb - pa) * gl_u + 0.5 * (pa + pb)
                u_w = 0.5 * (pb - pa) * gw_u
                for u, wu in zip(u_nodes, u_w):
                    a = max(lo_m, l * d + u)
                    b = min(hi_m, l * d + d + u)
                    if b - a <= 0:
                        continue
                    s = 0.5 * (b - a) * gl_s + 0.5 * (a + b)
                    ws = 0.5 * (b - a) * gw_s
                    g = norm * math.exp(-0.5 * (u / sig) ** 2)
                    s1_nodes.append(s)
                    s2_nodes.append(s - u)
                    weights.append(wu * g * ws)
            if not weights:
                continue
            s1 = np.concatenate(s1_nodes)
            s2 = np.concatenate(s2_nodes)
            w = np.concatenate(weights)
            h1 = 2.0 * k * _sinc(k * (s1[:, None] - xs[None, :]))
            h2 = 2.0 * k * _sinc(k * (s2[:, None] - xs[None, :]))
            out[:, :, m, l] = (h1 * w[:, None]).T @ h2
    # Enforce the exact swap symmetry D^(ij)_ml == D^(ji)_lm.
    out = 0.5 * (out + out.transpose(1, 0, 3, 2))
    return out


@dataclass
class BiphotonG2Model:
    """Slit-array object with the full correlation matrix recorded.

    Signal components are unordered detector pairs (i <= j):
    ``S_ij = scale * Psi_ij^2`` with ``Psi_ij = sum_ml D^(ij)_ml A_m A_l``.
    A finite pump correlation length couples distinct pixels (m != l),
    which keeps the Fisher matrix regular for partially dark objects.
    """

    N: float
    M: int
    d: float
    d_R: float = 1.0
    sigma_c: float = 0.15
    reference: np.ndarray | None = None
    pad_factor: float = 2.0
    step_factor: float = 0.5

    def __post_init__(self):
        if self.N <= 0 or self.d <= 0 or self.d_R <= 0 or self.sigma_c <= 0:
            raise ConfigError("N, d, d_R and sigma_c must be positive")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.reference is None:
            self.reference = np.ones(self.M)
        self.reference = np.asarray(self.reference, dtype=float)
        if self.reference.shape != (self.M,):
            raise ConfigError("reference amplitudes must have length M")
        self._dsym = None
        self._pairs = None
        self._scale = None

    @property
    def dim(self) -> int:
        return self.M

    @property
    def labels(self):
        return tuple(f"A{m}" for m in range(1, self.M + 1))

    def box(self) -> BoxDomain:
        return unit_box(self.M)

    @property
    def step(self) -> float:
        return self.step_factor * self.d

    @property
    def detectors(self) -> np.ndarray:
        return _detector_positions(self.M, self.d, self.d_R,
                                   self.pad_factor * self.d_R, self.step)

    def _ensure_tables(self):
        if self._dsym is None:
            d4 = biphoton_g2_coeffs(self)
            n_det = d4.shape[0]
            iu, ju = np.triu_indices(n_det)
            # Symmetrized pixel coupling per detector pair:
            # dPsi_ij/dA_m = sum_l (D_ml + D_lm) A_l.
            dsym = d4[iu, ju] + d4[iu, ju].transpose(0, 2, 1)
            self._pairs = (iu, ju)
            self._dsym = np.ascontiguousarray(dsym)
        return self._dsym

    @property
    def pair_count(self) -> int:
        self._ensure_tables()
        return self._dsym.shape[0]

    @property
    def scale(self) -> float:
        if self._scale is None:
            dsym = self._ensure_tables()
            ref = self.reference
            psi = 0.5 * np.einsum("pml,m,l->p", dsym, ref, ref)
            total = float(np.sum(psi ** 2))
            if total <= 0.0:
                raise ConfigError("reference object produces no signal")
            self._scale = self.N / total
        return self._scale

    def _psi_grad(self, a_batch):
        """Return (Psi, dPsi/dA) for a batch: shapes (B, P) and (B, P, M)."""
        dsym = self._ensure_tables()
        p = dsym.shape[0]
        grad = (a_batch @ dsym.reshape(p * self.M, self.M).T)
        grad = grad.reshape(a_batch.shape[0], p, self.M)
        psi = 0.5 * np.einsum("bpm,bm->bp", grad, a_batch)
        return psi, grad

    def signal(self, theta):
        a, single = _as_batch(theta, self.M)
        psi, _ = self._psi_grad(a)
        s = self.scale * psi ** 2
        return s[0] if single else s

    def jacobian(self, theta):
        a, single = _as_batch(theta, self.M)
        psi, grad = self._psi_grad(a)
        j = 2.0 * self.scale * psi[:, :, None] * grad
        return j[0] if single else j

    def axis_information(self, theta, v, deltas) -> np.ndarray:
        """Exact information profile along a direction.

        For quadratic amplitudes the shot-noise term of each component is
        ``(dS/d delta)^2 / S = 4 scale (Psi')^2`` with the ``Psi^2`` factor
        cancelled, and ``Psi(theta + delta v)`` is exactly quadratic in the
        shift, so the whole profile costs two tensor contractions.
        """
        theta = np.asarray(theta, dtype=float)
        v = np.asarray(v, dtype=float)
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        dsym = self._ensure_tables()
        dv = np.einsum("pml,m->pl", dsym, v)
        g0 = dv @ theta                      # d(Psi)/d(delta) at delta = 0
        h0 = dv @ v                          # d^2(Psi)/d(delta)^2
        slopes = g0[None, :] + deltas[:, None] * h0[None, :]
        return 4.0 * self.scale * np.einsum("bp,bp->b", slopes, slopes)


ModelSpec = Union[Uniform1Model, TwoPixelModel, SlitArrayModel, BiphotonG2Model]


def _validated(model: ModelSpec, theta) -> np.ndarray:
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 1 or arr.size != model.dim:
        raise DimensionMismatch(
            f"model expects {model.dim} parameters, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteParameter(f"non-finite parameter entries: {arr}")
    return arr


def eval_signal(model: ModelSpec, theta) -> np.ndarray:
    """Mean signal vector S(theta) of a model; exact per-variant evaluation."""
    return model.signal(_validated(model, theta))


def eval_jacobian(model: ModelSpec, theta) -> np.ndarray:
    """Jacobian dS_i/dtheta_mu, shape (signal components, parameters)."""
    return model.jacobian(_validated(model, theta))


_VARIANTS = {
    "Uniform1": Uniform1Model,
    "TwoPixel": TwoPixelModel,
    "SlitArray": SlitArrayModel,
    "BiphotonG2": BiphotonG2Model,
}

_FIELDS = {
    "Uniform1": ("N", "eta", "n"),
    "TwoPixel": ("N", "eta", "h0", "h1"),
    "SlitArray": ("N", "M", "d", "d_R", "reference", "pad_factor",
                  "step_factor"),
    "BiphotonG2": ("N", "M", "d", "d_R", "sigma_c", "reference",
                   "pad_factor", "step_factor"),
}


def model_from_json(doc) -> ModelSpec:
    """Build a model from a JSON document {"variant": ..., "params": {...}}.

    ``doc`` may be a dict, a JSON string, or a path-like pointing at a JSON
    file. Lengths are unitless; express them in units of d_R (and set
    ``d_R = 1``) or in any one consistent unit.
    """
    if isinstance(doc, (str, bytes)):
        text = str(doc)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
    if not isinstance(doc, dict) or "variant" not in doc:
        raise ConfigError("model document must carry 'variant' and 'params'")
    variant = doc["variant"]
    if variant not in _VARIANTS:
        raise ConfigError(f"unknown model variant {variant!r}")
    params = dict(doc.get("params", {}))
    allowed = set(_FIELDS[variant])
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown parameters for {variant}: {sorted(unknown)}")
    if "reference" in params and params["reference"] is not None:
        params["reference"] = np.asarray(params["reference"], dtype=float)
    try:
        return _VARIANTS[variant](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {variant}: {exc}") from exc


def model_to_json(model: ModelSpec) -> dict:
    """Inverse of :func:`model_from_json` (coefficient caches excluded)."""
    for name, cls in _VARIANTS.items():
        if isinstance(model, cls):
            params = {}
            for key in _FIELDS[name]:
                val = getattr(model, key)
                if isinstance(val, np.ndarray):
                    val = val.tolist()
                params[key] = val
            return {"variant": name, "params": params}
    raise ConfigError(f"not a known model: {model!r}")
