"""Batch analyses: error curves, scatter studies, resolution scans, reports.

Each ``run_*`` function takes a plain configuration dict (parsed from JSON
by the CLI; schemas are documented in README.md), optionally writes CSV /
JSON / SVG artifacts into an output directory, and returns the computed
tables so tests and notebook-style scripts can assert on them directly.

Outputs are deterministic given the config seed: float cells are written
with ``repr`` (shortest round-trip form), infinities as ``inf``, and rows
always follow grid order regardless of the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .errors import ConfigError, SingularFIM, SingularKernel
from .estimators import (bayes_mean, biased_crb_mse, estimate_batch,
                         ls_estimate_batch, mc_stats, mle_constrained,
                         sample_signal)
from .fisher import (FisherMatrix, fim_axis_lambda, fim_function, fim_poisson,
                     total_variance)
from .models import (BoxDomain, ModelSpec, model_from_json, model_to_json,
                     unit_box)
from .regularize import regularize_1d, regularize_fim
from .shrink import box_constraints, correct_fim, correct_fim_1d_closed
from .svg import SvgPlot

__all__ = [
    "EllipseSpec",
    "ellipse_from_quadratic_form",
    "regularize_and_correct",
    "windowed_corrected_fim",
    "run_error_curve",
    "run_scatter_2d",
    "run_resolution_scan",
    "run_fim_report",
    "run_ellipse",
    "write_csv",
]

HALF_MASS_LEVEL = 2.0 * math.log(2.0)


@dataclass(frozen=True)
class EllipseSpec:
    """Half-mass ellipse of a 2-D Gaussian quadratic form."""

    center: np.ndarray
    semi_axes: np.ndarray
    directions: np.ndarray   # rows are unit axis directions

    def boundary(self, n: int = 181) -> np.ndarray:
        """Polyline of the ellipse boundary, shape (n, 2)."""
        t = np.linspace(0.0, 2.0 * np.pi, n)
        circle = np.column_stack([np.cos(t), np.sin(t)])
        return self.center + (circle * self.semi_axes) @ self.directions

    def to_json(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "semi_axes": [float(v) for v in self.semi_axes],
            "directions": [[float(v) for v in row] for row in self.directions],
        }


def ellipse_from_quadratic_form(kernel, center) -> EllipseSpec:
    """Level set ``d^T kernel d = 2 log 2`` of a 2-D Gaussian.

    On average the returned ellipse contains half of the samples drawn from
    the Gaussian whose quadratic-form kernel is given. Semi-axis ``i`` is
    ``sqrt(2 log 2 / lambda_i)`` along eigenvector ``i``.
    """
    kernel = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
    center = np.asarray(center, dtype=float)
    if kernel.shape != (2, 2) or center.shape != (2,):
        raise ConfigError("ellipse construction expects a 2x2 kernel")
    vals, vecs = np.linalg.eigh(0.5 * (kernel + kernel.T))
    if vals.min() <= 1e-12 * max(vals.max(), 1e-300):
        raise SingularKernel(f"kernel eigenvalues {vals} not positive definite")
    semi = np.sqrt(HALF_MASS_LEVEL / vals)
    return EllipseSpec(center=center, semi_axes=semi, directions=vecs.T.copy())


def write_csv(path, columns, rows):
    """Deterministic CSV: header row, repr-formatted floats, 'inf' sentinel."""
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(repr(float(v)))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _dump_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def _out_path(out_dir, name):
    if out_dir is None:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def regularize_and_correct(model: ModelSpec, theta, domain: BoxDomain | None = None):
    """Full repair pipeline: eigen-axis regularization, then shrinking.

    Returns ``(F, F_reg, F_corr, center, report)`` where ``F`` is the plain
    information matrix at ``theta``. The regularization probes are allowed
    one box-extent beyond the physical domain: the amplitude models extend
    smoothly past it, and an object sitting on a box corner (binary
    amplitudes) leaves no in-box travel along mixed-sign eigenvectors.
    """
    theta = np.asarray(theta, dtype=float)
    if domain is None:
        domain = model.box()
    f = fim_poisson(model, theta)
    f_reg = regularize_fim(fim_function(model), theta, domain,
                           axis_fi=partial(fim_axis_lambda, model),
                           probe_domain=domain.inflate(1.0))
    f_corr, center, report = correct_fim(f_reg, theta, box_constraints(domain))
    return f, f_reg, f_corr, center, report


# -- error curve (1-parameter model) ----------------------------------------

ERROR_CURVE_COLUMNS = [
    "A", "F", "F_reg", "F_corr", "Delta_std", "Delta_reg", "Delta_corr",
    "Delta_MLE_mc", "Delta_Bayes_mc", "bias_MLE", "bias_Bayes",
    "Delta_MLE_biasedCRB", "Delta_Bayes_biasedCRB",
]


def run_error_curve(config: dict, out_dir=None) -> dict:
    """Bias/error curves of a 1-parameter model across its domain.

    Per grid value: the plain, regularized, and regularized-plus-corrected
    information values with their error bounds; Monte-Carlo root-MSE and
    bias of the constrained MLE and the posterior mean; and the biased-CRB
    predictions rebuilt from the tabulated Monte-Carlo bias.
    """
    model = model_from_json(config["model"])
    if model.dim != 1:
        raise ConfigError("error-curve requires a 1-parameter model")
    a_grid = np.asarray(config["a_grid"], dtype=float)
    if np.any(np.diff(a_grid) <= 0):
        raise ConfigError("a_grid must be strictly increasing")
    mc_samples = int(config.get("mc_samples", 10_000))
    seed = int(config.get("seed", 0))
    domain = unit_box(1)
    interval = (0.0, 1.0)
    fi = lambda a: fim_poisson(model, [a]).matrix[0, 0]

    n = a_grid.size
    cols = {name: np.empty(n) for name in ERROR_CURVE_COLUMNS}
    cols["A"] = a_grid.copy()
    for i, a in enumerate(a_grid):
        f_val = fi(a)
        f_reg = regularize_1d(fi, float(a), interval)
        f_corr = correct_fim_1d_closed(f_reg, float(a))
        cols["F"][i] = f_val
        cols["F_reg"][i] = f_reg
        cols["F_corr"][i] = f_corr
        cols["Delta_std"][i] = 1.0 / math.sqrt(f_val) if f_val > 0 else math.inf
        cols["Delta_reg"][i] = 1.0 / math.sqrt(f_reg)
        cols["Delta_corr"][i] = 1.0 / math.sqrt(f_corr)

        batch = sample_signal(model, [a], seed=seed + 7919 * i, count=mc_samples)
        est_mle = estimate_batch(batch, lambda y: mle_constrained(model, y, domain))
        est_bayes = estimate_batch(batch, lambda y: bayes_mean(model, y, domain))
        st_mle = mc_stats(est_mle, [a])
        st_bayes = mc_stats(est_bayes, [a])
        cols["Delta_MLE_mc"][i] = math.sqrt(st_mle.total_mse)
        cols["Delta_Bayes_mc"][i] = math.sqrt(st_bayes.total_mse)
        cols["bias_MLE"][i] = st_mle.bias[0]
        cols["bias_Bayes"][i] = st_bayes.bias[0]

    step = float(np.mean(np.diff(a_grid)))
    for est in ("MLE", "Bayes"):
        mse = biased_crb_mse(cols["F"], cols[f"bias_{est}"], step)
        cols[f"Delta_{est}_biasedCRB"] = np.sqrt(mse)

    rows = [[cols[name][i] for name in ERROR_CURVE_COLUMNS] for i in range(n)]
    csv_text = write_csv(_out_path(out_dir, "error_curve.csv"),
                         ERROR_CURVE_COLUMNS, rows)
    if out_dir is not None:
        plot = SvgPlot(title="1-parameter estimation error",
                       xlabel="A", ylabel="Delta", ylog=True)
        plot.add_line(a_grid, cols["Delta_std"], "standard CRB", "#000000")
        plot.add_line(a_grid, cols["Delta_reg"], "regularized", "#444444", dash="5,3")
        plot.add_line(a_grid, cols["Delta_corr"], "reg+corrected", "#888888",
                      dash="2,2")
        plot.add_line(a_grid, cols["Delta_MLE_mc"], "MLE MC", "#1f77b4")
        plot.add_line(a_grid, cols["Delta_Bayes_mc"], "Bayes MC", "#ff7f0e")
        plot.add_line(a_grid, cols["Delta_MLE_biasedCRB"], "MLE biased CRB",
                      "#1f77b4", dash="6,3")
        plot.add_line(a_grid, cols["Delta_Bayes_biasedCRB"], "Bayes biased CRB",
                      "#ff7f0e", dash="6,3")
        plot.save(_out_path(out_dir, "error_curve.svg"))
    return {"columns": ERROR_CURVE_COLUMNS, "table": cols, "csv": csv_text}


# -- 2-parameter scatter study ----------------------------------------------

def run_scatter_2d(config: dict, out_dir=None) -> dict:
    """Sampled estimate clouds vs prediction ellipses for a 2-pixel model.

    For every case: draws signal realizations, runs the constrained MLE and
    the posterior mean, and emits the sample clouds, their covariance
    ellipses, and the two prediction ellipses (plain information matrix at
    the true value; regularized-plus-corrected matrix at the shifted
    center).
    """
    base = dict(config["model"])
    seed = int(config.get("seed", 0))
    results = []
    for case_idx, case in enumerate(config["cases"]):
        params = dict(base["params"])
        if "N" in case:
            params["N"] = case["N"]
        model = model_from_json({"variant": base["variant"], "params": params})
        if model.dim != 2:
            raise ConfigError("scatter-2d requires a 2-parameter model")
        theta = np.asarray(case["a"], dtype=float)
        count = int(case.get("mc_samples", config.get("mc_samples", 1000)))
        domain = model.box()

        f, f_reg, f_corr, center, report = regularize_and_correct(model, theta)
        ell_std = ellipse_from_quadratic_form(f.matrix, theta)
        ell_corr = ellipse_from_quadratic_form(f_corr.matrix, center)

        batch = sample_signal(model, theta, seed=seed + 104729 * case_idx,
                              count=count)
        clouds, cloud_ellipses, stats = {}, {}, {}
        for name, estimator in (
                ("mle", lambda y: mle_constrained(model, y, domain)),
                ("bayes", lambda y: bayes_mean(model, y, domain))):
            est = estimate_batch(batch, estimator)
            st = mc_stats(est, theta)
            clouds[name] = est
            stats[name] = st
            cloud_ellipses[name] = ellipse_from_quadratic_form(
                np.linalg.inv(st.covariance), st.mean)

        tag = f"case{case_idx}"
        if out_dir is not None:
            rows = [[i, clouds["mle"][i, 0], clouds["mle"][i, 1],
                     clouds["bayes"][i, 0], clouds["bayes"][i, 1]]
                    for i in range(count)]
            write_csv(_out_path(out_dir, f"scatter_{tag}.csv"),
                      ["sample", "mle_A1", "mle_A2", "bayes_A1", "bayes_A2"],
                      rows)
            payload = {
                "true_value": [float(v) for v in theta],
                "fim_standard": f.to_json(),
                "fim_corrected": f_corr.to_json(),
                "corrected_center": [float(v) for v in center],
                "shrink_report": report.to_json(),
                "ellipse_standard": ell_std.to_json(),
                "ellipse_corrected": ell_corr.to_json(),
                "ellipse_mle_cloud": cloud_ellipses["mle"].to_json(),
                "ellipse_bayes_cloud": cloud_ellipses["bayes"].to_json(),
                "stats_mle": stats["mle"].to_json(),
                "stats_bayes": stats["bayes"].to_json(),
            }
            _dump_json(_out_path(out_dir, f"scatter_{tag}.json"), payload)
            plot = SvgPlot(title=f"estimates around A = {theta.tolist()}",
                           xlabel="A1", ylabel="A2")
            plot.add_points(clouds["mle"][:, 0], clouds["mle"][:, 1],
                            "MLE", "#1f77b4")
            plot.add_points(clouds["bayes"][:, 0], clouds["bayes"][:, 1],
                            "Bayes", "#ff7f0e")
            for label, ell, color, dash in (
                    ("standard CRB", ell_std, "#000000", "5,3"),
                    ("corrected", ell_corr, "#000000", ""),
                    ("MLE cloud", cloud_ellipses["mle"], "#1f77b4", "2,2"),
                    ("Bayes cloud", cloud_ellipses["bayes"], "#ff7f0e", "2,2")):
                b = ell.boundary()
                plot.add_line(b[:, 0], b[:, 1], label, color, dash=dash)
            plot.save(_out_path(out_dir, f"scatter_{tag}.svg"))

        results.append({
            "theta": theta, "fim": f, "fim_reg": f_reg, "fim_corr": f_corr,
            "center": center, "report": report, "stats": stats,
            "clouds": clouds, "ellipses": {
                "standard": ell_std, "corrected": ell_corr,
                "mle_cloud": cloud_ellipses["mle"],
                "bayes_cloud": cloud_ellipses["bayes"],
            },
        })
    return {"cases": results}


# -- resolution scan ---------------------------------------------------------

SCAN_COLUMNS = ["d_over_dR", "delta2_std", "delta2_corr",
                "delta2_var_mc", "delta2_mse_mc"]


def windowed_corrected_fim(model: ModelSpec, theta, domain: BoxDomain,
                           window: int = 24, margin: int = 4) -> FisherMatrix:
    """Block-diagonal corrected information for large parameter vectors.

    Splits the parameters into overlapping windows of at most ``window``
    entries, repairs each sub-problem independently (other parameters
    frozen at their true values), and assembles the home rows/columns of
    each window into a block-diagonal matrix. An approximation: inter-window
    couplings are dropped, which mirrors how near-independent sub-problems
    are analyzed separately.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if n <= window:
        return regularize_and_correct(model, theta, domain)[2]
    out = np.zeros((n, n))
    stride = window - 2 * margin
    if stride <= 0:
        raise ConfigError("window must exceed twice the margin")
    start = 0
    while start < n:
        stop = min(start + window, n)
        idx = np.arange(start, stop)
        home_lo = 0 if start == 0 else margin
        home_hi = idx.size if stop == n else idx.size - margin
        sub_domain = BoxDomain(domain.lower[idx], domain.upper[idx])

        def sub_fim(sub_theta, idx=idx):
            full = theta.copy()
            full[idx] = sub_theta
            fm = fim_poisson(model, full)
            return FisherMatrix(fm.matrix[np.ix_(idx, idx)])

        f_reg = regularize_fim(sub_fim, theta[idx], sub_domain)
        f_corr, _, _ = correct_fim(f_reg, theta[idx],
                                   box_constraints(sub_domain))
        home = np.arange(home_lo, home_hi)
        out[np.ix_(idx[home], idx[home])] = \
            f_corr.matrix[np.ix_(home, home)]
        if stop == n:
            break
        start += stride
    return FisherMatrix(out, getattr(model, "labels", None))


def _scan_point(model_doc, amplitudes, d_over_dr, mc_samples, seed,
                estimator_domain, windowed, n_starts):
    params = dict(model_doc["params"])
    params["d"] = d_over_dr * params.get("d_R", 1.0)
    params["reference"] = list(amplitudes)
    model = model_from_json({"variant": model_doc["variant"], "params": params})
    theta = np.asarray(amplitudes, dtype=float)
    box = model.box()

    try:
        delta2_std = total_variance(fim_poisson(model, theta))
    except (SingularFIM, SingularKernel):
        delta2_std = math.inf

    try:
        if windowed:
            f_corr = windowed_corrected_fim(model, theta, box)
        else:
            _, _, f_corr, _, _ = regularize_and_correct(model, theta, box)
        delta2_corr = total_variance(f_corr)
    except (SingularFIM, SingularKernel):
        # even the repaired matrix can stay numerically singular far past
        # the resolution limit; record a sentinel and keep scanning
        delta2_corr = math.inf

    delta2_var = math.nan
    delta2_mse = math.nan
    if mc_samples > 0:
        if estimator_domain == "unconstrained":
            est_box = BoxDomain(np.zeros(model.dim), 3.0 * np.ones(model.dim))
        else:
            est_box = box
        batch = sample_signal(model, theta, seed=seed, count=mc_samples)
        est = ls_estimate_batch(model, batch, est_box, n_starts=n_starts)
        st = mc_stats(est, theta)
        delta2_var = float(np.trace(st.covariance))
        delta2_mse = st.total_mse
    return [d_over_dr, delta2_std, delta2_corr, delta2_var, delta2_mse]


def run_resolution_scan(config: dict, out_dir=None, threads: int = 1,
                        windowed: bool = False) -> dict:
    """Total-error scan over the problem scale d/d_R with threshold crossing.

    Emits one row per grid point with the plain and corrected error bounds
    and (optionally) Monte-Carlo variance/MSE of bounded least squares, then
    reports ``d_min`` per curve: the smallest grid scale whose error stays
    within the configured threshold (grid resolution only, no
    interpolation).
    """
    model_doc = dict(config["model"])
    amplitudes = list(config["amplitudes"])
    d_grid = np.asarray(config["d_grid"], dtype=float)
    if np.any(np.diff(d_grid) <= 0):
        raise ConfigError("d_grid must be strictly increasing")
    threshold = float(config.get("threshold", 0.1))
    if threshold <= 0:
        raise ConfigError("threshold must be positive")
    mc_samples = int(config.get("mc_samples", 0))
    seed = int(config.get("seed", 0))
    estimator_domain = config.get("estimator_domain", "box")
    n_starts = int(config.get("ls_starts", 20))

    worker = partial(_scan_point, model_doc, amplitudes,
                     mc_samples=mc_samples, estimator_domain=estimator_domain,
                     windowed=windowed, n_starts=n_starts)
    jobs = [(float(d), seed + 15485863 * i) for i, d in enumerate(d_grid)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: worker(job[0], seed=job[1]), jobs))
    else:
        rows = [worker(d, seed=s) for d, s in jobs]

    table = np.asarray(rows, dtype=float)

    def d_min(col):
        ok = np.flatnonzero(np.nan_to_num(table[:, col], nan=math.inf)
                            <= threshold)
        return float(table[ok[0], 0]) if ok.size else math.inf

    summary = {
        "threshold": threshold,
        "d_min_std": d_min(1),
        "d_min_corr": d_min(2),
        "grid_step": float(np.min(np.diff(d_grid))) if d_grid.size > 1 else 0.0,
        "annotations": config.get("annotations", {}),
        "mc_samples": mc_samples,
        "estimator_domain": estimator_domain,
        "ls_starts": n_starts,
        "windowed": bool(windowed),
    }
    if mc_samples > 0:
        summary["d_min_mse_mc"] = d_min(4)

    csv_text = write_csv(_out_path(out_dir, "resolution_scan.csv"),
                         SCAN_COLUMNS, rows)
    if out_dir is not None:
        _dump_json(_out_path(out_dir, "resolution_scan.json"), summary)
        plot = SvgPlot(title="resolution scan", xlabel="d / d_R",
                       ylabel="Delta^2", ylog=True)
        plot.add_line(table[:, 0], table[:, 1], "standard", "#1f77b4", dash="6,3")
        plot.add_line(table[:, 0], table[:, 2], "reg+corrected", "#ff7f0e")
        if mc_samples > 0:
            plot.add_points(table[:, 0], table[:, 3], "MC variance", "#2ca02c")
            plot.add_points(table[:, 0], table[:, 4], "MC MSE", "#9467bd")
        plot.add_hline(threshold, "threshold")
        for label, val in (("d_min corrected", summary["d_min_corr"]),
                           ("d_min standard", summary["d_min_std"])):
            if math.isfinite(val):
                plot.add_vline(val, label)
        for key, val in summary["annotations"].items():
            if isinstance(val, (int, float)) and math.isfinite(val):
                plot.add_vline(float(val), key, color="#999999")
        plot.save(_out_path(out_dir, "resolution_scan.svg"))
    return {"columns": SCAN_COLUMNS, "table": table, "summary": summary,
            "csv": csv_text}


# -- single-point report ------------------------------------------------------

def run_fim_report(config: dict, out_dir=None) -> dict:
    """Information matrices, eigenspectra and shrink log for one point."""
    model = model_from_json(config["model"])
    theta = np.asarray(config["theta"], dtype=float)
    f, f_reg, f_corr, center, report = regularize_and_correct(model, theta)

    def tv_or_inf(fm):
        try:
            return total_variance(fm)
        except SingularFIM:
            return math.inf

    payload = {
        "model": model_to_json(model),
        "theta": [float(v) for v in theta],
        "fim": f.to_json(),
        "eigenvalues": [float(v) for v in f.eigh()[0]],
        "fim_regularized": f_reg.to_json(),
        "fim_corrected": f_corr.to_json(),
        "corrected_center": [float(v) for v in center],
        "shrink_report": report.to_json(),
        "total_variance": tv_or_inf(f),
        "total_variance_corrected": tv_or_inf(f_corr),
    }
    text = _dump_json(_out_path(out_dir, "fim_report.json"), payload)
    return {"payload": payload, "json": text}


def run_ellipse(config: dict, out_dir=None) -> dict:
    """Half-mass ellipse of a quadratic form supplied directly in config."""
    kernel = np.asarray(config["kernel"], dtype=float)
    center = np.asarray(config.get("center", [0.0, 0.0]), dtype=float)
    ell = ellipse_from_quadratic_form(kernel, center)
    payload = ell.to_json()
    _dump_json(_out_path(out_dir, "ellipse.json"), payload)
    if out_dir is not None:
        b = ell.boundary()
        plot = SvgPlot(title="half-mass ellipse", xlabel="x1", ylabel="x2")
        plot.add_line(b[:, 0], b[:, 1], "boundary", "#1f77b4")
        plot.save(_out_path(out_dir, "ellipse.svg"))
    return {"ellipse": ell, "payload": payload}
