#!/usr/bin/env python3
"""Two-pixel object: estimate clouds against prediction ellipses.

The object has two transmission amplitudes seen through a symmetric
cross-talk kernel (h0, h1). Three true values are studied: near the dark
corner, mid-domain, and near the bright corner with few photons. For each
case the script samples signals, runs the constrained MLE and the
posterior mean, and compares the clouds against the half-mass ellipses of
the plain and the regularized-plus-corrected information matrices.

Mid-domain the correction is a no-op and all ellipses agree; at the
corners the plain bound badly overestimates the spread while the corrected
kernel stays close to the clouds. Artifacts land in demos/out/scatter/.
"""

import pathlib

import numpy as np

from crbkit.scan import run_scatter_2d

OUT = pathlib.Path(__file__).parent / "out" / "scatter"


def main():
    cfg = {
        "model": {"variant": "TwoPixel",
                  "params": {"N": 1000, "eta": 0.7, "h0": 1.0, "h1": 0.8}},
        "cases": [{"a": [0.2, 0.2]}, {"a": [0.5, 0.5]},
                  {"a": [0.9, 0.9], "N": 50}],
        "mc_samples": 400,
        "seed": 3,
    }
    res = run_scatter_2d(cfg, OUT)
    for case in res["cases"]:
        th = case["theta"]
        tv_std = np.trace(np.linalg.inv(case["fim"].matrix))
        tv_corr = np.trace(np.linalg.inv(case["fim_corr"].matrix))
        tr_mle = np.trace(case["stats"]["mle"].covariance)
        tr_bay = np.trace(case["stats"]["bayes"].covariance)
        print(f"A = {th.tolist()}: Tr F^-1 = {tv_std:.5f}, corrected "
              f"{tv_corr:.5f}, MLE cloud {tr_mle:.5f}, Bayes cloud "
              f"{tr_bay:.5f} ({case['report'].iterations} shrink steps)")
    print(f"\nartifacts in {OUT}")


if __name__ == "__main__":
    main()
