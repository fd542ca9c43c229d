#!/usr/bin/env python3
"""Resolution scans for slit-array objects.

The total error bound Delta^2 = Tr F^-1 is scanned over the pixel size d
(in units of the Rayleigh limit d_R); the resolution limit d_min is the
smallest scale that keeps Delta^2 within a threshold.

Two objects are scanned:
* a bright object (A_min = 0.9), where only the constraint correction
  matters and the plain bound is usable throughout;
* a black-and-white object (A_min = 0), where the plain information
  matrix is singular at every scale (dark pixels carry no local
  sensitivity) and the scan records 'inf' sentinels, while the
  regularized-plus-corrected bound stays finite and close to the
  Monte-Carlo error of constrained least squares.

Artifacts land in demos/out/resolution/<case>/.
"""

import pathlib

from crbkit.scan import run_resolution_scan

OUT = pathlib.Path(__file__).parent / "out" / "resolution"


def main():
    for tag, amin, mc in (("bright", 0.9, 150), ("dark", 0.0, 150)):
        cfg = {
            "model": {"variant": "SlitArray",
                      "params": {"N": 1e4, "M": 10, "d": 0.5, "d_R": 1.0}},
            "amplitudes": [1, 1, amin, amin, 1, 1, amin, amin, 1, 1],
            "d_grid": [0.4, 0.5, 0.65, 0.8],
            "threshold": 0.1,
            "mc_samples": mc,
            "ls_starts": 4,
            "seed": 5,
        }
        res = run_resolution_scan(cfg, OUT / tag)
        print(f"[{tag}] d/d_R   Delta2_std   Delta2_corr   MC MSE")
        for row in res["table"]:
            print(f"   {row[0]:.2f}   {row[1]:12.5g} {row[2]:12.5g} "
                  f"{row[4]:12.5g}")
        print(f"   d_min(std) = {res['summary']['d_min_std']}, "
              f"d_min(corr) = {res['summary']['d_min_corr']}\n")
    print(f"artifacts in {OUT}")


if __name__ == "__main__":
    main()
