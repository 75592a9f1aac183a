#!/usr/bin/env python3
"""Write a synthetic radial depth dataset d(r) = A J0(2 l v / (r Omega))^2 + noise."""

import argparse

import numpy as np
from scipy.special import j0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="synthetic_depths.csv")
    ap.add_argument("--velocity", type=float, default=175.0, help="m/s")
    ap.add_argument("--amplitude", type=float, default=0.8)
    ap.add_argument("--l", type=int, default=2)
    ap.add_argument("--rf-mhz", type=float, default=22.135)
    ap.add_argument("--sigma", type=float, default=0.03)
    ap.add_argument("--points", type=int, default=31)
    ap.add_argument("--r-min", type=float, default=5.0, help="um")
    ap.add_argument("--r-max", type=float, default=40.0, help="um")
    ap.add_argument("--seed", type=int, default=176)
    a = ap.parse_args()

    rng = np.random.default_rng(a.seed)
    r = np.linspace(a.r_min, a.r_max, a.points)
    omega = 2.0 * np.pi * a.rf_mhz * 1e6
    d = a.amplitude * j0(2.0 * a.l * a.velocity / (r * 1e-6 * omega)) ** 2
    d += rng.normal(0.0, a.sigma, r.size)
    with open(a.out, "w") as f:
        f.write("r_um,depth,sigma\n")
        for ri, di in zip(r, d):
            f.write(f"{ri:g},{di:.6f},{a.sigma:g}\n")


if __name__ == "__main__":
    main()
