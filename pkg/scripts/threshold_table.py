"""Multiplicity thresholds for the first m discrete eigenvalues of a box.

Prints λ_m and the p-only and (p,q) thresholds side by side.
"""

import argparse
from dataclasses import dataclass

from critmult.eigen import eigs_linear_p2
from critmult.mesh import build_box_mesh, volume
from critmult.params import ProblemParams
from critmult.thresholds import threshold_p, threshold_pq


@dataclass
class Config:
    divisions: int = 8
    r: float = 4.0
    q: float = 1.5
    m: int = 8


def run(cfg: Config):
    mesh = build_box_mesh(3, cfg.divisions)
    seq = eigs_linear_p2(mesh, cfg.m)
    P = ProblemParams(N=3, p=2.0, r=cfg.r, volume=volume(mesh))
    Pq = ProblemParams(N=3, p=2.0, r=cfg.r, volume=volume(mesh), q=cfg.q)
    print(f"{'m':>3} {'lambda_m':>12} {'tau*':>10} {'threshold_p':>14} {'threshold_pq':>14}")
    for m in range(1, cfg.m + 1):
        a = threshold_p(m, seq.lambda_m(m), P)
        b = threshold_pq(m, seq.lambda_m(m), Pq)
        print(f"{m:3d} {a.lambda_m:12.5f} {a.tau_star:10.5f} {a.threshold:14.5f} {b.threshold:14.5f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--divisions", type=int, default=8)
    ap.add_argument("--r", type=float, default=4.0)
    ap.add_argument("--q", type=float, default=1.5)
    ap.add_argument("--m", type=int, default=8)
    a = ap.parse_args()
    run(Config(a.divisions, a.r, a.q, a.m))
