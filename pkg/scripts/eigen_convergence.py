"""Dirichlet eigenvalues of -Δ on the unit cube under refinement, against π²(i²+j²+k²)."""

import argparse
import math
from dataclasses import dataclass

import numpy as np

from critmult.eigen import eigs_linear_p2
from critmult.mesh import build_box_mesh


@dataclass
class Config:
    dim: int = 3
    divisions: tuple = (4, 8, 12, 16, 24)
    m: int = 4
    pattern: str = "kuhn"


def exact(dim, m):
    vals = sorted(math.pi**2 * sum(k * k for k in idx) for idx in np.ndindex(*(6,) * dim) if min(idx) > 0)
    return np.array(vals[:m])


def run(cfg: Config):
    ref = exact(cfg.dim, cfg.m)
    print(f"{'n':>4} " + " ".join(f"{'lambda_' + str(k + 1):>22}" for k in range(cfg.m)))
    for n in cfg.divisions:
        vals = eigs_linear_p2(build_box_mesh(cfg.dim, n, pattern=cfg.pattern), cfg.m).values
        cells = " ".join(f"{v:12.5f} ({v / r - 1:+6.2%})" for v, r in zip(vals, ref))
        print(f"{n:4d} {cells}")
    print("exact " + " ".join(f"{r:12.5f}" for r in ref))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--divisions", default="4,8,12,16,24")
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--pattern", default="kuhn", choices=["kuhn", "reflected"])
    a = ap.parse_args()
    run(Config(a.dim, tuple(int(x) for x in a.divisions.split(",")), a.m, a.pattern))
