"""Count solution pairs found along a λ grid on the unit cube (p = 2) and
compare with the predicted thresholds.  Writes scan.csv next to the printout."""

import argparse
from dataclasses import dataclass, field

from critmult import io as cio
from critmult.eigen import eigs_linear_p2
from critmult.fem import P1Space
from critmult.mesh import build_box_mesh
from critmult.params import ProblemParams
from critmult.variational import SolverConfig, scan_lambda


@dataclass
class Config:
    divisions: int = 6
    r: float = 4.0
    m_max: int = 3
    lambdas: list = field(default_factory=lambda: [0.0, 20.0, 60.0, 120.0, 250.0, 400.0])
    seed: int = 0
    out: str = "scan.csv"


def run(cfg: Config):
    V = P1Space(build_box_mesh(3, cfg.divisions))
    seq = eigs_linear_p2(V, cfg.m_max)
    rep = scan_lambda(V, ProblemParams(N=3, p=2.0, r=cfg.r, volume=1.0), cfg.lambdas,
                      SolverConfig(seed=cfg.seed), cfg.m_max, seq)
    for t in rep.thresholds:
        print(f"m = {t['m']}: lambda_m = {t['lambda_m']:.5f}, predicted threshold {t['threshold']:.5f}")
    for lam, count, energies in zip(rep.lambdas, rep.counts, rep.energies):
        print(f"lambda = {lam:8.2f}: {count} pair(s), energies {[round(e, 6) for e in energies]}")
    cio.write_csv(["lambda", "m", "predicted_threshold", "count"], rep.csv_rows(), cfg.out)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--divisions", type=int, default=6)
    ap.add_argument("--r", type=float, default=4.0)
    ap.add_argument("--m-max", type=int, default=3)
    ap.add_argument("--lambdas", default="0,20,60,120,250,400")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="scan.csv")
    a = ap.parse_args()
    run(Config(a.divisions, a.r, a.m_max, [float(x) for x in a.lambdas.split(",")], a.seed, a.out))
