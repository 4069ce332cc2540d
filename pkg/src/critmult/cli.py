"""Command-line front end.

    critmult mesh          --dim 3 --divisions 8 --out runs/cube8
    critmult eigs          --mesh mesh.txt --p 2 --m 4
    critmult threshold     --N 3 --p 2 --r 4 --volume 1 --lambdas 31.5,65
    critmult energy-audit  --mesh mesh.txt --p 2 --r 4 --lam 120 --m 2
    critmult solve         --mesh mesh.txt --p 2 --r 4 --lam 120 --k 3
    critmult scan          --mesh mesh.txt --p 2 --r 4 --lambdas 0,60,120 --m-max 3

Every flag may also come from a flat ``key = value`` file given with
``--config``; command-line flags win.  Each run writes its outputs and a
``manifest.json`` into one directory.  Exit codes: 0 success, 1 usage or
configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io as cio
from .eigen import (
    FIRST,
    EigenError,
    EigenSequence,
    clusters,
    eigen_gap_report,
    eigs_continuation,
    eigs_linear_p2,
    first_eigen_p,
)
from .fem import FemFunction, P1Space, SolverError, holder_audit
from .mesh import MeshError, build_box_mesh, read_mesh, volume, write_mesh
from .params import ParameterError, ProblemParams
from .sobolev import SobolevSelfTestError, ps_ceiling
from .thresholds import BracketError, threshold_p, threshold_pq
from .variational import (
    SolverConfig,
    deflated_multisolve,
    geometry_audit,
    origin_audit,
    ps_diagnostic,
    scan_lambda,
)

log = logging.getLogger("critmult")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# config ---------------------------------------------------------------------------


def read_config(path) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def merge_config(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill flags left unset on the command line from the config file."""
    if not getattr(ns, "config", None):
        return ns
    cfg = read_config(ns.config)
    actions = {a.dest: a for a in parser._actions}
    for key, raw in cfg.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(ns, key) is not None:
            continue
        act = actions[key]
        try:
            val = act.type(raw) if act.type is not None else raw
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
        setattr(ns, key, val)
    return ns


def float_list(text: str) -> List[float]:
    text = text.strip()
    if not text:
        return []
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def resolved(ns: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(ns).items()) if k not in ("func", "out")}


# run directories -----------------------------------------------------------------------


class Run:
    def __init__(self, command: str, ns: argparse.Namespace):
        self.command = command
        self.config = resolved(ns)
        self.inputs: Dict[str, str] = {}
        self.outputs: List[str] = []
        self.start = time.perf_counter()
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        digest = hashlib.sha256(blob).hexdigest()[:8]
        if ns.out:
            self.dir = Path(ns.out)
        else:
            stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
            self.dir = Path("runs") / f"{stamp}-{command}-{digest}"
        self.dir.mkdir(parents=True, exist_ok=True)

    def input(self, path):
        if path:
            self.inputs[str(path)] = cio.file_checksum(path)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.dir / name

    def finish(self):
        manifest = {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.config.get("seed"),
            "tool_version": tool_version(),
            "duration_seconds": time.perf_counter() - self.start,
            "outputs": sorted(self.outputs),
        }
        cio.write_json(manifest, self.dir / "manifest.json")
        print(f"outputs in {self.dir}")


# shared helpers ----------------------------------------------------------------------


def load_mesh(ns, run: Optional[Run] = None):
    if not ns.mesh:
        raise UsageError("--mesh is required")
    if run is not None:
        run.input(ns.mesh)
    return read_mesh(ns.mesh)


def make_params(ns, mesh=None, lam=None) -> ProblemParams:
    if ns.p is None or ns.r is None:
        raise UsageError("--p and --r are required")
    N = ns.N if ns.N is not None else (mesh.dim if mesh is not None else None)
    if N is None:
        raise UsageError("--N is required without a mesh")
    vol = ns.volume if ns.volume is not None else (volume(mesh) if mesh is not None else None)
    if vol is None:
        raise UsageError("the domain volume needs --volume or --mesh")
    return ProblemParams(N=N, p=ns.p, r=ns.r, volume=vol, q=ns.q, lam=lam)


def solver_config(ns) -> SolverConfig:
    kw = dict(seed=ns.seed or 0, threads=ns.threads or 1)
    if getattr(ns, "nodes", None):
        kw["nodes"] = ns.nodes
    if getattr(ns, "delta", None):
        kw["deflation_delta"] = ns.delta
    return SolverConfig(**kw)


def compute_eigs(V: P1Space, p: float, m: int, method: str = "auto", seed: int = 0, steps: int = 4) -> EigenSequence:
    if m > V.ndofs:
        raise UsageError(f"m = {m} exceeds the space dimension {V.ndofs}")
    if method == "auto":
        method = "linear" if p == 2.0 else "continuation"
    if method == "linear":
        if p != 2.0:
            raise UsageError("the linear solver is for p = 2 only")
        return eigs_linear_p2(V, m)
    if method == "first":
        pair = first_eigen_p(V, p, seed=seed)
        return EigenSequence((pair,), p, FIRST, V.mesh.checksum())
    if method == "continuation":
        return eigs_continuation(V, p, m, steps=steps, seed=seed)
    raise UsageError(f"unknown eigen method {method!r}")


def threshold_rows(params: ProblemParams, values, method, ms) -> List[dict]:
    rows = []
    for m in ms:
        if not 1 <= m <= len(values):
            raise UsageError(f"no lambda_m available for m = {m}")
        if params.q is None:
            res = threshold_p(m, values[m - 1], params, eigen_method=method)
        else:
            res = threshold_pq(m, values[m - 1], params, eigen_method=method)
        rows.append(res.as_record())
    return rows


THRESHOLD_COLUMNS = ["m", "lambda_m", "tau_star", "sup_value", "threshold", "all_lambda_admissible", "eigen_method"]


# commands ------------------------------------------------------------------------


def cmd_mesh(ns) -> int:
    run = Run("mesh", ns)
    if ns.dim is None or ns.divisions is None:
        raise UsageError("--dim and --divisions are required")
    div = int_list(ns.divisions)
    div = div * ns.dim if len(div) == 1 else div
    lengths = float_list(ns.lengths) if ns.lengths else None
    if lengths is not None and len(lengths) == 1:
        lengths = lengths * ns.dim
    mesh = build_box_mesh(ns.dim, div, lengths, pattern=ns.pattern or "kuhn")
    write_mesh(mesh, run.path("mesh.txt"))
    print(f"vertices {mesh.n_vertices}  cells {mesh.n_cells}  volume {cio.fmt(volume(mesh))}")
    print(f"checksum {mesh.checksum()}")
    run.finish()
    return EXIT_OK


def cmd_eigs(ns) -> int:
    run = Run("eigs", ns)
    mesh = load_mesh(ns, run)
    V = P1Space(mesh)
    p = ns.p if ns.p is not None else 2.0
    seq = compute_eigs(V, p, ns.m or 4, ns.method or "auto", ns.seed or 0, ns.steps or 4)
    name = cio.write_eigen_sequence(seq, run.dir).name
    run.outputs.append(name)
    run.outputs.extend(f"eigs_phi{k}.json" for k in range(1, len(seq) + 1))
    print(f"method {seq.method}")
    for k, pair in enumerate(seq.pairs, start=1):
        print(f"lambda_{k} = {cio.fmt(pair.value)}  residual {pair.residual:.3e}")
    if len(seq) > 1:
        for m, gap, flag in eigen_gap_report(seq):
            if flag:
                print(f"gap flag: lambda_{m} = lambda_{m + 1} (gap {gap:.3e})")
        for group in clusters(seq):
            print("cluster at m in {" + ",".join(map(str, group)) + "}")
    run.finish()
    return EXIT_OK


def cmd_threshold(ns) -> int:
    run = Run("threshold", ns)
    mesh = load_mesh(ns, run) if ns.mesh else None
    params = make_params(ns, mesh)
    if ns.eigs:
        run.input(ns.eigs)
        values, method, _ = cio.read_eigen_values(ns.eigs)
    elif ns.lambdas:
        values, method = float_list(ns.lambdas), ns.eigen_method or "user-supplied"
    else:
        raise UsageError("need lambda_m values: --lambdas or --eigs")
    if ns.m_range:
        lo, _, hi = ns.m_range.partition(":")
        ms = range(int(lo), int(hi or lo) + 1)
    else:
        ms = range(1, len(values) + 1)
    rows = threshold_rows(params, values, method, ms)
    cio.write_json({"params": params_record(params), "thresholds": rows}, run.path("thresholds.json"))
    cio.write_csv(THRESHOLD_COLUMNS, ([r[c] for c in THRESHOLD_COLUMNS] for r in rows), run.path("thresholds.csv"))
    for r in rows:
        print(f"m={r['m']}  lambda_m={cio.fmt(r['lambda_m'])}  threshold={cio.fmt(r['threshold'])}")
    run.finish()
    return EXIT_OK


def params_record(params: ProblemParams) -> dict:
    return {"N": params.N, "p": params.p, "r": params.r, "q": params.q, "volume": params.volume, "lam": params.lam}


def cmd_energy_audit(ns) -> int:
    run = Run("energy-audit", ns)
    mesh = load_mesh(ns, run)
    V = P1Space(mesh)
    if ns.lam is None:
        raise UsageError("--lam is required")
    params = make_params(ns, mesh, lam=ns.lam)
    m = ns.m or 1
    seq = compute_eigs(V, params.p, m, "auto", ns.seed or 0)
    geo = geometry_audit(V, params, m, seq, seed=ns.seed or 0)
    orig = origin_audit(V, params, [1e-3, 1e-2, 1e-1], seed=ns.seed or 0)
    rng = np.random.default_rng(ns.seed or 0)
    worst = min(
        min(v for v in (s.F_bound, s.G_bound, s.H_bound) if v is not None)
        for s in (holder_audit(FemFunction(rng.standard_normal(V.ndofs), V), params) for _ in range(20))
    )
    rec = {
        "params": params_record(params),
        "geometry": vars(geo),
        "origin": {"radii": orig.radii, "min_energy": orig.min_energy, "positive": orig.positive},
        "holder_min_slack": worst,
    }
    cio.write_json(rec, run.path("audit.json"))
    print(f"both halves hold: {geo.both_hold} (R = {geo.R_chosen})  envelope slack {geo.envelope_min_slack:.3e}")
    print(f"origin positive at radii {orig.radii}: {orig.positive}")
    run.finish()
    return EXIT_OK


def cmd_solve(ns) -> int:
    run = Run("solve", ns)
    mesh = load_mesh(ns, run)
    V = P1Space(mesh)
    if ns.lam is None:
        raise UsageError("--lam is required")
    params = make_params(ns, mesh, lam=ns.lam)
    k = ns.k or 1
    seq = compute_eigs(V, params.p, k, "auto", ns.seed or 0)
    res = deflated_multisolve(V, params, solver_config(ns), k, seq)
    ceiling = ps_ceiling(params.N, params.p)
    points = []
    for j, cp in enumerate(res.points):
        name = f"solution{j + 1}.json"
        cio.write_function(cp.function, run.path(name))
        diag = ps_diagnostic(cp.trace, ceiling) if cp.trace else None
        points.append({"pair_tag": cp.pair_tag, "energy": cp.energy, "grad_dual_norm": cp.grad_dual_norm,
                       "file": name, "ps": diag.message if diag else None})
        print(f"pair {cp.pair_tag}: E = {cio.fmt(cp.energy)}  |E'| = {cp.grad_dual_norm:.3e}")
    misses = [{"seed": m.seed_index, "reason": m.reason} for m in res.misses]
    cio.write_json({"params": params_record(params), "ceiling": ceiling, "points": points, "misses": misses},
                   run.path("solutions.json"))
    run.finish()
    return EXIT_OK


def cmd_scan(ns) -> int:
    run = Run("scan", ns)
    mesh = load_mesh(ns, run)
    V = P1Space(mesh)
    params = make_params(ns, mesh)
    lambdas = float_list(ns.lambdas or "")
    if not lambdas:
        raise UsageError("empty lambda grid")
    m_max = ns.m_max or 2
    seq = compute_eigs(V, params.p, m_max, "auto", ns.seed or 0)
    eig_name = cio.write_eigen_sequence(seq, run.dir).name
    run.outputs.append(eig_name)
    run.outputs.extend(f"eigs_phi{k}.json" for k in range(1, len(seq) + 1))
    rep = scan_lambda(V, params, lambdas, solver_config(ns), m_max, seq)
    cio.write_csv(["lambda", "m", "predicted_threshold", "count"], rep.csv_rows(), run.path("scan.csv"))
    cio.write_json(
        {
            "params": params_record(params),
            "eigen_method": rep.eigen_method,
            "lambdas": rep.lambdas,
            "counts": rep.counts,
            "energies": rep.energies,
            "thresholds": rep.thresholds,
            "misses": rep.misses,
        },
        run.path("scan.json"),
    )
    for lam, count in zip(rep.lambdas, rep.counts):
        print(f"lambda = {cio.fmt(lam)}: {count} pair(s)")
    run.finish()
    return EXIT_OK


# parser --------------------------------------------------------------------------------


def _common(sp: argparse.ArgumentParser, problem: bool = True):
    sp.add_argument("--config", default=None, help="flat key = value file")
    sp.add_argument("--out", default=None, help="run directory")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    if problem:
        sp.add_argument("--mesh", default=None, help="mesh file")
        sp.add_argument("--N", type=int, default=None, help="dimension in the exponents (default: mesh dimension)")
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--q", type=float, default=None)
        sp.add_argument("--r", type=float, default=None)
        sp.add_argument("--volume", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="critmult", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("mesh", help="triangulate a box")
    _common(sp, problem=False)
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--divisions", default=None, help="one count or a comma list")
    sp.add_argument("--lengths", default=None)
    sp.add_argument("--pattern", default=None, choices=["kuhn", "reflected"])
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("eigs", help="Dirichlet eigenvalues of the p-Laplacian")
    _common(sp)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--method", default=None, choices=["auto", "linear", "continuation", "first"])
    sp.add_argument("--steps", type=int, default=None)
    sp.set_defaults(func=cmd_eigs)

    sp = sub.add_parser("threshold", help="multiplicity thresholds from lambda_m")
    _common(sp)
    sp.add_argument("--lambdas", default=None, help="comma list of lambda_1, lambda_2, ...")
    sp.add_argument("--eigs", default=None, help="eigen sequence JSON")
    sp.add_argument("--eigen-method", dest="eigen_method", default=None)
    sp.add_argument("--m-range", dest="m_range", default=None, help="lo:hi")
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("energy-audit", help="origin and linking-geometry audits")
    _common(sp)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--m", type=int, default=None)
    sp.set_defaults(func=cmd_energy_audit)

    sp = sub.add_parser("solve", help="search for k solution pairs at one lambda")
    _common(sp)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--nodes", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("scan", help="pair counts along a lambda grid")
    _common(sp)
    sp.add_argument("--lambdas", default=None)
    sp.add_argument("--m-max", dest="m_max", type=int, default=None)
    sp.add_argument("--nodes", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.set_defaults(func=cmd_scan)
    return ap


USAGE_ERRORS = (UsageError, ParameterError, MeshError, cio.FormatError, BracketError, ValueError, OSError)
SOLVER_ERRORS = (SolverError, EigenError, SobolevSelfTestError)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING)
    sub = ap._subparsers._group_actions[0].choices[ns.command]
    try:
        ns = merge_config(ns, sub)
        return ns.func(ns)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
