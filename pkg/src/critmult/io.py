"""Serialization: JSON/CSV with round-trip-exact floats, function and eigen files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .eigen import EigenPair, EigenSequence
from .fem import FemFunction, P1Space


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    return obj


def dumps_json(obj) -> str:
    # Python's float repr is the shortest round-trip string, hence exact
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# FEM functions -------------------------------------------------------------


def function_record(u: FemFunction) -> dict:
    return {"mesh_checksum": u.space.mesh.checksum(), "coefficients": [float(x) for x in u.coefficients]}


def write_function(u: FemFunction, path) -> Path:
    return write_json(function_record(u), path)


def read_function(path, space: P1Space) -> FemFunction:
    rec = read_json(path)
    if rec.get("mesh_checksum") != space.mesh.checksum():
        raise FormatError("function file was written for a different mesh")
    c = np.asarray(rec["coefficients"], dtype=float)
    if c.shape != (space.ndofs,):
        raise FormatError("coefficient count does not match the space")
    return FemFunction(c, space)


# eigen sequences ---------------------------------------------------------------


def write_eigen_sequence(seq: EigenSequence, directory, stem: str = "eigs") -> Path:
    """EigenSequence JSON plus one coefficient file per pair."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pairs = []
    for k, pair in enumerate(seq.pairs, start=1):
        name = f"{stem}_phi{k}.json"
        write_function(pair.function, directory / name)
        pairs.append({"m": k, "value": pair.value, "residual": pair.residual, "function_file": name})
    rec = {
        "mesh_checksum": seq.mesh_id,
        "p": seq.p,
        "method": seq.method,
        "notes": dict(seq.notes),
        "pairs": pairs,
    }
    return write_json(rec, directory / f"{stem}.json")


def read_eigen_values(path) -> tuple:
    """(values, method, mesh_checksum) without loading the functions."""
    rec = read_json(path)
    try:
        vals = [float(p["value"]) for p in rec["pairs"]]
        return vals, rec["method"], rec.get("mesh_checksum")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed eigen file: {exc}") from exc


def read_eigen_sequence(path, space: P1Space) -> EigenSequence:
    path = Path(path)
    rec = read_json(path)
    if rec.get("mesh_checksum") != space.mesh.checksum():
        raise FormatError("eigen file was written for a different mesh")
    pairs = []
    for p in rec["pairs"]:
        u = read_function(path.parent / p["function_file"], space)
        pairs.append(EigenPair(float(p["value"]), u, float(p["residual"])))
    return EigenSequence(tuple(pairs), float(rec["p"]), rec["method"], rec["mesh_checksum"], dict(rec.get("notes", {})))
