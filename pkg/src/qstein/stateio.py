"""JSON state files: ``{"dims": [...], "bipartition": [[a, b], ...], "matrix": [[[re, im], ...], ...]}``."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .tensor import SiteStructure, hermitian


def state_to_json(matrix, s: SiteStructure) -> str:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (s.total, s.total):
        raise ValueError(f"matrix shape {m.shape} does not match dims {s.dims}")
    if not np.all(np.isfinite(m)):
        raise ValueError("only finite entries can be written")
    doc = {"dims": list(s.dims)}
    if s.bipartition is not None:
        doc["bipartition"] = [list(p) for p in s.bipartition]
    doc["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in m]
    return json.dumps(doc)


def state_from_json(text: str, check_hermitian: bool = True) -> tuple[np.ndarray, SiteStructure]:
    doc = json.loads(text)
    s = SiteStructure(tuple(doc["dims"]), doc.get("bipartition"))
    rows = doc["matrix"]
    m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    if m.shape != (s.total, s.total):
        raise ValueError(f"matrix shape {m.shape} does not match dims {s.dims}")
    if not all(math.isfinite(x) for x in m.view(float).ravel()):
        raise ValueError("non-finite matrix entry")
    if check_hermitian:
        hermitian(m)
    return m, s


def write_state(path, matrix, s: SiteStructure):
    path = Path(path)
    try:
        path.write_text(state_to_json(matrix, s))
    except OSError as exc:
        raise OSError(f"cannot write state file {path}: {exc}") from exc


def read_state(path, hermitize: bool = True) -> tuple[np.ndarray, SiteStructure]:
    """Read a state file; with ``hermitize`` the matrix is replaced by its Hermitian part."""
    try:
        m, s = state_from_json(Path(path).read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"cannot parse state file {path}: {exc}") from exc
    if hermitize:
        m = hermitian(m)
    return m, s
