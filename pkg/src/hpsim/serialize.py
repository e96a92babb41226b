"""JSON file formats for maps, specs, decompositions, states and observables.

Complex matrices are nested lists of ``[re, im]`` pairs.  Floats are
written with 12 significant digits so repeated runs give identical files.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from hpsim import linalg as la
from hpsim.decompose import QpdDecomposition, TwistedChannel
from hpsim.errors import HpsimError
from hpsim.maps import ExtractionSpec, KrausSet, MapRep


class FormatError(HpsimError, ValueError):
    """A file does not follow the expected schema."""


def _num(x: float) -> float:
    return float(f"{float(x):.12g}")


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError("matrix entries must be [re, im] pairs") from exc
    if a.ndim == 2:  # real matrix written without imaginary parts
        return a.astype(complex)
    if a.ndim != 3 or a.shape[2] != 2:
        raise FormatError(f"matrix has shape {a.shape[:-1]} and is not a list of [re, im] rows")
    return a[..., 0] + 1j * a[..., 1]


def _field(obj, key, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"missing field {key!r}")
    v = obj[key]
    if kind is not None and not isinstance(v, kind):
        raise FormatError(f"field {key!r} has the wrong type")
    return v


# --- maps and specs ---------------------------------------------------------


def map_to_json(m: MapRep) -> dict:
    return {"dim_in": m.dim_in, "dim_out": m.dim_out, "choi": encode_matrix(m.choi)}


def map_from_json(obj) -> MapRep:
    return MapRep(int(_field(obj, "dim_in", int)), int(_field(obj, "dim_out", int)),
                  decode_matrix(_field(obj, "choi", list)))


def spec_to_json(s: ExtractionSpec) -> dict:
    return {"d": s.d, "indices": list(s.indices), "pairs": [list(p) for p in s.pairs]}


def spec_from_json(obj) -> ExtractionSpec:
    pairs = _field(obj, "pairs", list)
    if any(not isinstance(p, list) or len(p) != 2 for p in pairs):
        raise FormatError("pairs must be [j, k] lists")
    return ExtractionSpec(int(_field(obj, "d", int)), tuple(_field(obj, "indices", list)),
                          tuple(tuple(p) for p in pairs))


# --- decompositions ---------------------------------------------------------


def _kraus_to_json(k: KrausSet) -> list:
    return [encode_matrix(op) for op in k.kraus]


def _kraus_from_json(ops, dim_in, dim_out) -> KrausSet:
    return KrausSet(dim_in, dim_out, tuple(decode_matrix(op) for op in ops))


def twisted_to_json(t: TwistedChannel) -> dict:
    return {"kind": "twisted", "dim_in": t.dim_in, "dim_out": t.dim_out, "scale": _num(t.scale),
            "branches": [{"sign": s, "kraus": _kraus_to_json(k)} for s, k in t.branches]}


def twisted_from_json(obj) -> TwistedChannel:
    da, db = int(_field(obj, "dim_in", int)), int(_field(obj, "dim_out", int))
    branches = [(int(_field(b, "sign", int)), _kraus_from_json(_field(b, "kraus", list), da, db))
                for b in _field(obj, "branches", list)]
    return TwistedChannel(float(_field(obj, "scale", (int, float))), tuple(branches))


def qpd_to_json(d: QpdDecomposition) -> dict:
    return {"kind": "qpd", "dim_in": d.dim_in, "dim_out": d.dim_out,
            "terms": [{"alpha": _num(a), "kraus": _kraus_to_json(k)} for a, k in d.terms]}


def qpd_from_json(obj) -> QpdDecomposition:
    da, db = int(_field(obj, "dim_in", int)), int(_field(obj, "dim_out", int))
    terms = [(float(_field(t, "alpha", (int, float))), _kraus_from_json(_field(t, "kraus", list), da, db))
             for t in _field(obj, "terms", list)]
    return QpdDecomposition(tuple(terms))


def decomposition_from_json(obj):
    """Twisted channel or QPD, told apart by their fields."""
    if isinstance(obj, dict) and "branches" in obj:
        return twisted_from_json(obj)
    if isinstance(obj, dict) and "terms" in obj:
        return qpd_from_json(obj)
    raise FormatError("not a decomposition: expected 'branches' or 'terms'")


# --- states and observables -------------------------------------------------

OBSERVABLES = {
    "i": la.PAULI_I,
    "x": la.PAULI_X,
    "y": la.PAULI_Y,
    "z": la.PAULI_Z,
    "xyzi": la.PAULI_X + la.PAULI_Y + la.PAULI_Z + la.PAULI_I,
}


def observable(name_or_obj) -> np.ndarray:
    """Registry shorthand (``x``, ``y``, ``z``, ``i``, ``xyzi``) or a JSON object with a ``matrix``."""
    if isinstance(name_or_obj, str):
        key = name_or_obj.lower()
        if key not in OBSERVABLES:
            raise FormatError(f"unknown observable {name_or_obj!r}; known: {sorted(OBSERVABLES)}")
        return OBSERVABLES[key].copy()
    return decode_matrix(_field(name_or_obj, "matrix", list))


def matrix_to_json(m) -> dict:
    return {"matrix": encode_matrix(m)}


def state_from_json(obj) -> np.ndarray:
    """``{"matrix": ...}`` for a density matrix or ``{"vector": [[re, im], ...]}`` for a pure state."""
    if isinstance(obj, dict) and "vector" in obj:
        v = np.asarray(obj["vector"], dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise FormatError("vector entries must be [re, im] pairs")
        psi = v[:, 0] + 1j * v[:, 1]
        return np.outer(psi, psi.conj())
    return decode_matrix(_field(obj, "matrix", list))


# --- files -------------------------------------------------------------------


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file renamed on success."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".hpsim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
