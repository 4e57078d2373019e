"""JSON encoding of states and matrices.

Layout::

    {"header": {... metadata ..., "basis_order": "colex"},
     "shape": [rows, cols],
     "data": [[re, im], ...]}          # row-major

Floats go through ``repr`` so a dump/load round trip is bit-identical.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channels import ChoiOperator, Direction, Isometry, UnitaryCompletion
from .states import DensityMatrix, SymState

BASIS_ORDER = "colex"


def encode_array(a: np.ndarray, **header) -> dict:
    a = np.asarray(a, dtype=np.complex128)
    flat = a.reshape(-1)
    header = {k: (v.value if isinstance(v, Direction) else v) for k, v in header.items()}
    header.setdefault("basis_order", BASIS_ORDER)
    return {
        "header": header,
        "shape": list(a.shape),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def decode_array(doc: dict) -> np.ndarray:
    data = np.asarray(doc["data"], dtype=float).reshape(-1, 2)
    return (data[:, 0] + 1j * data[:, 1]).reshape(doc["shape"])


def encode_isometry(V: Isometry) -> dict:
    return encode_array(V.matrix, kind="isometry", N=V.N, M=V.M, d=V.d, k=V.k, direction=V.direction)


def decode_isometry(doc: dict) -> Isometry:
    h = doc["header"]
    direction = None if h.get("direction") is None else Direction(h["direction"])
    return Isometry(decode_array(doc), h["N"], h["M"], h["d"], h.get("k"), direction)


def encode_choi(R: ChoiOperator, k: int | None = None) -> dict:
    return encode_array(R.matrix, kind="choi", N=R.N, M=R.M, d=R.d, k=k, direction=R.direction)


def decode_choi(doc: dict) -> ChoiOperator:
    h = doc["header"]
    return ChoiOperator(h["N"], h["M"], h["d"], h.get("direction"), matrix=decode_array(doc))


def encode_unitary(U: UnitaryCompletion, **meta) -> dict:
    doc = encode_array(U.unitary, kind="unitary", **meta)
    doc["header"]["input_columns"] = list(U.input_columns)
    doc["header"]["ancilla_index"] = U.ancilla_index
    return doc


def decode_unitary(doc: dict) -> UnitaryCompletion:
    h = doc["header"]
    return UnitaryCompletion(decode_array(doc), tuple(h["input_columns"]), h["ancilla_index"])


def encode_state(x) -> dict:
    if isinstance(x, SymState):
        return encode_array(x.amplitudes, kind="symstate", N=x.N, d=x.d)
    return encode_array(x.entries, kind="density", N=x.N, d=x.d)


def decode_state(doc: dict):
    h = doc["header"]
    if h["kind"] == "symstate":
        return SymState(h["N"], h["d"], decode_array(doc))
    return DensityMatrix(decode_array(doc), N=h.get("N"), d=h.get("d"))


def dump(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc))


def load(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
