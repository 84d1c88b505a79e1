"""Portable JSON model file.

Fields: ``version, n, i, W1, b1, W2, b2, out_scale, norm``. Matrices are
nested row-major lists; every number is written with 17 significant digits
so a round trip is lossless.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import IOFailure, ParseFailure, TwinForgeError, VersionMismatch
from .model import Normalization, RomModel

FORMAT_VERSION = "twinforge-rom/1"


def _num(x: float) -> str:
    return "%.17g" % float(x)


def _vec(v) -> str:
    return "[" + ", ".join(_num(x) for x in v) + "]"


def _mat(a) -> str:
    return "[\n    " + ",\n    ".join(_vec(row) for row in a) + "\n  ]"


def model_to_json(model: RomModel) -> str:
    nm = model.norm
    norm = (
        "{"
        f'"y_offset": {_vec(nm.y_offset)}, "y_scale": {_vec(nm.y_scale)}, '
        f'"g_offset": {_num(nm.g_offset)}, "g_scale": {_num(nm.g_scale)}, '
        f'"t_offset": {_num(nm.t_offset)}, "t_span": {_num(nm.t_span)}'
        "}"
    )
    return (
        "{\n"
        f'  "version": "{FORMAT_VERSION}",\n'
        f'  "n": {model.n},\n'
        f'  "i": {model.i},\n'
        f'  "W1": {_mat(model.W1)},\n'
        f'  "b1": {_vec(model.b1)},\n'
        f'  "W2": {_mat(model.W2)},\n'
        f'  "b2": {_vec(model.b2)},\n'
        f'  "out_scale": {_num(model.out_scale)},\n'
        f'  "norm": {norm}\n'
        "}\n"
    )


def model_from_json(text: str) -> RomModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"model file is not JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseFailure("model file must hold a JSON object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model format {version!r}, expected {FORMAT_VERSION!r}")
    try:
        return RomModel(
            int(doc["n"]), int(doc["i"]),
            np.array(doc["W1"], dtype=float), np.array(doc["b1"], dtype=float),
            np.array(doc["W2"], dtype=float), np.array(doc["b2"], dtype=float),
            float(doc["out_scale"]), Normalization.from_dict(doc["norm"]),
        )
    except KeyError as exc:
        raise ParseFailure(f"model file lacks field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TwinForgeError):
            raise
        raise ParseFailure(f"malformed model field: {exc}") from None


def export_model(model: RomModel, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(model_to_json(model))
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(f"could not write model {path}: {exc}") from None


def import_model(path) -> RomModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"could not read model {path}: {exc}") from None
    return model_from_json(text)
