"""Checkpoint files: JSON documents of named parameters.

Parameters live under ``"parameters"`` as ``name -> {"shape", "values"}``
with row-major values. Any extra metadata passed to :func:`save` is stored
alongside under ``"meta"``.
"""

import json
import os
import tempfile

import numpy as np

from ..errors import FormatError


def dump_parameters(named):
    return {
        name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
        for name, p in sorted(named.items())
    }


def save(path, named, meta=None):
    doc = {"meta": meta or {}, "parameters": dump_parameters(named)}
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".ckpt-", suffix=".json")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid checkpoint JSON: {exc}", path=path) from exc
    if not isinstance(doc, dict) or "parameters" not in doc:
        raise FormatError("checkpoint has no 'parameters' section", path=path)
    return doc


def restore(named, entries, path=None):
    """Copy ``entries`` into the parameters of ``named``.

    Every name and shape is validated before anything is written, so a
    failed restore leaves the model untouched.
    """
    missing = sorted(set(named) - set(entries))
    extra = sorted(set(entries) - set(named))
    if missing or extra:
        raise FormatError(f"checkpoint parameters differ from model: missing={missing} unexpected={extra}", path=path)
    staged = {}
    for name, p in named.items():
        entry = entries[name]
        shape = tuple(entry.get("shape", ()))
        if shape != p.data.shape:
            raise FormatError(f"parameter {name}: shape {list(shape)} != model {list(p.data.shape)}", path=path)
        values = np.asarray(entry.get("values", []), dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise FormatError(f"parameter {name}: {values.size} values for shape {list(shape)}", path=path)
        staged[name] = values.reshape(shape)
    for name, values in staged.items():
        named[name].data[...] = values
