"""JSON wire formats for matrices, contexts and entropy-section samples.

Matrix:   ``{"dim": n, "entries": [[re, im], ...]}`` (row-major, n*n pairs)
Context:  ``{"dim": n, "projections": [<matrix>, ...]}`` or
          ``{"unitary": <matrix>, "partition": [[col, ...], ...]}``
Section:  ``{"dim": n, "kind": "shannon", "entries": [{"context": <context>, "value": x}, ...]}``
"""

import json
import os
import tempfile

import numpy as np

from .context import Context, context_from_projections, context_from_unitary
from .entropy import EntropySectionSample
from .errors import InvalidInput


class FormatError(InvalidInput):
    pass


def matrix_to_json(m) -> dict:
    a = np.asarray(getattr(m, "matrix", m), dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise FormatError("only square matrices are serialised")
    return {"dim": int(a.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in a.ravel()]}


def matrix_from_json(obj) -> np.ndarray:
    try:
        n = int(obj["dim"])
        entries = obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"matrix JSON needs 'dim' and 'entries': {exc}") from None
    if n < 1 or len(entries) != n * n:
        raise FormatError(f"matrix of dim {n} needs {n * n} entries, got {len(entries)}")
    try:
        vals = [complex(float(re), float(im)) for re, im in entries]
    except (TypeError, ValueError):
        raise FormatError("entries must be [re, im] pairs") from None
    return np.array(vals, dtype=complex).reshape(n, n)


def context_to_json(v: Context) -> dict:
    """Serialise as basis + partition (exact round trip of the representation)."""
    return {"unitary": matrix_to_json(v.basis), "partition": [list(g) for g in v.groups]}


def context_from_json(obj) -> Context:
    if "projections" in obj:
        ps = [matrix_from_json(p) for p in obj["projections"]]
        if "dim" in obj and any(p.shape[0] != int(obj["dim"]) for p in ps):
            raise FormatError("projection dimension disagrees with 'dim'")
        return context_from_projections(ps)
    if "unitary" in obj:
        u = matrix_from_json(obj["unitary"])
        partition = obj.get("partition") or [[i] for i in range(u.shape[0])]
        return context_from_unitary(u, partition)
    raise FormatError("context JSON needs 'projections' or 'unitary'")


def section_to_json(sample: EntropySectionSample) -> dict:
    return {"dim": sample.dim, "kind": sample.kind,
            "entries": [{"context": context_to_json(v), "value": float(x)} for v, x in sample.entries]}


def section_from_json(obj) -> EntropySectionSample:
    try:
        dim = int(obj["dim"])
        raw = obj["entries"]
    except (KeyError, TypeError, ValueError):
        raise FormatError("section JSON needs 'dim' and 'entries'") from None
    entries = []
    for e in raw:
        v = context_from_json(e["context"])
        if v.dim != dim:
            raise FormatError("section entry dimension disagrees with 'dim'")
        entries.append((v, float(e["value"])))
    return EntropySectionSample(dim, entries, obj.get("kind"))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_json(path, obj) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.fchmod(fd, 0o666 & ~umask)
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
