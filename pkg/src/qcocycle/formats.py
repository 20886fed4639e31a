"""File formats: JSON for operators and parameters, CSV for grid traces.

Complex numbers are encoded as two-element [re, im] arrays.  Floats are
written with shortest round-trip precision so load(save(x)) is bit exact.
"""

import csv
import json

import numpy as np

from .dilation import HPParams
from .generator import FormGenerator
from .linalg import SuperOperator, herm_residual
from .sim import CoherentFunction, MatrixElementTrace


class FormatError(ValueError):
    """A file failed schema validation."""


def _encode(arr: np.ndarray):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _decode(data, shape, name) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{name}: not a numeric array") from exc
    if arr.shape != shape + (2,):
        raise FormatError(f"{name}: shape {arr.shape}, expected {shape + (2,)}")
    return arr[..., 0] + 1j * arr[..., 1]


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be an object")
    return data


def _require(data: dict, key, path):
    if key not in data:
        raise FormatError(f"{path}: missing field '{key}'")
    return data[key]


def save_generator(path, gen: FormGenerator):
    doc = {
        "n": gen.n,
        "d": gen.d,
        "vec": "column",
        "blocks": {
            "scalar": _encode(gen.scalar.action),
            "up": [_encode(op.action) for op in gen.up],
            "down": [_encode(op.action) for op in gen.down],
            "matrix": [[_encode(op.action) for op in row] for row in gen.matrix],
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_generator(path) -> FormGenerator:
    data = _load_json(path)
    n = int(_require(data, "n", path))
    d = int(_require(data, "d", path))
    if _require(data, "vec", path) != "column":
        raise FormatError(f"{path}: field 'vec' must be 'column'")
    blocks = _require(data, "blocks", path)
    m2 = (n * n, n * n)
    wrap = lambda a: SuperOperator(a, n, n)
    try:
        scalar = wrap(_decode(_require(blocks, "scalar", path), m2, "scalar"))
        ups = _require(blocks, "up", path)
        downs = _require(blocks, "down", path)
        mats = _require(blocks, "matrix", path)
        if len(ups) != d or len(downs) != d or len(mats) != d:
            raise FormatError(f"{path}: block lists must have length d={d}")
        up = tuple(wrap(_decode(b, m2, f"up[{m}]")) for m, b in enumerate(ups))
        down = tuple(wrap(_decode(b, m2, f"down[{m}]")) for m, b in enumerate(downs))
        matrix = []
        for m, row in enumerate(mats):
            if len(row) != d:
                raise FormatError(f"{path}: matrix row {m} must have length d={d}")
            matrix.append(tuple(wrap(_decode(b, m2, f"matrix[{m}][{k}]"))
                                for k, b in enumerate(row)))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return FormGenerator(n, d, scalar, up, down, tuple(matrix))


def save_hp_params(path, params: HPParams):
    doc = {
        "n": params.n,
        "d": params.d,
        "r": params.r,
        "K": _encode(params.K),
        "H": _encode(params.H),
        "K_row": _encode(params.K_row),
        "kraus_L": _encode(params.kraus_L),
        "kraus_Lmat": _encode(params.kraus_Lmat),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_hp_params(path) -> HPParams:
    data = _load_json(path)
    n = int(_require(data, "n", path))
    d = int(_require(data, "d", path))
    r = int(_require(data, "r", path))
    K = _decode(_require(data, "K", path), (n, n), "K")
    H = _decode(_require(data, "H", path), (n, n), "H")
    if herm_residual(H) > 1e-10:
        raise FormatError(f"{path}: H is not Hermitian")
    K_row = _decode(_require(data, "K_row", path), (d, n, n), "K_row")
    kraus_L = _decode(_require(data, "kraus_L", path), (r, n, n), "kraus_L")
    kraus_Lmat = _decode(_require(data, "kraus_Lmat", path), (r, d, n, n), "kraus_Lmat")
    try:
        return HPParams(n, d, r, K, K_row, H, kraus_L, kraus_Lmat)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_observable(path, X: np.ndarray):
    X = np.asarray(X, dtype=complex)
    with open(path, "w") as fh:
        json.dump({"n": X.shape[0], "matrix": _encode(X)}, fh)


def load_observable(path) -> np.ndarray:
    data = _load_json(path)
    n = int(_require(data, "n", path))
    return _decode(_require(data, "matrix", path), (n, n), "matrix")


def save_coherent(path, f: CoherentFunction):
    doc = {"d": f.d, "T": f.T, "steps": f.steps, "values": _encode(f.values)}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_coherent(path) -> CoherentFunction:
    data = _load_json(path)
    d = int(_require(data, "d", path))
    T = float(_require(data, "T", path))
    steps = int(_require(data, "steps", path))
    values = _decode(_require(data, "values", path), (steps, d), "values")
    try:
        return CoherentFunction(d, T, values)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def trace_header(n: int, extra=()) -> list:
    cols = ["t"]
    cols += [f"re_{i}_{j}" for i in range(n) for j in range(n)]
    cols += [f"im_{i}_{j}" for i in range(n) for j in range(n)]
    cols += list(extra)
    return cols


def save_trace(path, trace: MatrixElementTrace, extra_columns: dict | None = None):
    """Write a grid trace as CSV: t, re entries row-major, im entries, extras."""
    n = trace.values.shape[1]
    extra = extra_columns or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n, extra.keys()))
        for k, t in enumerate(trace.times):
            row = [repr(float(t))]
            flat = trace.values[k].reshape(-1)
            row += [repr(float(x)) for x in flat.real]
            row += [repr(float(x)) for x in flat.imag]
            row += [repr(float(col[k])) for col in extra.values()]
            writer.writerow(row)


def load_trace(path) -> MatrixElementTrace:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc
    base = [c for c in header if c == "t" or c.startswith(("re_", "im_"))]
    n2 = (len(base) - 1) // 2
    n = int(round(np.sqrt(n2)))
    if base[0] != "t" or len(base) != 1 + 2 * n * n:
        raise FormatError(f"{path}: malformed trace header")
    try:
        data = np.array([[float(x) for x in row[:len(base)]] for row in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry") from exc
    times = data[:, 0]
    if np.any(np.diff(times) < 0):
        raise FormatError(f"{path}: time column must be monotone")
    re = data[:, 1:1 + n * n].reshape(-1, n, n)
    im = data[:, 1 + n * n:1 + 2 * n * n].reshape(-1, n, n)
    return MatrixElementTrace(times, re + 1j * im)
