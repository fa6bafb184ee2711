"""File formats: GFIELD2 field dumps, binary PGM masks, CSV and JSON."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np


def write_gfield2(path, values, eps, x0, y0):
    """ASCII header ``GFIELD2 nx ny eps x0 y0`` then little-endian float64
    values, rows of constant ``y`` from the bottom up."""
    v = np.ascontiguousarray(values, dtype="<f8")
    ny, nx = v.shape
    with open(path, "wb") as fh:
        fh.write(f"GFIELD2 {nx} {ny} {float(eps)!r} {float(x0)!r} {float(y0)!r}\n".encode("ascii"))
        fh.write(v.tobytes())


def read_gfield2(path):
    """Returns ``(values, eps, x0, y0)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 6 or header[0] != "GFIELD2":
            raise ValueError(f"{path}: not a GFIELD2 file")
        nx, ny = int(header[1]), int(header[2])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {data.size}")
    return data.reshape(ny, nx).astype(float), float(header[3]), float(header[4]), float(header[5])


def write_pgm(path, bits):
    """Binary PGM: 0 where ``bits`` is set, 255 elsewhere.  The image's
    first row is the top of the window."""
    b = np.asarray(bits, dtype=bool)
    ny, nx = b.shape
    img = np.where(b, 0, 255).astype(np.uint8)[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path):
    """Inverse of :func:`write_pgm`: returns the boolean set mask."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    nx, ny = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(data[pos:pos + nx * ny], dtype=np.uint8).reshape(ny, nx)
    return img[::-1] == 0


def fmt(v):
    """Stable text form of a CSV cell."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        vals = [row[h] for h in header] if isinstance(row, dict) else list(row)
        w.writerow([fmt(v) for v in vals])
    return buf.getvalue()


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(header, rows))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json_text(obj))


CROSSING_HEADER = ("trial", "seed", "level", "scale", "event", "outcome")
TRACE_HEADER = ("run", "seed", "k", "output", "n_revealed")
