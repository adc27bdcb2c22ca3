"""Output writers: provenance-stamped CSV, 16-bit PGM and JSON summaries.

Every CSV starts with a comment line ``# seed=<seed> config_sha256=<hex>``
followed by the header row.  Floats are written with ``repr`` so they
round-trip exactly; line endings are LF.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], seed: int, config_sha256: str) -> Path:
    path = Path(path)
    lines = [f"# seed={seed} config_sha256={config_sha256}", ",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of ``write_csv``: (provenance dict, header, rows as strings)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
    return meta, lines[1].split(","), [ln.split(",") for ln in lines[2:]]


def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> Path:
    """Binary P5 greyscale image, 16-bit big-endian, scaled so the max is ``maxval``.

    Row 0 of ``image`` is written first (top of the picture).
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    peak = img.max() if img.size else 0.0
    scaled = np.zeros(img.shape) if peak <= 0 else img / peak * maxval
    data = np.rint(scaled).astype(">u2")
    h, w = data.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    path = Path(path)
    path.write_bytes(header + data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(x) for x in parts[1].split())
    maxval = int(parts[2])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[3], dtype=dtype).reshape(h, w)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        return f if math.isfinite(f) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, data: dict) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(data), sort_keys=True, indent=2)
    path.write_bytes((text + "\n").encode("utf-8"))
    return path
