"""Distance-map serialization.

A map is stored as a pair of files sharing a base path:

  <base>.json   header: width, height, valid_rect, probe_size, anchor,
                tolerance_p, plus bookkeeping for the data and preview files
  <base>.f64    little-endian 64-bit floats, row-major over the full map,
                NOT-EVALUATED positions encoded as quiet NaN (lossless)

and optionally

  <base>.pgm    16-bit binary PGM preview (P5, maxval 65535, big-endian
                samples per the format), values affinely scaled to the full
                range over the valid rectangle; the affine parameters are
                recorded in the header so approximate values can be read back
                from the preview alone. NaN positions render as 0.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .maps import DistanceMap

_HEADER_SUFFIX = ".json"
_DATA_SUFFIX = ".f64"
_PREVIEW_SUFFIX = ".pgm"


def save_distance_map(dmap: DistanceMap, base_path: str,
                      preview: bool = True) -> dict:
    """Writes header + raw data (+ preview); returns the header dict."""
    values = np.asarray(dmap.values, dtype=np.float64)
    header = {
        "width": int(values.shape[1]),
        "height": int(values.shape[0]),
        "valid_rect": [int(v) for v in dmap.valid_rect],
        "probe_size": [int(v) for v in dmap.probe_size],
        "anchor": [int(v) for v in dmap.anchor],
        "tolerance_p": (None if dmap.tolerance_p is None
                        else float(dmap.tolerance_p)),
        "data_file": os.path.basename(base_path) + _DATA_SUFFIX,
    }
    with open(base_path + _DATA_SUFFIX, "wb") as fh:
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    if preview:
        lo, span = _write_pgm16(values, dmap, base_path + _PREVIEW_SUFFIX)
        header["preview"] = {
            "file": os.path.basename(base_path) + _PREVIEW_SUFFIX,
            "offset": lo,
            "span": span,   # value = offset + sample / 65535 * span
        }
    with open(base_path + _HEADER_SUFFIX, "w") as fh:
        json.dump(header, fh, indent=2)
        fh.write("\n")
    return header


def load_distance_map(base_path: str) -> DistanceMap:
    """Reconstructs a map bit-for-bit from header + raw data."""
    with open(base_path + _HEADER_SUFFIX) as fh:
        header = json.load(fh)
    w, h = int(header["width"]), int(header["height"])
    data_path = os.path.join(os.path.dirname(base_path) or ".",
                             header["data_file"])
    with open(data_path, "rb") as fh:
        raw = fh.read()
    values = np.frombuffer(raw, dtype="<f8")
    if values.size != w * h:
        raise ValueError(
            f"data file holds {values.size} samples, header says {w * h}")
    values = values.reshape(h, w).astype(np.float64)
    tol = header.get("tolerance_p")
    return DistanceMap(
        values=values,
        valid_rect=tuple(int(v) for v in header["valid_rect"]),
        probe_size=tuple(int(v) for v in header["probe_size"]),
        anchor=tuple(int(v) for v in header["anchor"]),
        tolerance_p=None if tol is None else float(tol),
    )


def _write_pgm16(values: np.ndarray, dmap: DistanceMap,
                 path: str) -> tuple[float, float]:
    ys, xs = dmap.valid_slice()
    region = values[ys, xs]
    finite = region[np.isfinite(region)]
    if finite.size:
        lo = float(finite.min())
        span = float(finite.max()) - lo
    else:
        lo, span = 0.0, 0.0
    if span > 0:
        scaled = (values - lo) / span * 65535.0
    else:
        scaled = np.zeros_like(values)
    scaled = np.where(np.isfinite(values),
                      np.clip(np.rint(scaled), 0, 65535), 0.0)
    samples = scaled.astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{values.shape[1]} {values.shape[0]}\n65535\n".encode())
        fh.write(samples.tobytes())
    return lo, span


def read_pgm16(path: str) -> np.ndarray:
    """Reads a binary 16-bit PGM back as uint16; for preview inspection."""
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # comments starting with # allowed between them
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 65535:
        raise ValueError(f"expected 16-bit PGM, maxval is {maxval}")
    i += 1   # single whitespace byte after maxval
    flat = np.frombuffer(data[i:i + 2 * w * h], dtype=">u2")
    if flat.size != w * h:
        raise ValueError("truncated PGM payload")
    return flat.reshape(h, w).astype(np.uint16)
