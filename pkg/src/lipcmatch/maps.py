"""Sliding-window distance maps, the correlation baseline, minima extraction.

Maps are computed in valid mode only: a window position is evaluated when the
whole probe footprint fits inside the image; everywhere else the map holds
NaN (the NOT-EVALUATED sentinel). Window positions refer to the probe anchor.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import MixingModel, clamp_gamut, ensure_image
from .pairdist import ToleranceSpec
from .solver import ProbeSolver

THREADS_ENV_VAR = "LIPCMATCH_THREADS"

# Memory cap for one strip of window copies, in window-pixels.
_STRIP_BUDGET = 4_000_000


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass(frozen=True)
class Probe:
    """A template image with an anchor offset locating the window centre."""

    image: np.ndarray
    anchor: tuple[int, int] | None = None  # (dx, dy); default floor(centre)

    def __post_init__(self):
        img = ensure_image(self.image)
        object.__setattr__(self, "image", img)
        h, w = img.shape[:2]
        anchor = self.anchor
        if anchor is None:
            anchor = ((w - 1) // 2, (h - 1) // 2)
            object.__setattr__(self, "anchor", anchor)
        dx, dy = anchor
        if not (0 <= dx < w and 0 <= dy < h):
            raise ValueError(f"anchor {anchor} outside probe bounds {(w, h)}")

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


@dataclass
class DistanceMap:
    """Scalar field over the target image; NaN marks NOT-EVALUATED positions."""

    values: np.ndarray                 # (H, W) float64
    valid_rect: tuple[int, int, int, int]   # x0, y0, w, h
    probe_size: tuple[int, int]        # w, h
    anchor: tuple[int, int]            # dx, dy
    tolerance_p: float | None = None
    zero_variance_events: int = 0      # correlation maps only

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def valid_slice(self) -> tuple[slice, slice]:
        x0, y0, w, h = self.valid_rect
        return slice(y0, y0 + h), slice(x0, x0 + w)


@dataclass(frozen=True)
class MatchPoint:
    position: tuple[int, int]          # (x, y) in image coordinates
    value: float
    rank: int


@dataclass(frozen=True)
class MatchSet:
    points: tuple[MatchPoint, ...]
    tolerance_p: float | None
    radius: int

    def positions(self) -> list[tuple[int, int]]:
        return [p.position for p in self.points]


def _valid_rect(image_shape, probe: Probe) -> tuple[int, int, int, int]:
    ih, iw = image_shape[:2]
    pw, ph = probe.width, probe.height
    if pw > iw or ph > ih:
        raise ValueError(f"probe {pw}x{ph} larger than image {iw}x{ih}")
    dx, dy = probe.anchor
    return (dx, dy, iw - pw + 1, ih - ph + 1)


def _windows_for_rows(f: np.ndarray, probe: Probe, a: int, b: int) -> np.ndarray:
    """Windows for map rows [a, b) as a (b-a, cols, P, 3) array."""
    ph, pw = probe.height, probe.width
    view = np.lib.stride_tricks.sliding_window_view(
        f[a:b + ph - 1], (ph, pw), axis=(0, 1))
    rows, cols = view.shape[:2]
    return np.ascontiguousarray(view.transpose(0, 1, 3, 4, 2)).reshape(
        rows, cols, ph * pw, 3)


def _strip_bounds(h: int, w: int, npx: int, threads: int) -> np.ndarray:
    """Row partition honouring both the thread count and the memory budget."""
    per_row = max(1, w * npx)
    strips = max(threads, int(np.ceil(h * per_row / _STRIP_BUDGET)), 1)
    strips = min(strips, h)
    return np.linspace(0, h, strips + 1).astype(int)


def _distance_strip(model: MixingModel, solver: ProbeSolver,
                    windows: np.ndarray, m_discard: int) -> np.ndarray:
    rows, cols, npx, _ = windows.shape
    targets = clamp_gamut(model, windows)
    k = np.empty((rows, cols, npx, 3))
    for ch in range(3):
        # cap at the curve's attainable maximum: pixels brighter than any
        # scaling of the probe pixel (possible after noise clamping) contact
        # at the bright extreme instead of failing the whole map
        capped = np.minimum(targets[..., ch], solver.max_attainable[ch])
        k[..., ch] = solver.solve_channel(capped, ch)
    same = (targets == solver.colours[None, None, :, :]).all(axis=3)
    if same.any():
        k[same] = 1.0
    k_lam = k.min(axis=3)
    k_mu = k.max(axis=3)
    if m_discard == 0:
        lam = k_lam.min(axis=2)
        mu = k_mu.max(axis=2)
    else:
        lam = np.partition(k_lam, m_discard, axis=2)[..., m_discard]
        mu = np.partition(k_mu, npx - 1 - m_discard, axis=2)[..., npx - 1 - m_discard]
    d = np.log(mu / lam)
    if m_discard > 0:
        d = np.maximum(d, 0.0)   # over-discard degenerates to 0
    return d


def asplund_map(model: MixingModel, f: np.ndarray, probe: Probe,
                tol: ToleranceSpec | None = None,
                threads: int | None = None) -> DistanceMap:
    """Sandwich-distance map of f against the probe, valid positions only.

    Deterministic and independent of the thread count and strip layout:
    strips are pure elementwise work on disjoint output rows, with no state
    carried between window positions.
    """
    f = ensure_image(f)
    rect = _valid_rect(f.shape, probe)
    x0, y0, w, h = rect
    npx = probe.width * probe.height
    m = tol.discard_count(npx) if tol is not None else 0
    if m >= npx:
        raise ValueError("tolerance would discard every probe pixel")
    solver = ProbeSolver(model, clamp_gamut(model, probe.image.reshape(-1, 3)))

    out = np.full(f.shape[:2], np.nan)
    target = out[y0:y0 + h, x0:x0 + w]
    n_threads = default_threads() if threads is None else max(1, int(threads))
    bounds = _strip_bounds(h, w, npx, n_threads)

    def work(i: int):
        a, b = bounds[i], bounds[i + 1]
        return i, _distance_strip(model, solver,
                                  _windows_for_rows(f, probe, a, b), m)

    n_strips = len(bounds) - 1
    if n_threads == 1:
        for i in range(n_strips):
            _, strip = work(i)
            target[bounds[i]:bounds[i + 1]] = strip
    else:
        with ThreadPoolExecutor(max_workers=min(n_threads, n_strips)) as pool:
            for i, strip in pool.map(work, range(n_strips)):
                target[bounds[i]:bounds[i + 1]] = strip
    return DistanceMap(values=out, valid_rect=rect,
                       probe_size=(probe.width, probe.height),
                       anchor=probe.anchor,
                       tolerance_p=tol.discard_fraction if tol else None)


def asplund_map_tol(model: MixingModel, f: np.ndarray, probe: Probe,
                    tol: ToleranceSpec, threads: int | None = None) -> DistanceMap:
    """Tolerant map; pointwise at most the p=0 map."""
    return asplund_map(model, f, probe, tol=tol, threads=threads)


def correlation_map(f: np.ndarray, probe: Probe,
                    threads: int | None = None) -> DistanceMap:
    """Zero-normalized cross-correlation baseline, mean over channels.

    Values in [-1, 1]; windows (or templates) with zero variance in a channel
    contribute 0 for that channel and are counted in zero_variance_events.
    The threads argument is accepted for interface parity; the computation is
    cheap enough to run single-strip.
    """
    f = ensure_image(f)
    probe_img = ensure_image(probe.image)
    rect = _valid_rect(f.shape, probe)
    x0, y0, w, h = rect
    npx = probe.width * probe.height

    tflat = probe_img.reshape(-1, 3)
    tcent = tflat - tflat.mean(axis=0)
    tnorm = np.sqrt((tcent ** 2).sum(axis=0))

    out = np.full(f.shape[:2], np.nan)
    zv = 0
    bounds = _strip_bounds(h, w, npx, 1)
    for i in range(len(bounds) - 1):
        a, b = bounds[i], bounds[i + 1]
        wins = _windows_for_rows(f, probe, a, b)
        cent = wins - wins.mean(axis=2, keepdims=True)
        wnorm = np.sqrt((cent ** 2).sum(axis=2))
        dot = np.einsum("rcpk,pk->rck", cent, tcent)
        denom = wnorm * tnorm[None, None, :]
        ok = denom > 0
        zv += int((~ok).sum())
        per_ch = np.where(ok, dot / np.where(ok, denom, 1.0), 0.0)
        out[y0 + a:y0 + b, x0:x0 + w] = per_ch.mean(axis=2)
    return DistanceMap(values=out, valid_rect=rect,
                       probe_size=(probe.width, probe.height),
                       anchor=probe.anchor, tolerance_p=None,
                       zero_variance_events=zv)


def extract_minima(dmap: DistanceMap, radius: int = 1, max_count: int = 64,
                   threshold: float = np.inf) -> MatchSet:
    """Strict regional minima of the map, ranked ascending by value.

    A position qualifies when its value is <= every neighbour in the
    (2*radius+1)**2 window, at least one neighbour is strictly greater (so
    constant regions yield nothing), and it is first in row-major order among
    equal-valued neighbours. NaN neighbours are ignored.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    v = dmap.values
    hh, ww = v.shape
    r = radius
    padded = np.full((hh + 2 * r, ww + 2 * r), np.nan)
    padded[r:r + hh, r:r + ww] = v

    with np.errstate(invalid="ignore"):
        cand = np.isfinite(v) & (v <= threshold)
        any_greater = np.zeros_like(cand)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dy == 0 and dx == 0:
                    continue
                nb = padded[r + dy:r + dy + hh, r + dx:r + dx + ww]
                cand &= np.isnan(nb) | (v <= nb)
                any_greater |= nb > v
                if dy < 0 or (dy == 0 and dx < 0):
                    cand &= ~(nb == v)
    cand &= any_greater

    ys, xs = np.nonzero(cand)
    vals = v[ys, xs]
    order = np.lexsort((xs, ys, vals))[:max_count]
    points = tuple(MatchPoint(position=(int(xs[i]), int(ys[i])),
                              value=float(vals[i]), rank=j + 1)
                   for j, i in enumerate(order))
    return MatchSet(points=points, tolerance_p=dmap.tolerance_p, radius=radius)
