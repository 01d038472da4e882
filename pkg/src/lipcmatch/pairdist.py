"""Double-sided probing distances between colour pairs and image pairs.

For every pixel in the region and every channel, the probe colour is scaled
until it touches the target value; the distance is the log-ratio between the
largest and smallest contact scales. The tolerance variant discards the m
most constraining points per side (order statistics) before taking the
extremes, robustifying the sandwich against outliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (MixingModel, clamp_gamut, ensure_image,
                    from_transmittance, to_transmittance)
from .solver import contact_scales


@dataclass(frozen=True)
class ToleranceSpec:
    """Fraction of region points to discard on each side of the sandwich."""

    discard_fraction: float = 0.0
    side_policy: str = "per-side"

    def __post_init__(self):
        p = self.discard_fraction
        if not (isinstance(p, (int, float)) and 0.0 <= p < 1.0):
            raise ValueError(f"discard_fraction must be in [0, 1), got {p!r}")
        if self.side_policy != "per-side":
            raise ValueError(f"unsupported side policy {self.side_policy!r}")

    def discard_count(self, n_points: int) -> int:
        return int(np.floor(self.discard_fraction * n_points))


@dataclass(frozen=True)
class CriticalScaleSet:
    """Per-point contact records for one image pair over a region."""

    pixel_indices: np.ndarray    # (N,) flat indices into the image domain
    k_per_channel: np.ndarray    # (N, 3)
    k_lambda: np.ndarray         # (N,) min over channels
    k_mu: np.ndarray             # (N,) max over channels

    def __post_init__(self):
        k = self.k_per_channel
        if not (np.isfinite(k).all() and (k > 0).all()):
            raise ValueError("contact scales must be finite and positive")
        if (self.k_lambda > self.k_mu).any():
            raise ValueError("per-point k_lambda must not exceed k_mu")


@dataclass(frozen=True)
class ImagePairResult:
    distance: float
    lam: float                   # contact scale of the upper probe
    mu: float                    # contact scale of the lower probe
    scales: CriticalScaleSet


@dataclass(frozen=True)
class TolerantPairResult:
    distance: float
    lam: float
    mu: float
    discarded_low: np.ndarray    # indices (into the region) discarded on the lam side
    discarded_high: np.ndarray


def _region_indices(shape: tuple, z) -> np.ndarray:
    n = shape[0] * shape[1]
    if z is None:
        return np.arange(n)
    z = np.asarray(z)
    if z.dtype == bool:
        if z.shape != shape[:2]:
            raise ValueError("boolean region mask must match the image shape")
        idx = np.nonzero(z.ravel())[0]
    else:
        idx = z.ravel().astype(np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError("region indices out of bounds")
    if idx.size == 0:
        raise ValueError("region z must be nonempty")
    return idx


def colour_pair_distance(model: MixingModel, c1: np.ndarray,
                         c2: np.ndarray) -> float:
    """Sandwich distance between two colours (c2 is the probe)."""
    c1 = clamp_gamut(model, np.asarray(c1, dtype=np.float64).reshape(1, 3))
    c2 = clamp_gamut(model, np.asarray(c2, dtype=np.float64).reshape(1, 3))
    k = contact_scales(model, c1, c2)[0]
    return float(np.log(k.max() / k.min()))


def _pair_scales(model: MixingModel, f: np.ndarray, g: np.ndarray,
                 z) -> tuple[np.ndarray, CriticalScaleSet]:
    f = ensure_image(f)
    g = ensure_image(g)
    if f.shape != g.shape:
        raise ValueError(f"image shapes differ: {f.shape} vs {g.shape}")
    idx = _region_indices(f.shape, z)
    targets = clamp_gamut(model, f.reshape(-1, 3)[idx])
    probes = clamp_gamut(model, g.reshape(-1, 3)[idx])
    k = contact_scales(model, targets, probes)
    scales = CriticalScaleSet(pixel_indices=idx, k_per_channel=k,
                              k_lambda=k.min(axis=1), k_mu=k.max(axis=1))
    return idx, scales


def image_pair_distance(model: MixingModel, f: np.ndarray, g: np.ndarray,
                        z=None) -> ImagePairResult:
    """Region-wide sandwich distance; g is the probe image.

    lam (min contact) is the largest scale whose scaled probe still dominates
    f everywhere on z; mu (max contact) the smallest that is dominated by f.
    """
    _, scales = _pair_scales(model, f, g, z)
    lam = float(scales.k_lambda.min())
    mu = float(scales.k_mu.max())
    return ImagePairResult(distance=float(np.log(mu / lam)),
                           lam=lam, mu=mu, scales=scales)


def image_pair_distance_tol(model: MixingModel, f: np.ndarray, g: np.ndarray,
                            z=None, tol: ToleranceSpec | None = None
                            ) -> TolerantPairResult:
    """Tolerant variant: discard the m most constraining points per side.

    lam' is the (m+1)-th smallest per-point k_lambda, mu' the (m+1)-th
    largest per-point k_mu; with m = 0 this reproduces image_pair_distance
    bit for bit. Over-discard (mu' < lam') degenerates to distance 0.
    """
    tol = tol or ToleranceSpec()
    _, scales = _pair_scales(model, f, g, z)
    n = len(scales.k_lambda)
    m = tol.discard_count(n)
    if m >= n:
        raise ValueError(f"discard count {m} would empty the region of {n} points")
    lam = float(np.partition(scales.k_lambda, m)[m])
    mu = float(np.partition(scales.k_mu, n - 1 - m)[n - 1 - m])
    order_low = np.argsort(scales.k_lambda, kind="stable")[:m]
    order_high = np.argsort(-scales.k_mu, kind="stable")[:m]
    distance = float(np.log(mu / lam)) if mu >= lam else 0.0
    return TolerantPairResult(distance=distance, lam=lam, mu=mu,
                              discarded_low=scales.pixel_indices[order_low],
                              discarded_high=scales.pixel_indices[order_high])


def pixelwise_d1(model: MixingModel, f: np.ndarray, g: np.ndarray,
                 z=None) -> float:
    """Mean over z of the per-pixel colour-pair distances."""
    _, scales = _pair_scales(model, f, g, z)
    return float(np.mean(np.log(scales.k_mu / scales.k_lambda)))


def pixelwise_dinf(model: MixingModel, f: np.ndarray, g: np.ndarray,
                   z=None) -> float:
    """Max over z of the per-pixel colour-pair distances."""
    _, scales = _pair_scales(model, f, g, z)
    return float(np.max(np.log(scales.k_mu / scales.k_lambda)))


def is_neighbour(model: MixingModel, f: np.ndarray, g: np.ndarray,
                 epsilon: float, p: float = 0.0) -> bool:
    """True when the tolerant distance at discard fraction p is below epsilon."""
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    result = image_pair_distance_tol(model, f, g,
                                     tol=ToleranceSpec(discard_fraction=p))
    return bool(result.distance < epsilon)


def orbit_gap(model: MixingModel, c0: np.ndarray, c: np.ndarray) -> float:
    """Distance from colour c to the scaling orbit of c0.

    Evaluates max-channel |alpha (x) c0 - c| on a dense log grid of alpha and
    refines the best cell iteratively. Generic colour pairs are off-orbit
    (positive gap); an on-orbit pair returns ~0.
    """
    c0 = clamp_gamut(model, np.asarray(c0, dtype=np.float64).reshape(3))
    c = clamp_gamut(model, np.asarray(c, dtype=np.float64).reshape(3))
    t0 = to_transmittance(model, c0)

    def gaps(alphas: np.ndarray) -> np.ndarray:
        scaled = from_transmittance(model, t0[None, :] ** alphas[:, None])
        return np.abs(scaled - c[None, :]).max(axis=1)

    lo, hi = np.log(1e-6), np.log(1e6)
    grid = np.exp(np.linspace(lo, hi, 4001))
    g = gaps(grid)
    best = int(np.argmin(g))
    best_gap = float(g[best])
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    for _ in range(10):
        grid = np.exp(np.linspace(np.log(a), np.log(b), 65))
        g = gaps(grid)
        best = int(np.argmin(g))
        best_gap = min(best_gap, float(g[best]))
        a = grid[max(best - 1, 0)]
        b = grid[min(best + 1, len(grid) - 1)]
    return best_gap
