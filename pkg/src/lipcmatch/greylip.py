"""Marginal grey-level scaling and the channelwise sandwich distance.

Each channel is treated as an independent grey image with the classical
grey-tone scaling k (x) g = M - M * (1 - g/M)**k, which is strictly
increasing in k. The marginal distance scales one image until it sandwiches
the other per channel and returns the log-ratio of the extreme scales.
"""

from __future__ import annotations

import numpy as np

from .model import EPS_GAMUT, M_DEFAULT


def _clamp(values: np.ndarray, m: float) -> np.ndarray:
    return np.clip(values, EPS_GAMUT, m - EPS_GAMUT)


def lip_scalar_mul(k: float, g: np.ndarray, m: float = M_DEFAULT) -> np.ndarray:
    """Grey-tone scaling M - M*(1 - g/M)**k, clamped; increasing in k."""
    if not np.isfinite(k) or k <= 0:
        raise ValueError(f"k must be a positive finite scalar, got {k!r}")
    g = _clamp(np.asarray(g, dtype=np.float64), m)
    return _clamp(m - m * (1.0 - g / m) ** k, m)


def grey_critical_scale(f: np.ndarray, g: np.ndarray,
                        m: float = M_DEFAULT) -> np.ndarray:
    """The unique k with lip_scalar_mul(k, g) == f, elementwise.

    Closed form: ln(1 - f/M) / ln(1 - g/M). Inputs are clamped strictly
    inside (0, M) first, so both logs are finite and nonzero.
    """
    f = _clamp(np.asarray(f, dtype=np.float64), m)
    g = _clamp(np.asarray(g, dtype=np.float64), m)
    return np.log1p(-f / m) / np.log1p(-g / m)


def marginal_asplund_distance(f: np.ndarray, g: np.ndarray,
                              z: np.ndarray | None = None,
                              m: float = M_DEFAULT) -> float:
    """Channelwise sandwich distance between two colour images over region z.

    lam is the largest per-(pixel, channel) critical scale, mu the smallest;
    the distance ln(lam/mu) is zero exactly when one image is a common
    grey-tone scaling of the other on z.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    scales = grey_critical_scale(f, g, m).reshape(-1, 3)
    if z is not None:
        z = np.asarray(z)
        if z.dtype == bool:
            z = np.nonzero(z.ravel())[0]
        if z.size == 0:
            raise ValueError("region z must be nonempty")
        scales = scales[z]
    lam = scales.max()
    mu = scales.min()
    return float(np.log(lam / mu))
