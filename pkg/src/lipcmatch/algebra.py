"""Transmittance-domain colour algebra: addition and scalar scaling.

Addition multiplies transmittances (stacking absorbing layers); scaling by
k exponentiates them (k copies of the same layer). Both accept any (..., 3)
array, so pixels and whole images share one code path.
"""

from __future__ import annotations

import numpy as np

from .model import (ClampDiagnostics, MixingModel, from_transmittance,
                    to_transmittance)


def white_neutral(model: MixingModel) -> np.ndarray:
    """The neutral element of addition: the unit-transmittance colour."""
    t = np.full(3, 1.0 - model.eps_t)
    return from_transmittance(model, t)


def lipc_add(model: MixingModel, f: np.ndarray, g: np.ndarray,
             diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Colourwise sum of two images (or pixels) of identical shape."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape}")
    tf = to_transmittance(model, f, diag)
    tg = to_transmittance(model, g, diag)
    return from_transmittance(model, tf * tg, diag)


def lipc_scalar_mul(model: MixingModel, alpha: float, f: np.ndarray,
                    diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Scale an image (or pixel) by alpha > 0.

    alpha = 1 is the identity; alpha in (0,1) brightens and alpha > 1
    darkens wherever the colour lies in the monotone subdomain (see
    solver.scaling_is_monotone; this is not guaranteed gamut-wide).
    """
    if not np.isscalar(alpha) or not np.isfinite(alpha) or alpha <= 0:
        raise ValueError(f"alpha must be a positive finite scalar, got {alpha!r}")
    t = to_transmittance(model, f, diag)
    # np.power, not **: the operator's fast path for exponents like 2.0
    # rounds differently from the pow loop the row variant broadcasts into
    return from_transmittance(model, np.power(t, float(alpha)), diag)


def lipc_scalar_mul_rows(model: MixingModel, alphas: np.ndarray, f: np.ndarray,
                         diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Scale each image row by its own alpha; used by the lighting-drift model."""
    f = np.asarray(f, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if f.ndim != 3 or alphas.shape != (f.shape[0],):
        raise ValueError("need an (H, W, 3) image and one alpha per row")
    if not (np.isfinite(alphas).all() and (alphas > 0).all()):
        raise ValueError("row alphas must be positive and finite")
    t = to_transmittance(model, f, diag)
    return from_transmittance(model, np.power(t, alphas[:, None, None]), diag)
