"""Colour mixing model: gamut/transmittance conversions and their constants.

All colour arithmetic in this package runs through a pair of fixed 3x3
matrices. B = Uinv @ K maps an RGB intensity triple into a transmittance
triple in (0,1); A = Kinv @ U maps back. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Gamut upper bound for 8-bit data mapped to real intensities.
M_DEFAULT = 256.0

# Clamp margins. Intensities live in [EPS_GAMUT, M - EPS_GAMUT], transmittances
# in [EPS_T, 1 - EPS_T]; the log/power machinery needs both strictly interior.
EPS_GAMUT = 1e-3
EPS_T = 1e-6

_K_RAW = np.array([
    [0.6991, 0.2109, 0.0899],
    [0.1947, 0.8002, 0.0049],
    [0.0681, 0.0002, 0.9315],
])

_U_RAW = np.array([
    [25.0440, 53.1416, 176.8144],
    [21.3002, 185.9744, 47.7254],
    [229.2474, 19.9944, 5.7583],
])

# Frozen regression value for min(A). A is NOT entrywise positive (its most
# negative entry is this one); construction re-derives A and checks against
# this constant so corrupted matrices are caught at startup.
A_MIN_ENTRY = -12.477900962704128

_COND_LIMIT = 1e8
_INV_TOL = 1e-12
_ROWSUM_TOL = 1e-3
_A_REGRESSION_TOL = 1e-9


class ModelConstructionError(ValueError):
    """Raised when the mixing-model constants fail their construction checks."""


@dataclass
class ClampDiagnostics:
    """Mutable counters for clamp events. Pass one per worker and merge."""

    gamut_clamps: int = 0
    transmittance_clamps: int = 0

    def merge(self, other: "ClampDiagnostics") -> None:
        self.gamut_clamps += other.gamut_clamps
        self.transmittance_clamps += other.transmittance_clamps

    def total(self) -> int:
        return self.gamut_clamps + self.transmittance_clamps


@dataclass(frozen=True)
class MixingModel:
    """Immutable bundle of the mixing constants and derived products."""

    m: float
    k_matrix: np.ndarray
    u_matrix: np.ndarray
    k_inv: np.ndarray
    u_inv: np.ndarray
    a_matrix: np.ndarray  # Kinv @ U, transmittance -> gamut
    b_matrix: np.ndarray  # Uinv @ K, gamut -> transmittance
    eps_gamut: float = EPS_GAMUT
    eps_t: float = EPS_T

    @property
    def gamut_lo(self) -> float:
        return self.eps_gamut

    @property
    def gamut_hi(self) -> float:
        return self.m - self.eps_gamut


def make_mixing_model(k_matrix: np.ndarray | None = None,
                      u_matrix: np.ndarray | None = None) -> MixingModel:
    """Build and validate the mixing model.

    The matrix arguments exist so verification can prove that perturbed
    constants are rejected; only the built-in constants pass validation.
    """
    k = np.array(_K_RAW if k_matrix is None else k_matrix, dtype=np.float64)
    u = np.array(_U_RAW if u_matrix is None else u_matrix, dtype=np.float64)
    if k.shape != (3, 3) or u.shape != (3, 3):
        raise ModelConstructionError("mixing matrices must be 3x3")

    for name, mat in (("K", k), ("U", u)):
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise ModelConstructionError(
                f"{name} is ill-conditioned (cond={cond:.3g} > {_COND_LIMIT:g}); "
                "constants look corrupted")

    k_inv = np.linalg.inv(k)
    u_inv = np.linalg.inv(u)
    if np.abs(k_inv @ k - np.eye(3)).max() > _INV_TOL:
        raise ModelConstructionError("Kinv @ K deviates from identity")
    if np.abs(u_inv @ u - np.eye(3)).max() > _INV_TOL:
        raise ModelConstructionError("Uinv @ U deviates from identity")

    rowsums = u.sum(axis=1)
    if np.abs(rowsums - (M_DEFAULT - 1.0)).max() > _ROWSUM_TOL:
        raise ModelConstructionError(
            f"U row sums {rowsums} deviate from {M_DEFAULT - 1.0} by more "
            f"than {_ROWSUM_TOL}")

    a = k_inv @ u
    b = u_inv @ k
    if abs(a.min() - A_MIN_ENTRY) > _A_REGRESSION_TOL:
        raise ModelConstructionError(
            f"min entry of Kinv @ U is {a.min()!r}, expected {A_MIN_ENTRY!r}; "
            "constants do not match the recorded model")

    for mat in (k, u, k_inv, u_inv, a, b):
        mat.setflags(write=False)
    return MixingModel(m=M_DEFAULT, k_matrix=k, u_matrix=u,
                       k_inv=k_inv, u_inv=u_inv, a_matrix=a, b_matrix=b)


def clamp_gamut(model: MixingModel, values: np.ndarray,
                diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Clip intensities to [eps_gamut, M - eps_gamut], counting events."""
    values = np.asarray(values, dtype=np.float64)
    out = np.clip(values, model.gamut_lo, model.gamut_hi)
    if diag is not None:
        diag.gamut_clamps += int(np.count_nonzero(out != values))
    return out


def to_transmittance(model: MixingModel, colours: np.ndarray,
                     diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Map (..., 3) intensities to transmittances via B, clamped to (0, 1).

    Saturated colours can land outside (0,1) under B; they are clamped rather
    than rejected so real images always process.
    """
    colours = np.asarray(colours, dtype=np.float64)
    raw = colours @ model.b_matrix.T
    out = np.clip(raw, model.eps_t, 1.0 - model.eps_t)
    if diag is not None:
        diag.transmittance_clamps += int(np.count_nonzero(out != raw))
    return out


def from_transmittance(model: MixingModel, t: np.ndarray,
                       diag: ClampDiagnostics | None = None) -> np.ndarray:
    """Map (..., 3) transmittances back to gamut intensities via A."""
    t = np.asarray(t, dtype=np.float64)
    raw = t @ model.a_matrix.T
    out = np.clip(raw, model.gamut_lo, model.gamut_hi)
    if diag is not None:
        diag.gamut_clamps += int(np.count_nonzero(out != raw))
    return out


def ensure_image(arr: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) float image array and return it as float64."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    return arr
