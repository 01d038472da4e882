"""Contact-scale root finding for the colour scaling curves.

For a probe colour with transmittance t and a mixing row a, the scaled value
in one channel is h(k) = sum_j a[j] * t[j]**k. With the shipped constants the
coefficients a are mixed-sign, so h is NOT guaranteed monotone: h' is a
3-term exponential sum and can have up to two real zeros, i.e. h has at most
three monotone pieces. The solver locates the piece boundaries once, then
walks pieces left to right and bisects inside the first piece that brackets
the target. That makes the returned root the FIRST crossing of the target
level, which is also what a dense-grid scan finds, and it keeps the upper
contact geometry exact: h stays above the target for every k below the root.
"""

from __future__ import annotations

import numpy as np

from .model import MixingModel, to_transmittance

K_LO = 1e-9
K_HI = 1e9
_LK_LO = np.log(K_LO)
_LK_HI = np.log(K_HI)

_BISECT_ITERS = 52      # ln-interval 41.45 / 2**52 ~ 9e-15, well under 1e-10 rel
_CRIT_ITERS = 48

_CHANNEL_INDEX = {"R": 0, "G": 1, "B": 2, 0: 0, 1: 1, 2: 2}


class SolverError(RuntimeError):
    """Raised when a target value is outside the closure of h's range."""


def _hprime(lt: np.ndarray, coeffs: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Values proportional to dh/dk at k; lt shaped (..., 3), k shaped (...)."""
    return (np.exp(k[..., None] * lt) * lt) @ coeffs


def _h(lt: np.ndarray, coeffs: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.exp(k[..., None] * lt) @ coeffs


def critical_points(lt: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Interior critical points of h per row of lt, as (N, 2) with NaN padding.

    Sorting the exponents and dividing h' by its slowest-decaying term leaves
    psi(k) = c1*exp(k*d1) + c2*exp(k*d2) + c3 with d1 <= d2 <= 0, whose
    derivative has at most one zero, at k* = ln(-c2*d2/(c1*d1)) / (d1 - d2).
    psi is therefore monotone on each side of k*, so evaluating it at the
    range ends and at k* brackets every zero of h' exactly; bisection inside
    the bracketed pieces recovers them. Points are returned in increasing
    order.
    """
    lt = np.asarray(lt, dtype=np.float64).reshape(-1, 3)
    n = lt.shape[0]
    order = np.argsort(lt, axis=1)
    u = np.take_along_axis(lt, order, axis=1)
    c = coeffs[order] * u
    d1 = u[:, 0] - u[:, 2]
    d2 = u[:, 1] - u[:, 2]
    c1, c2, c3 = c[:, 0], c[:, 1], c[:, 2]

    def psi(k, rows):
        z1 = np.maximum(k * d1[rows], -745.0)   # skip the subnormal exp path
        z2 = np.maximum(k * d2[rows], -745.0)
        return c1[rows] * np.exp(z1) + c2[rows] * np.exp(z2) + c3[rows]

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k_star = np.log(-(c2 * d2) / (c1 * d1)) / (d1 - d2)
    # an invalid or out-of-range extremum means psi is monotone on the range
    has_star = np.isfinite(k_star) & (k_star > K_LO) & (k_star < K_HI)

    every = np.arange(n)
    s_lo = np.where(psi(np.full(n, K_LO), every) >= 0.0, 1.0, -1.0)
    s_hi = np.where(psi(np.full(n, K_HI), every) >= 0.0, 1.0, -1.0)
    s_star = np.where(psi(np.where(has_star, k_star, 1.0), every) >= 0.0,
                      1.0, -1.0)

    left = has_star & (s_lo * s_star < 0)         # root in (K_LO, k*)
    right = has_star & (s_star * s_hi < 0)        # root in (k*, K_HI)
    single = ~has_star & (s_lo * s_hi < 0)        # monotone psi, one root

    rows = np.concatenate([np.nonzero(m)[0] for m in (left, right, single)])
    if len(rows) == 0:
        return np.full((n, 2), np.nan)
    la = np.concatenate([np.full(left.sum(), _LK_LO),
                         np.log(k_star[right]),
                         np.full(single.sum(), _LK_LO)])
    lb = np.concatenate([np.log(k_star[left]),
                         np.full(right.sum(), _LK_HI),
                         np.full(single.sum(), _LK_HI)])
    sa = np.concatenate([s_lo[left], s_star[right], s_lo[single]])
    for _ in range(_CRIT_ITERS):
        m = 0.5 * (la + lb)
        sm = np.where(psi(np.exp(m), rows) >= 0.0, 1.0, -1.0)
        same = sm == sa
        la = np.where(same, m, la)
        lb = np.where(same, lb, m)
    roots = np.exp(0.5 * (la + lb))

    crit = np.full((n, 2), np.nan)
    nl = int(left.sum())
    crit[rows[:nl], 0] = roots[:nl]               # left root is the smaller
    col = left[rows[nl:nl + int(right.sum())]].astype(int)
    crit[rows[nl:nl + int(right.sum())], col] = roots[nl:nl + int(right.sum())]
    crit[rows[nl + int(right.sum()):], 0] = roots[nl + int(right.sum()):]
    return crit


def first_contact(lt: np.ndarray, coeffs: np.ndarray, targets: np.ndarray,
                  crit: np.ndarray | None = None) -> np.ndarray:
    """First k in [K_LO, K_HI] with h(k) = target, elementwise.

    lt must broadcast to targets.shape + (3,); crit likewise to
    targets.shape + (2,) when precomputed (per-probe caching for maps).
    Raises SolverError if any target is never attained.
    """
    targets = np.asarray(targets, dtype=np.float64)
    lt = np.broadcast_to(np.asarray(lt, dtype=np.float64), targets.shape + (3,))
    if crit is None:
        crit = critical_points(lt.reshape(-1, 3), coeffs).reshape(targets.shape + (2,))
    else:
        crit = np.broadcast_to(np.asarray(crit, dtype=np.float64), targets.shape + (2,))

    shape = targets.shape
    edges = np.concatenate([
        np.full(shape + (1,), K_LO),
        np.where(np.isnan(crit), K_HI, crit),
        np.full(shape + (1,), K_HI),
    ], axis=-1)
    edges = np.sort(edges, axis=-1)
    hvals = np.stack([_h(lt, coeffs, edges[..., i]) for i in range(4)], axis=-1)

    lo = np.full(shape, np.nan)
    hi = np.full(shape, np.nan)
    found = np.zeros(shape, dtype=bool)
    for i in range(3):
        a = edges[..., i]
        b = edges[..., i + 1]
        above_a = hvals[..., i] - targets >= 0.0
        above_b = hvals[..., i + 1] - targets > 0.0
        take = ~found & (b > a) & (above_a != above_b)
        lo = np.where(take, a, lo)
        hi = np.where(take, b, hi)
        found |= take
    if not found.all():
        nbad = int((~found).sum())
        bad_t = targets[~found].ravel()[0]
        raise SolverError(
            f"{nbad} target value(s) outside the closure of the scaling "
            f"curve's range (example target {bad_t!r})")

    la = np.log(lo)
    lb = np.log(hi)
    sa = np.where(_h(lt, coeffs, lo) - targets >= 0.0, 1.0, -1.0)
    for _ in range(_BISECT_ITERS):
        m = 0.5 * (la + lb)
        hm = _h(lt, coeffs, np.exp(m))
        sm = np.where(hm - targets >= 0.0, 1.0, -1.0)
        same = sm == sa
        la = np.where(same, m, la)
        lb = np.where(same, lb, m)
    k = np.exp(0.5 * (la + lb))

    # One guarded Newton step; accepted only when it improves the residual
    # and stays inside the bracketing piece.
    ek = np.exp(k[..., None] * lt)
    resid = ek @ coeffs - targets
    dh = (ek * lt) @ coeffs
    with np.errstate(divide="ignore", invalid="ignore"):
        k_new = k - resid / dh
    inside = (k_new > lo) & (k_new < hi) & np.isfinite(k_new)
    k_new = np.where(inside, k_new, k)
    resid_new = _h(lt, coeffs, k_new) - targets
    return np.where(np.abs(resid_new) < np.abs(resid), k_new, k)


def lipc_critical_scale(model: MixingModel, probe_colour: np.ndarray,
                        target_value: float, channel) -> float:
    """The first scale k at which the scaled probe's channel equals target_value."""
    ch = _CHANNEL_INDEX[channel]
    t = to_transmittance(model, np.asarray(probe_colour, dtype=np.float64).reshape(1, 3))
    k = first_contact(np.log(t), model.a_matrix[ch],
                      np.asarray([float(target_value)]))
    return float(k[0])


def contact_scales(model: MixingModel, targets: np.ndarray,
                   probes: np.ndarray) -> np.ndarray:
    """Per-pixel per-channel contact scales, shape (N, 3).

    targets and probes are (N, 3) colour arrays; the probe colour at row i is
    scaled until each of its channels meets the matching target component.
    Rows where the two colours are bitwise equal short-circuit to k = 1
    (avoids tolerance-level wobble at the fixed point).
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    probes = np.asarray(probes, dtype=np.float64).reshape(-1, 3)
    if targets.shape != probes.shape:
        raise ValueError("targets and probes must have matching shapes")
    out = np.ones_like(targets)
    differs = (targets != probes).any(axis=1)
    if differs.any():
        lt = np.log(to_transmittance(model, probes[differs]))
        for ch in range(3):
            out[differs, ch] = first_contact(lt, model.a_matrix[ch],
                                             targets[differs, ch])
    return out


class ProbeSolver:
    """Caches per-probe-pixel curve pieces so window solves stay cheap.

    The piece boundaries of h depend only on the probe colour and channel,
    not on the target, so a sliding-window map can compute them once for the
    probe's pixels and reuse them for every window position.
    """

    def __init__(self, model: MixingModel, probe_colours: np.ndarray):
        self.model = model
        colours = np.asarray(probe_colours, dtype=np.float64).reshape(-1, 3)
        self.colours = colours
        self.log_t = np.log(to_transmittance(model, colours))
        self.crit = [critical_points(self.log_t, model.a_matrix[ch])
                     for ch in range(3)]
        # h is monotone between piece edges, so its maximum over the whole
        # scale range sits at an edge; shave a hair so capped targets always
        # bracket strictly
        n = len(colours)
        self.max_attainable = []
        for ch in range(3):
            edges = np.concatenate([
                np.full((n, 1), K_LO),
                np.where(np.isnan(self.crit[ch]), K_HI, self.crit[ch]),
                np.full((n, 1), K_HI)], axis=1)
            hv = _h(self.log_t[:, None, :], model.a_matrix[ch], edges)
            self.max_attainable.append(hv.max(axis=1) * (1.0 - 1e-12))

    def solve_channel(self, targets: np.ndarray, channel: int) -> np.ndarray:
        """targets shaped (..., P) where P == number of probe pixels."""
        return first_contact(self.log_t, self.model.a_matrix[channel],
                             targets, crit=self.crit[channel])


def scaling_is_monotone(model: MixingModel, colours: np.ndarray,
                        k_max: float = 100.0) -> np.ndarray:
    """True per colour when every channel curve strictly decreases on (0, k_max].

    This is the validity domain of the scaling algebra: outside it the
    mixed-sign mixing matrix makes some channel curve rise, contact scales
    stop being unique, and scale invariance of the distances degrades. On
    uniform random gamut colours a few percent fail this predicate.
    """
    colours = np.asarray(colours, dtype=np.float64).reshape(-1, 3)
    lt = np.log(to_transmittance(model, colours))
    ok = np.ones(len(colours), dtype=bool)
    for ch in range(3):
        coeffs = model.a_matrix[ch]
        ok &= _hprime(lt, coeffs, np.full(len(colours), K_LO)) < 0.0
        crit = critical_points(lt, coeffs)
        first = np.where(np.isnan(crit[:, 0]), np.inf, crit[:, 0])
        ok &= first > k_max
    return ok
