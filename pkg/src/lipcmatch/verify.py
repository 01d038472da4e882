"""Built-in verification suites: construction, algebra laws, solver-vs-grid
oracle agreement, scaling invariance, tolerance monotonicity.

The grid oracle here deliberately avoids the production solver's
critical-point machinery: it scans a dense logarithmic grid for the first
sign change of h(k) - target and bisects inside that cell. Agreement between
the two very different code paths is the point of the suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .algebra import lipc_add, lipc_scalar_mul, white_neutral
from .model import (ClampDiagnostics, ModelConstructionError, MixingModel,
                    _K_RAW, clamp_gamut, make_mixing_model, to_transmittance)
from .pairdist import ToleranceSpec, image_pair_distance, image_pair_distance_tol
from .solver import contact_scales
from .synthio import random_monotone_colours, random_monotone_image

_GRID_LO, _GRID_HI = 1e-9, 1e9


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def grid_first_contact(model: MixingModel, targets: np.ndarray,
                       probes: np.ndarray, grid_size: int,
                       refine_iters: int = 60) -> np.ndarray:
    """First-crossing contact scales by dense scan + in-cell bisection.

    targets, probes shaped (N, 3); returns (N, 3) scales.
    """
    targets = np.asarray(targets, dtype=np.float64)
    lt = np.log(to_transmittance(model, probes))
    n = targets.shape[0]
    log_grid = np.linspace(np.log(_GRID_LO), np.log(_GRID_HI), grid_size)
    out = np.empty((n, 3))
    chunk = max(1, 4_000_000 // max(n, 1))
    for ch in range(3):
        coeffs = model.a_matrix[ch]
        tv = targets[:, ch]
        lo = np.full(n, np.nan)
        hi = np.full(n, np.nan)
        prev_k = np.full(n, log_grid[0])
        prev_d = (np.exp(np.exp(log_grid[0]) * lt) @ coeffs) - tv
        found = np.zeros(n, dtype=bool)
        for s in range(1, grid_size, chunk):
            ks = log_grid[s:s + chunk]
            d = np.exp(np.exp(ks)[None, :, None] * lt[:, None, :]) @ coeffs
            d -= tv[:, None]
            dfull = np.concatenate([prev_d[:, None], d], axis=1)
            above = np.concatenate(
                [dfull[:, :-1] >= 0, dfull[:, -1:] > 0], axis=1)
            flip = above[:, :-1] != above[:, 1:]
            flip[found] = False
            rows = flip.any(axis=1)
            first = flip.argmax(axis=1)
            kfull = np.concatenate([prev_k[:, None],
                                    np.broadcast_to(ks, (n, len(ks)))], axis=1)
            lo[rows] = kfull[rows, first[rows]]
            hi[rows] = kfull[rows, first[rows] + 1]
            found |= rows
            prev_k = kfull[:, -1]
            prev_d = dfull[:, -1]
            if found.all():
                break
        if not found.all():
            raise RuntimeError(f"oracle found no crossing for "
                               f"{int((~found).sum())} targets on channel {ch}")
        for _ in range(refine_iters):
            mid = 0.5 * (lo + hi)
            dmid = (np.exp(np.exp(mid)[:, None] * lt) @ coeffs) - tv
            go_hi = (dmid >= 0)
            lo = np.where(go_hi, mid, lo)
            hi = np.where(go_hi, hi, mid)
        out[:, ch] = np.exp(0.5 * (lo + hi))
    return out


def _suite_construction() -> tuple[bool, str]:
    model = make_mixing_model()
    checks = [
        abs(model.m - 256.0) < 1e-12,
        np.allclose(model.k_inv @ model.k_matrix, np.eye(3), atol=1e-12),
        np.allclose(model.u_inv @ model.u_matrix, np.eye(3), atol=1e-12),
        np.all(np.abs(model.u_matrix.sum(axis=1) - 255.0) < 1e-3),
    ]
    negative_ok = False
    try:
        bad_k = np.array(_K_RAW)
        bad_k[0, 0] += 0.05
        make_mixing_model(k_matrix=bad_k)
    except ModelConstructionError:
        negative_ok = True
    checks.append(negative_ok)
    if not all(checks):
        return False, f"construction checks: {checks}"
    return True, "constants, inverses, row sums, perturbed-K control"


def _suite_algebra(model: MixingModel, rng, n: int) -> tuple[bool, str]:
    # The laws hold exactly only while no gamut or transmittance clamp fires
    # anywhere in the computation; near the gamut boundary the clamps break
    # them by construction. [80, 225] keeps every intermediate product of up
    # to three terms strictly interior; the diagnostics check makes that
    # assumption explicit instead of relying on lucky draws.
    diag = ClampDiagnostics()
    f = rng.uniform(80, 225, size=(n, 8, 3))
    g = rng.uniform(80, 225, size=(n, 8, 3))
    h = rng.uniform(80, 225, size=(n, 8, 3))
    worst = 0.0
    fg = lipc_add(model, f, g, diag)
    worst = max(worst, float(np.abs(fg - lipc_add(model, g, f, diag)).max()))
    assoc = np.abs(lipc_add(model, fg, h, diag)
                   - lipc_add(model, f, lipc_add(model, g, h, diag), diag)).max()
    worst = max(worst, float(assoc))
    if diag.total() > 0:
        return False, f"sampling box left the clamp-free subdomain ({diag})"
    if worst > 1e-9:
        return False, f"add laws off by {worst:.3e}"
    # the transmittance clamp at 1 - eps_t makes the neutral exact only to
    # f * eps_t, so the check is normalized by the gamut scale
    w = np.broadcast_to(white_neutral(model), f.shape)
    neut = float(np.abs(lipc_add(model, f, w)
                        - clamp_gamut(model, f)).max()) / model.m
    if neut > 1e-6:
        return False, f"neutral element off by {neut:.3e} of full scale"
    comp = float(np.abs(
        lipc_scalar_mul(model, 0.5, lipc_scalar_mul(model, 0.5, f))
        - lipc_scalar_mul(model, 0.25, f)).max())
    if comp > 1e-9:
        return False, f"scalar composition off by {comp:.3e}"
    return True, f"worst add {worst:.2e}, neutral {neut:.2e}, compose {comp:.2e}"


def _suite_oracle(model: MixingModel, rng, pairs: int,
                  grid: int) -> tuple[bool, str]:
    targets = rng.uniform(1, 254, size=(pairs, 3))
    probes = rng.uniform(1, 255, size=(pairs, 3))
    targets = clamp_gamut(model, targets)
    probes = clamp_gamut(model, probes)
    fast = contact_scales(model, targets, probes)
    slow = grid_first_contact(model, targets, probes, grid_size=grid)
    rel = np.abs(fast - slow) / np.abs(slow)
    worst = float(rel.max())
    return worst <= 1e-6, f"{pairs} pairs, worst relative gap {worst:.3e}"


def _suite_invariance(model: MixingModel, rng, images: int,
                      side: int) -> tuple[bool, str]:
    # invariance is exact only while no clamp fires: a pixel whose
    # transmittance hits a rail during scaling falls off its orbit. The
    # [30, 225] box keeps t**4 above the floor; redraw on the rare clamp.
    worst = 0.0
    for _ in range(images):
        for _ in range(50):
            f = random_monotone_image(model, rng, side, side,
                                      lo=30.0, hi=225.0)
            diag = ClampDiagnostics()
            to_transmittance(model, f, diag)
            scaled = [lipc_scalar_mul(model, a, f, diag)
                      for a in (0.25, 0.5, 2.0, 4.0)]
            if diag.total() == 0:
                break
        else:
            return False, "sampling box left the clamp-free subdomain"
        for s in scaled:
            worst = max(worst, image_pair_distance(model, s, f).distance)
    return worst <= 1e-7, f"{images} images x 4 scales, worst distance {worst:.3e}"


def _suite_tolerance(model: MixingModel, rng, pairs: int) -> tuple[bool, str]:
    ps = (0.0, 0.05, 0.1, 0.2, 0.3)
    for i in range(pairs):
        f = rng.uniform(1, 255, size=(1, 32, 3))
        g = rng.uniform(1, 255, size=(1, 32, 3))
        exact = image_pair_distance(model, f, g)
        prev = None
        for p in ps:
            r = image_pair_distance_tol(model, f, g,
                                        tol=ToleranceSpec(discard_fraction=p))
            if p == 0.0 and (r.distance != exact.distance
                             or r.lam != exact.lam or r.mu != exact.mu):
                return False, f"pair {i}: p=0 differs from the exact distance"
            if prev is not None and r.distance > prev + 1e-12:
                return False, (f"pair {i}: distance rose from {prev:.9f} "
                               f"to {r.distance:.9f} at p={p}")
            prev = r.distance
    return True, f"{pairs} pairs non-increasing over p grid {ps}"


def run_all(quick: bool = False, perturb_k: bool = False) -> list[SuiteResult]:
    """Runs every suite; with perturb_k the model under test is corrupted so
    the construction control must report the failure."""
    rng = np.random.default_rng(20260814)
    results: list[SuiteResult] = []

    def run(name, fn):
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:   # suite crash counts as failure
            passed, detail = False, f"exception: {exc}"
        results.append(SuiteResult(name, passed, detail,
                                   time.perf_counter() - t0))

    if perturb_k:
        def corrupted():
            bad_k = np.array(_K_RAW)
            bad_k[1, 1] *= 1.02
            make_mixing_model(k_matrix=bad_k)
            return True, "unexpectedly accepted a corrupted K matrix"
        run("construction", corrupted)
        return results

    run("construction", _suite_construction)
    model = make_mixing_model()
    run("algebra", lambda: _suite_algebra(model, rng, 16 if quick else 64))
    run("oracle", lambda: _suite_oracle(model, rng,
                                        pairs=100 if quick else 400,
                                        grid=20_000 if quick else 200_000))
    run("invariance", lambda: _suite_invariance(model, rng,
                                                images=3 if quick else 10,
                                                side=8 if quick else 16))
    run("tolerance", lambda: _suite_tolerance(model, rng,
                                              pairs=10 if quick else 50))
    return results
