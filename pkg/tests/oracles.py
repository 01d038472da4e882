"""Independent brute-force oracles used by the test suite.

These recompute results by direct definition (dense grid scan plus
bisection) without touching the production solver's critical-point
machinery, so agreement is a genuine cross-check of two different
algorithms rather than of one code path against itself.
"""

import numpy as np

from lipcmatch import to_transmittance

GRID_LO = 1e-9
GRID_HI = 1e9


def first_crossing_oracle(model, targets, probes, grid_size=1_000_000,
                          refine_iters=48):
    """Smallest k in [GRID_LO, GRID_HI] with h(k) = target, per channel.

    h(k) = A[ch] . t^k for probe transmittance t. Scans grid_size
    log-spaced scales for the first sign change of h - target, then bisects
    inside that cell. Shapes: targets, probes (N, 3) -> (N, 3).
    """
    targets = np.asarray(targets, dtype=np.float64)
    probes = np.asarray(probes, dtype=np.float64)
    n = targets.shape[0]
    lt_all = np.log(to_transmittance(model, probes))
    a_mat = np.asarray(model.a_matrix, dtype=np.float64)
    log_grid = np.linspace(np.log(GRID_LO), np.log(GRID_HI), grid_size)

    # Prefix certificate: |h(k) - h(0+)| <= sum|a| * (1 - e^(k*lt_min)),
    # h(0+) = row sum of A. Every grid point below k_start provably keeps
    # h above the target, so the scan may begin at k_start with the sign
    # at the preceding point known to be positive. No solver theory
    # involved, just the triangle inequality.
    abs_sum = np.abs(a_mat).sum(axis=1).max()
    margin = (a_mat.sum(axis=1)[None, :] - targets).min(axis=1)
    if (margin <= 0).any():
        raise ValueError("oracle expects targets below the zero-scale limit")
    k_start = -np.log1p(-np.minimum(margin / abs_sum, 0.5)) / \
        np.abs(lt_all).max(axis=1)
    s_start = np.clip(np.searchsorted(log_grid, np.log(k_start)) - 1, 1,
                      grid_size - 1)

    lo = np.full((n, 3), np.nan)
    hi = np.full((n, 3), np.nan)
    found = np.zeros((n, 3), dtype=bool)
    prev_above = np.ones((n, 3), dtype=bool)
    order = np.argsort(s_start)
    next_in = 0            # rows join the scan once the grid reaches them
    active = np.empty(0, dtype=np.int64)
    s = 1
    while s < grid_size and (len(active) or next_in < n):
        g = min(max(64, 4_000_000 // max(len(active), 1)), 32768)
        while next_in < n and s_start[order[next_in]] < s + g:
            active = np.append(active, order[next_in])
            next_in += 1
        # shrink after admissions so the work array stays within budget;
        # early-admitted rows just evaluate a few provably positive points
        g = max(64, min(g, 4_000_000 // max(len(active), 1)))
        ks = log_grid[s:s + g]
        z = np.exp(ks)[None, :, None] * lt_all[active, None, :]
        # exp underflows to exactly 0 below -745; clamping skips the
        # subnormal slow path without changing any value
        np.maximum(z, -745.0, out=z)
        e = np.exp(z, out=z)
        above = e @ a_mat.T > targets[active, None, :]
        flip = np.concatenate(
            [prev_above[active, None, :] != above[:, :1, :],
             above[:, :-1, :] != above[:, 1:, :]], axis=1)
        flip &= ~found[active][:, None, :]
        first = flip.argmax(axis=1)
        rows, chs = np.nonzero(flip.any(axis=1))
        kcol = np.concatenate([[log_grid[s - 1]], ks])
        gidx = first[rows, chs]
        lo[active[rows], chs] = kcol[gidx]
        hi[active[rows], chs] = kcol[gidx + 1]
        found[active[rows], chs] = True
        prev_above[active] = above[:, -1, :]
        active = active[~found[active].all(axis=1)]
        s += len(ks)
    if not found.all():
        raise RuntimeError(f"{int((~found).sum())} targets never crossed")

    for ch in range(3):
        sig_lo = ((np.exp(np.exp(lo[:, ch])[:, None] * lt_all)
                   @ a_mat[ch]) - targets[:, ch]) > 0
        a, b = lo[:, ch], hi[:, ch]
        for _ in range(refine_iters):
            mid = 0.5 * (a + b)
            dm = ((np.exp(np.exp(mid)[:, None] * lt_all) @ a_mat[ch])
                  - targets[:, ch]) > 0
            same = dm == sig_lo
            a = np.where(same, mid, a)
            b = np.where(same, b, mid)
        lo[:, ch], hi[:, ch] = a, b
    return np.exp(0.5 * (lo + hi))


def marginal_contact_oracle(f, g, m=256.0, grid_size=100_000,
                            refine_iters=60):
    """Brute-force k with m - m*(1-g/m)**k = f, elementwise.

    The scaled value is strictly increasing in k, so the first (and only)
    grid sign change brackets the root. f, g flat arrays -> same shape.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    f = np.clip(f, 1e-3, m - 1e-3)
    g = np.clip(g, 1e-3, m - 1e-3)
    log_grid = np.linspace(np.log(1e-6), np.log(1e6), grid_size)
    base = np.log1p(-g / m)

    # memory-light scan: evaluate in chunks along the grid
    lo = np.full(len(f), np.nan)
    hi = np.full(len(f), np.nan)
    found = np.zeros(len(f), dtype=bool)
    prev_k = log_grid[0]
    prev_d = m - m * np.exp(np.exp(log_grid[0]) * base) - f
    chunk = max(64, 2_000_000 // max(len(f), 1))
    for s in range(1, grid_size, chunk):
        ks = log_grid[s:s + chunk]
        dm = m - m * np.exp(np.exp(ks)[None, :] * base[:, None]) - f[:, None]
        dfull = np.concatenate([prev_d[:, None], dm], axis=1)
        flip = (dfull[:, :-1] > 0) != (dfull[:, 1:] > 0)
        flip[found] = False
        rows = flip.any(axis=1)
        first = flip.argmax(axis=1)
        kfull = np.concatenate([np.full((len(f), 1), prev_k),
                                np.broadcast_to(ks, (len(f), len(ks)))], axis=1)
        lo[rows] = kfull[rows, first[rows]]
        hi[rows] = kfull[rows, first[rows] + 1]
        found |= rows
        prev_k = kfull[0, -1]
        prev_d = dfull[:, -1]
        if found.all():
            break
    if not found.all():
        raise RuntimeError("marginal oracle: some targets never crossed")
    sig_lo = (m - m * np.exp(np.exp(lo) * base) - f) > 0
    for _ in range(refine_iters):
        mid = 0.5 * (lo + hi)
        dm = (m - m * np.exp(np.exp(mid) * base) - f) > 0
        same = dm == sig_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return np.exp(0.5 * (lo + hi))


def critical_points_oracle(lt, coeffs, grid_size=4609, refine_iters=48):
    """Zeros of h'(k) = sum_j coeffs[j]*lt[j]*exp(k*lt[j]) per row, found by
    a dense log-grid sign scan plus bisection. Returns (N, 2) ascending with
    NaN padding, the same contract as the production routine but none of its
    closed-form extremum analysis.

    The scan evaluates h' divided by exp(k * max_j lt[j]), which is positive
    and leaves the zeros and signs untouched while keeping the dominant term
    O(1). Evaluating the raw sum instead would underflow every term at large
    k and report a spurious sign change at the underflow boundary, where the
    true h' provably keeps the sign of its slowest-decaying term."""
    lt = np.asarray(lt, dtype=np.float64).reshape(-1, 3)
    n = lt.shape[0]
    c = lt * coeffs[None, :]                   # h'(k) = sum_j c[j] e^(k lt[j])
    dd = lt - lt.max(axis=1, keepdims=True)    # normalized exponents, <= 0
    grid = np.exp(np.linspace(np.log(GRID_LO), np.log(GRID_HI), grid_size))
    crit = np.full((n, 2), np.nan)
    chunk = max(8, 2_000_000 // grid_size)

    def dval(rows, k):
        z = np.maximum(k[..., None] * dd[rows], -745.0)
        return np.einsum("...j,...j->...", np.exp(z), c[rows])

    for s in range(0, n, chunk):
        rows_all = np.arange(s, min(s + chunk, n))
        d = dval(rows_all[None, :], grid[:, None])
        sg = np.where(d >= 0.0, 1.0, -1.0)
        flips = sg[1:] * sg[:-1] < 0
        nb = len(rows_all)
        first = flips.argmax(axis=0)
        has1 = flips.any(axis=0)
        flips2 = flips.copy()
        flips2[first, np.arange(nb)] = False
        second = flips2.argmax(axis=0)
        has2 = flips2.any(axis=0)
        for which, idx, has in ((0, first, has1), (1, second, has2)):
            if not has.any():
                continue
            rows = np.nonzero(has)[0]
            gi = idx[rows]
            a = np.log(grid[gi])
            b = np.log(grid[gi + 1])
            sa = sg[gi, rows]
            for _ in range(refine_iters):
                mid = 0.5 * (a + b)
                dm = dval(s + rows, np.exp(mid))
                sm = np.where(dm >= 0.0, 1.0, -1.0)
                same = sm == sa
                a = np.where(same, mid, a)
                b = np.where(same, b, mid)
            crit[s + rows, which] = np.exp(0.5 * (a + b))
    return crit


def tolerant_distance_oracle(k_lambda, k_mu, discard_per_side):
    """Per-side discard by explicit sorting: drop the discard_per_side
    smallest lower contacts and largest upper contacts, then ln(mu/lam)."""
    k_lambda = np.sort(np.asarray(k_lambda, dtype=np.float64))
    k_mu = np.sort(np.asarray(k_mu, dtype=np.float64))
    m = int(discard_per_side)
    lam = k_lambda[m]
    mu = k_mu[len(k_mu) - 1 - m]
    if mu < lam:
        return 0.0, lam, mu
    return float(np.log(mu / lam)), float(lam), float(mu)
