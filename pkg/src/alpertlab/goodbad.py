"""Monte Carlo statistics for (r, eps)-good and bad cubes under grid shifts.

Shifts are sampled uniformly from the leaf lattice, a finite surrogate of
the continuum random-grid distribution; the decay slope in r, not the
constant, is the quantity under test.
"""

from __future__ import annotations

import numpy as np

from .grid import DyadicCube, GoodnessParams, is_good, make_grid
from .sobolev import norm_dyadic
from .wavelet import WaveletCoefficients


def _lattice_gap_vec(a: float, b: float, offsets: np.ndarray, step: float) -> np.ndarray:
    """Distance from [a, b] to the unbounded lattice {offset + k step : k in Z}.

    The random-grid surrogate covers the whole line (grids in the continuum
    tile R^n); clamping the lattice to the unit box would open coverage holes
    that make shifted cubes spuriously good.
    """
    u = np.mod(a - offsets, step)  # distance down to the nearest point <= a
    inside = (step - u) <= (b - a) + 1e-15
    d_above = np.maximum(step - u - (b - a), 0.0)
    d = np.minimum(u, d_above)
    return np.where(inside, 0.0, d)


def bad_probability_mc(
    r_values,
    eps: float,
    depth_gap: int,
    trials: int,
    seed: int,
    n: int = 1,
    lattice_depth: int | None = None,
) -> dict[int, float]:
    """Empirical badness probability of a fixed centered cube, per r.

    The test cube J sits at depth depth_gap in the center of the box; for
    each trial the reference grid is shifted uniformly on the leaf lattice
    and J is classified (r, eps)-bad when some grid cube I with
    side(I) >= 2^r side(J) has dist(e(I), J) <= (1/2) side(J)^eps side(I)^{1-eps}.
    Deterministic given (seed, trials).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    L = lattice_depth if lattice_depth is not None else depth_gap + 4
    rng = np.random.default_rng(seed)
    shifts = rng.integers(0, 1 << L, size=(trials, n))
    offsets = shifts * 2.0**-L
    side_j = 2.0**-depth_gap
    # J is the standard-lattice cube whose lower corner sits at the center
    lo = [0.5 for _ in range(n)]
    hi = [0.5 + side_j for _ in range(n)]
    out: dict[int, float] = {}
    for r in r_values:
        if r > depth_gap:
            out[int(r)] = 0.0
            continue
        bad = np.zeros(trials, dtype=bool)
        for d in range(0, depth_gap - r + 1):
            step = 2.0 ** -(d + 1)
            thr = 0.5 * side_j**eps * (2.0**-d) ** (1 - eps)
            gaps = np.full(trials, np.inf)
            for ax in range(n):
                g = _lattice_gap_vec(lo[ax], hi[ax], offsets[:, ax], step)
                gaps = np.minimum(gaps, g)
            bad |= gaps <= thr
        out[int(r)] = float(np.mean(bad))
    return out


def bad_probability_slope(estimates: dict[int, float]) -> float:
    """Fitted slope of log2 P(bad) against r over the positive estimates."""
    rs = np.array([r for r, p in estimates.items() if p > 0], dtype=float)
    ps = np.array([p for p in estimates.values() if p > 0])
    if len(rs) < 2:
        raise ValueError("not enough positive estimates to fit a slope")
    return float(np.polyfit(rs, np.log2(ps), 1)[0])


def split_projection(
    coeffs: WaveletCoefficients, reference, params: GoodnessParams, depth_cap: int = 0
) -> tuple[WaveletCoefficients, WaveletCoefficients]:
    """Split f into good and bad coefficient parts against a reference grid.

    P_good keeps the coefficients at cubes that are good relative to
    `reference`; P_bad f = f - P_good f exactly (the coarse part rides with
    the good projection).
    """
    good_entries, bad_entries = {}, {}
    for q, v in coeffs.entries.items():
        if is_good(q, reference, params, depth_cap):
            good_entries[q] = v.copy()
        else:
            bad_entries[q] = v.copy()
    good = WaveletCoefficients(
        kappa=coeffs.kappa, grid=coeffs.grid, entries=good_entries,
        coarse=coeffs.coarse.copy(), l2_sq=coeffs.l2_sq,
    )
    bad = WaveletCoefficients(
        kappa=coeffs.kappa, grid=coeffs.grid, entries=bad_entries,
        coarse=np.zeros(0), l2_sq=coeffs.l2_sq,
    )
    return good, bad


def bad_projection_norm_ratio(
    coeffs: WaveletCoefficients,
    s_values,
    params: GoodnessParams,
    trials: int,
    seed: int,
) -> dict[float, float]:
    """Monte Carlo mean of ||P_bad f|| / ||f|| in W^s over sampled grid shifts.

    f is analyzed once in its own (standard) grid; badness of each
    coefficient cube is classified against the sampled shifted grid.
    """
    grid = coeffs.grid
    rng = np.random.default_rng(seed)
    shifts = rng.integers(0, grid.n_leaves, size=(trials, grid.dimension))
    out = {float(s): 0.0 for s in s_values}
    for t in range(trials):
        ref = make_grid(grid.dimension, grid.max_depth, tuple(int(x) for x in shifts[t]))
        _, bad = split_projection(coeffs, ref, params)
        for s in s_values:
            denom = norm_dyadic(coeffs, s)
            ratio = norm_dyadic(bad, s) / denom if denom > 0 else 0.0
            out[float(s)] += ratio
    return {s: v / trials for s, v in out.items()}
