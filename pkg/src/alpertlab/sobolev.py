"""Dyadic, difference and continuous Sobolev norms plus their comparisons.

The homogeneous dyadic norm sums ell(Q)^{-2s} |coefficient|^2 over all cubes
of the grid strictly above the leaves; the root coarse energy is carried
separately by WaveletCoefficients and excluded unless asked for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import DyadicCube, DyadicGrid
from .leaffunc import LeafFunction
from .measure import DiscreteMeasure, DoublingReport
from .wavelet import WaveletCoefficients, get_system


@dataclass
class SobolevParams:
    s: float
    kappa: int
    grid: DyadicGrid

    def __post_init__(self):
        if abs(self.s) >= 1.0:
            raise ValueError("|s| must be < 1")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")

    def check_regime(self, doubling: DoublingReport) -> None:
        if abs(self.s) > doubling.theta_rev / 2.0:
            warnings.warn(
                f"|s|={abs(self.s):.3g} exceeds theta_rev/2={doubling.theta_rev / 2:.3g}; "
                "outside the norm-equivalence regime",
                stacklevel=2,
            )


@dataclass
class EquivalenceReport:
    ratio_min: float
    ratio_max: float
    norm_a: str
    norm_b: str
    ensemble: str
    skipped: int = 0


def norm_dyadic(coeffs: WaveletCoefficients, s: float, include_coarse: bool = False) -> float:
    """Homogeneous dyadic Sobolev norm sqrt(sum ell(Q)^{-2s} |f_hat(Q)|^2)."""
    acc = 0.0
    for q, v in coeffs.entries.items():
        acc += 4.0 ** (s * q.depth) * float(np.dot(v, v))
    if include_coarse and len(coeffs.coarse):
        acc += float(np.dot(coeffs.coarse, coeffs.coarse))
    return float(np.sqrt(acc))


def root_energy(coeffs: WaveletCoefficients) -> float:
    """L2 norm of the root coarse part, reported separately from the norm."""
    return float(np.sqrt(np.dot(coeffs.coarse, coeffs.coarse))) if len(coeffs.coarse) else 0.0


def duality_pairing(
    f: WaveletCoefficients, g: WaveletCoefficients, include_coarse: bool = False
) -> float:
    """L2(mu) pairing via matched projections: sum_Q <Delta_Q f, Delta_Q g>."""
    if f.grid != g.grid or f.kappa != g.kappa:
        raise ValueError("pairing requires matching grid and kappa")
    acc = 0.0
    for q, v in f.entries.items():
        w = g.entries.get(q)
        if w is not None:
            acc += float(np.dot(v, w))
    if include_coarse and len(f.coarse) and len(g.coarse):
        acc += float(np.dot(f.coarse, g.coarse))
    return acc


def norm_difference(measure: DiscreteMeasure, f: LeafFunction, s: float, kappa: int) -> float:
    """Difference norm: sum over cubes of int_Q |f - E_Q f|^2 / ell(Q)^{2s} dmu.

    The residual f - E_Q f is integrated blockwise to avoid the
    f^2 - (E f)^2 cancellation.
    """
    if s <= 0:
        raise ValueError("the difference norm requires s > 0")
    from ._poly import local_product_moments

    system = get_system(measure, kappa)
    grid = measure.grid
    acc = 0.0
    for d in range(0, grid.max_depth + 1):
        weight = 4.0 ** (s * d)
        for q in grid.cubes_at_depth(d):
            if measure.cube_mass(q) <= 0:
                continue
            _, fit = system.project_E(q, f, kappa)
            resid = (f - fit).restrict(q)
            sl = tuple(slice(lo, hi) for lo, hi in q.leaf_span())
            P = local_product_moments(measure.n, resid.local_kappa)
            A = resid.coeffs[sl].reshape(-1, P.shape[0])
            dens = measure.density[sl].reshape(-1)
            val = measure.leaf_volume * float(np.einsum("lm,mk,lk,l->", A, P, A, dens))
            acc += weight * max(val, 0.0)
    return float(np.sqrt(acc))


# ------------------------------------------------------------------ continuous norm


def _circle_quarter_area(x: np.ndarray, y: np.ndarray, r: float) -> np.ndarray:
    """Area of {(u,v): u<=x, v<=y, u^2+v^2 <= r^2} for a circle centered at 0."""
    x = np.clip(np.asarray(x, dtype=float), -r, r)
    y = np.clip(np.asarray(y, dtype=float), -r, r)

    def F(u):
        u = np.clip(u, -r, r)
        return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(np.clip(u / r, -1, 1)))

    a = np.sqrt(np.maximum(r * r - y * y, 0.0))
    pos = y >= 0
    # y >= 0 branch
    lo1 = np.minimum(x, -a)
    seg1 = 2.0 * (F(lo1) - F(-r))
    hi2 = np.minimum(x, a)
    seg2 = np.where(x > -a, y * (hi2 + a) + F(hi2) - F(-a), 0.0)
    seg3 = np.where(x > a, 2.0 * (F(x) - F(a)), 0.0)
    area_pos = seg1 + seg2 + seg3
    # y < 0 branch: integrand max(0, y + s(u)) supported on |u| <= a
    hi = np.minimum(x, a)
    area_neg = np.where(x > -a, y * (hi + a) + F(hi) - F(-a), 0.0)
    return np.where(pos, area_pos, np.maximum(area_neg, 0.0))


def ball_mass(measure: DiscreteMeasure, center: Sequence[float], radius: float) -> float:
    """Mass of the Euclidean ball against the piecewise-constant density."""
    if radius <= 0:
        return 0.0
    if measure.n == 1:
        return measure.interval_mass_1d(center[0] - radius, center[0] + radius)
    grid = measure.grid
    h = grid.leaf_side
    nl = grid.n_leaves
    x0 = max(int(np.floor((center[0] - radius) / h)), 0)
    x1 = min(int(np.ceil((center[0] + radius) / h)), nl)
    y0 = max(int(np.floor((center[1] - radius) / h)), 0)
    y1 = min(int(np.ceil((center[1] + radius) / h)), nl)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    xs = np.arange(x0, x1 + 1) * h - center[0]
    ys = np.arange(y0, y1 + 1) * h - center[1]
    G = _circle_quarter_area(xs[:, None], ys[None, :], radius)
    areas = G[1:, 1:] - G[:-1, 1:] - G[1:, :-1] + G[:-1, :-1]
    dens = measure.density[x0:x1, y0:y1]
    return float(np.sum(np.maximum(areas, 0.0) * dens))


def norm_continuous(measure: DiscreteMeasure, f: LeafFunction, s: float) -> float:
    """Double-integral Sobolev norm with measure-adapted ball normalization.

    Quadrature uses leaf centers and exact leaf masses; equal-cell pairs drop
    out because f is treated as piecewise constant.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("the continuous norm requires 0 < s < 1")
    vals = f.values().reshape(-1)
    masses = measure.leaf_masses.reshape(-1)
    grid = measure.grid
    h = grid.leaf_side
    if measure.n == 1:
        centers = (np.arange(grid.n_leaves) + 0.5) * h
        keep = masses > 0
        c, v, m = centers[keep], vals[keep], masses[keep]
        acc = 0.0
        for i in range(len(c)):
            d = np.abs(c[i] - c[i + 1 :])
            dv = v[i] - v[i + 1 :]
            if not len(d):
                continue
            mids = 0.5 * (c[i] + c[i + 1 :])
            bm = np.array(
                [measure.interval_mass_1d(mi - di / 2, mi + di / 2) for mi, di in zip(mids, d)]
            )
            ok = (bm > 0) & (dv != 0)
            acc += 2.0 * float(
                np.sum((dv[ok] / d[ok] ** s) ** 2 * m[i] * m[i + 1 :][ok] / bm[ok])
            )
        return float(np.sqrt(acc))
    nl = grid.n_leaves
    gx, gy = np.meshgrid(np.arange(nl), np.arange(nl), indexing="ij")
    centers = np.stack([(gx + 0.5) * h, (gy + 0.5) * h], axis=-1).reshape(-1, 2)
    keep = masses > 0
    c, v, m = centers[keep], vals[keep], masses[keep]
    acc = 0.0
    for i in range(len(c)):
        diff = c[i + 1 :] - c[i]
        d = np.sqrt(np.sum(diff**2, axis=1))
        dv = v[i] - v[i + 1 :]
        for j in np.flatnonzero(dv != 0):
            mid = 0.5 * (c[i] + c[i + 1 + j])
            bm = ball_mass(measure, mid, d[j] / 2.0)
            if bm > 0:
                acc += 2.0 * (dv[j] / d[j] ** s) ** 2 * m[i] * m[i + 1 + j] / bm
    return float(np.sqrt(acc))


# ------------------------------------------------------------------ comparisons


def equivalence_ratio(
    norm_a: Callable[[LeafFunction], float],
    norm_b: Callable[[LeafFunction], float],
    ensemble: Sequence[LeafFunction],
    names: tuple[str, str] = ("a", "b"),
    description: str = "",
) -> EquivalenceReport:
    """Min/max of norm_a/norm_b over an ensemble, skipping zero-norm members."""
    if not len(ensemble):
        raise ValueError("empty ensemble")
    ratios = []
    skipped = 0
    for f in ensemble:
        na, nb = norm_a(f), norm_b(f)
        if na <= 1e-14 or nb <= 1e-14:
            skipped += 1
            continue
        ratios.append(na / nb)
    if not ratios:
        raise ValueError("all ensemble members had zero norm")
    return EquivalenceReport(
        ratio_min=float(min(ratios)),
        ratio_max=float(max(ratios)),
        norm_a=names[0],
        norm_b=names[1],
        ensemble=description or f"{len(ensemble)} functions",
        skipped=skipped,
    )


def make_ensemble(
    measure: DiscreteMeasure,
    kappa: int,
    count: int,
    rng: np.random.Generator,
    support: tuple[float, float] = (0.25, 0.75),
) -> list[LeafFunction]:
    """Mixed test ensemble: random wavelet combinations, indicators, smooth samples.

    Supports are kept inside the given window so comparisons against mildly
    shifted grids are not polluted by clipped boundary cubes.
    """
    grid = measure.grid
    system = get_system(measure, kappa)
    nl = grid.n_leaves
    lo_frac, hi_frac = support
    cubes = [
        q
        for q in grid.cubes(1, grid.max_depth - 1)
        if all(lo_frac * nl <= a and b <= hi_frac * nl for a, b in q.leaf_span())
    ]
    out: list[LeafFunction] = []
    for i in range(count):
        kind = i % 3
        if kind == 0 and cubes:
            picks = rng.choice(len(cubes), size=min(4, len(cubes)), replace=False)
            f = LeafFunction.zeros(grid, kappa)
            for p in picks:
                basis = system.basis(cubes[p])
                if basis.dim == 0:
                    continue
                w = rng.standard_normal(basis.dim)
                f = f + basis.combine(grid, w)
            out.append(f)
        elif kind == 1 and cubes:
            q = cubes[rng.integers(len(cubes))]
            vals = np.zeros((nl,) * grid.dimension)
            vals[tuple(slice(a, b) for a, b in q.leaf_span())] = 1.0
            out.append(LeafFunction.from_values(grid, vals))
        else:
            h = grid.leaf_side
            ax = (np.arange(nl) + 0.5) * h
            k1 = int(rng.integers(1, 5))
            phase = rng.uniform(0, 2 * np.pi)
            window = ((ax >= lo_frac) & (ax < hi_frac)).astype(float)
            if grid.dimension == 1:
                vals = np.sin(2 * np.pi * k1 * ax + phase) * window
            else:
                k2 = int(rng.integers(1, 5))
                vals = (
                    np.sin(2 * np.pi * k1 * ax + phase)[:, None]
                    * np.cos(2 * np.pi * k2 * ax)[None, :]
                    * window[:, None]
                    * window[None, :]
                )
            out.append(LeafFunction.from_values(grid, vals))
    return out


def make_wavelet_ensemble(
    measure: DiscreteMeasure,
    kappa: int,
    count: int,
    rng: np.random.Generator,
    picks: int = 5,
) -> list[LeafFunction]:
    """Random wavelet combinations: mean-free test functions with zero coarse part.

    This matches the reduction under which corona estimates are stated (the
    top polynomial components of f are removed first).
    """
    grid = measure.grid
    system = get_system(measure, kappa)
    cubes = [q for q in grid.cubes(0, grid.max_depth - 1) if not q.is_clipped]
    out = []
    for _ in range(count):
        f = LeafFunction.zeros(grid, kappa)
        for qi in rng.choice(len(cubes), size=min(picks, len(cubes)), replace=False):
            basis = system.basis(cubes[qi])
            if basis.dim:
                f = f + basis.combine(grid, rng.standard_normal(basis.dim))
        out.append(f)
    return out


def indicator_tower_sum(measure: DiscreteMeasure, q: DyadicCube, s: float) -> float:
    """Truncated tower sum sum_m 2^{m|s|} |Q|_mu / |pi^m Q|_mu.

    For measures supported well inside the box this grows without bound as
    the tower lengthens, witnessing failure of dyadic reverse doubling.
    """
    base = measure.cube_mass(q)
    if base <= 0:
        raise ValueError("cube has zero mass")
    acc = 0.0
    for m in range(1, q.depth + 1):
        anc = q.ancestor(m)
        acc += 2.0 ** (m * abs(s)) * base / measure.cube_mass(anc)
    return acc


def alternating_function(grid: DyadicGrid, n_pairs: int) -> LeafFunction:
    """f = sum_{k=1}^{2N} (-1)^k on the first 2N leaves (n=1)."""
    if grid.dimension != 1:
        raise ValueError("the alternating family is one-dimensional")
    if 2 * n_pairs > grid.n_leaves:
        raise ValueError("not enough leaves")
    vals = np.zeros(grid.n_leaves)
    for k in range(1, 2 * n_pairs + 1):
        vals[k - 1] = (-1) ** k
    return LeafFunction.from_values(grid, vals)


def modulus_asymmetry_slope(
    measure: DiscreteMeasure, s: float, n_values: Sequence[int]
) -> tuple[float, list[float]]:
    """Log-log slope of ||f|_{W^{-s}}|^2 ratio growth for the alternating family.

    Returns (slope, ratios); the expected slope is 2s.
    """
    system = get_system(measure, 1)
    ratios = []
    for n_pairs in n_values:
        f = alternating_function(measure.grid, n_pairs)
        fabs = LeafFunction.from_values(measure.grid, np.abs(f.values()))
        num = norm_dyadic(system.analyze(fabs), -s) ** 2
        den = norm_dyadic(system.analyze(f), -s) ** 2
        ratios.append(num / den)
    slope = float(np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(ratios), 1)[0])
    return slope, ratios
