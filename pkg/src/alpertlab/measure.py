"""Discretized locally finite Borel measures on the leaf mesh.

A measure is a nonnegative density, constant on each leaf cell, times
Lebesgue measure. Cube masses of lattice-aligned boxes are exact (prefix
sums), and monomial moments of the discretized measure are closed-form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._poly import axis_monomial_integrals
from .grid import DyadicCube, DyadicGrid


class DegenerateMeasureError(ValueError):
    pass


@dataclass
class DoublingReport:
    c_doub: float
    theta_doub: float
    theta_rev: float


class DiscreteMeasure:
    """Piecewise-constant density times Lebesgue measure on a dyadic grid.

    The density array is indexed leaf-by-leaf (row-major for n=2). Immutable
    after construction; the cube-mass prefix sums are built once.
    """

    def __init__(self, grid: DyadicGrid, density: np.ndarray, name: str = "table"):
        if not grid.is_standard:
            raise ValueError("measures are stored on the standard leaf mesh")
        density = np.asarray(density, dtype=float)
        shape = (grid.n_leaves,) * grid.dimension
        if density.shape != shape:
            raise ValueError(f"density shape {density.shape} != {shape}")
        if np.any(density < 0):
            raise ValueError("density must be nonnegative")
        if not np.any(density > 0):
            raise ValueError("measure must have positive total mass")
        self.grid = grid
        self.name = name
        self.density = density
        self.density.setflags(write=False)
        self.leaf_volume = grid.leaf_side**grid.dimension
        self.leaf_masses = density * self.leaf_volume
        self.leaf_masses.setflags(write=False)
        # integral image with a zero border so box sums are one expression
        pad = np.zeros(tuple(s + 1 for s in shape))
        pad[(slice(1, None),) * grid.dimension] = self.leaf_masses
        for ax in range(grid.dimension):
            np.cumsum(pad, axis=ax, out=pad)
        self._prefix = pad
        self.total_mass = float(self._prefix[(-1,) * grid.dimension])

    @property
    def n(self) -> int:
        return self.grid.dimension

    def mass_box(self, spans: tuple[tuple[int, int], ...]) -> float:
        """Exact mass of a leaf-aligned box given per-axis [lo, hi) leaf ranges."""
        nl = self.grid.n_leaves
        spans = tuple((min(max(lo, 0), nl), min(max(hi, 0), nl)) for lo, hi in spans)
        if any(lo >= hi for lo, hi in spans):
            return 0.0
        if self.n == 1:
            (lo, hi), = spans
            return float(self._prefix[hi] - self._prefix[lo])
        (x0, x1), (y0, y1) = spans
        p = self._prefix
        return float(p[x1, y1] - p[x0, y1] - p[x1, y0] + p[x0, y0])

    def cube_mass(self, q: DyadicCube) -> float:
        """|Q|_mu; shifted cubes are clipped to [0,1)^n."""
        return self.mass_box(q.leaf_span())

    def interval_mass_1d(self, a: float, b: float) -> float:
        """Exact mass of [a,b) against the piecewise-constant density (n=1)."""
        if self.n != 1:
            raise ValueError("interval_mass_1d is one-dimensional")
        h = self.grid.leaf_side
        nl = self.grid.n_leaves

        def cum(t: float) -> float:
            t = min(max(t, 0.0), 1.0)
            j = min(int(t / h), nl - 1)
            return float(self._prefix[j] + self.density[j] * (t - j * h))

        if b <= a:
            return 0.0
        return cum(b) - cum(a)

    def masked_leaf_masses(self, q: DyadicCube) -> np.ndarray:
        """Leaf-mass array zeroed outside Q (clipped to the box)."""
        out = np.zeros_like(self.leaf_masses)
        spans = q.clipped_leaf_span()
        sl = tuple(slice(lo, hi) for lo, hi in spans)
        out[sl] = self.leaf_masses[sl]
        return out


def lebesgue_measure(grid: DyadicGrid) -> DiscreteMeasure:
    return DiscreteMeasure(grid, np.ones((grid.n_leaves,) * grid.dimension), "lebesgue")


def power_measure(grid: DyadicGrid, exponents: float | tuple[float, ...]) -> DiscreteMeasure:
    """Density prod_i x_i^{a_i}, discretized with exact leaf masses; a_i > -1."""
    n = grid.dimension
    if isinstance(exponents, (int, float)):
        exponents = (float(exponents),) * n
    if len(exponents) != n:
        raise ValueError("one exponent per axis")
    if any(a <= -1 for a in exponents):
        raise DegenerateMeasureError(f"non-integrable exponent in {exponents}")
    h = grid.leaf_side
    nl = grid.n_leaves
    axes = []
    for a in exponents:
        edges = np.arange(nl + 1) * h
        masses = (edges[1:] ** (a + 1) - edges[:-1] ** (a + 1)) / (a + 1)
        axes.append(masses / h)
    dens = axes[0] if n == 1 else np.outer(axes[0], axes[1])
    label = ",".join(f"{a:g}" for a in exponents)
    return DiscreteMeasure(grid, dens, f"power({label})")


def cascade_measure(
    grid: DyadicGrid,
    seed: int,
    spread: float = 1.0 / 6.0,
    damping: float = 0.5,
) -> DiscreteMeasure:
    """Random multiplicative cascade with depth-damped binary splitting factors.

    Each binary split sends a fraction drawn uniformly from
    [1/2 - spread*damping^k, 1/2 + spread*damping^k] to the lower child, where
    k is the split depth. Damping keeps the doubling constant bounded
    uniformly in depth; at the top level the range is [1/3, 2/3] for the
    default spread.
    """
    if not (0 < spread < 0.5):
        raise ValueError("spread must lie in (0, 1/2)")
    rng = np.random.default_rng(seed)
    n = grid.dimension
    nl = grid.n_leaves

    def factors(shape, depth):
        w = spread * damping**depth
        return rng.uniform(0.5 - w, 0.5 + w, size=shape)

    if n == 1:
        masses = np.ones(1)
        for d in range(grid.max_depth):
            f = factors(masses.shape, d)
            masses = np.stack([masses * f, masses * (1 - f)], axis=-1).reshape(-1)
    else:
        masses = np.ones((1, 1))
        for d in range(grid.max_depth):
            f = factors(masses.shape, d)
            halves = np.stack([masses * f, masses * (1 - f)], axis=1)
            masses = halves.reshape(2 * masses.shape[0], masses.shape[1])
            f = factors(masses.shape, d)
            halves = np.stack([masses * f, masses * (1 - f)], axis=2)
            masses = halves.reshape(masses.shape[0], 2 * masses.shape[1])
    dens = masses / (grid.leaf_side**n)
    return DiscreteMeasure(grid, dens, f"cascade(seed={seed})")


def table_measure(grid: DyadicGrid, source: str | Path | np.ndarray) -> DiscreteMeasure:
    """Measure from a density table: one ASCII real per leaf, row-major order."""
    if isinstance(source, (str, Path)):
        vals = np.loadtxt(source).reshape((grid.n_leaves,) * grid.dimension)
    else:
        vals = np.asarray(source, dtype=float).reshape((grid.n_leaves,) * grid.dimension)
    if np.any(vals < 0):
        raise ValueError("table density entries must be nonnegative")
    return DiscreteMeasure(grid, vals, "table")


def write_table(measure: DiscreteMeasure, path: str | Path) -> None:
    """Write the density in the table format (one ASCII real per leaf, row-major)."""
    np.savetxt(path, measure.density.reshape(-1), fmt="%.17g")


def make_measure(kind: str, grid: DyadicGrid, **kwargs) -> DiscreteMeasure:
    """Dispatch constructor: kind in {lebesgue, power, cascade, table}."""
    kind = kind.lower()
    if kind == "lebesgue":
        return lebesgue_measure(grid)
    if kind == "power":
        return power_measure(grid, kwargs["exponents"])
    if kind == "cascade":
        return cascade_measure(
            grid,
            kwargs["seed"],
            spread=kwargs.get("spread", 1.0 / 6.0),
            damping=kwargs.get("damping", 0.5),
        )
    if kind == "table":
        return table_measure(grid, kwargs["source"])
    raise ValueError(f"unknown measure kind {kind!r}")


def monomial_moment(
    measure: DiscreteMeasure,
    q: DyadicCube,
    beta: tuple[int, ...] | int,
    center: tuple[float, ...] | float,
    scale: float,
) -> float:
    """Exact moment int_Q ((x-center)/scale)^beta dmu of the discretized measure."""
    n = measure.n
    if isinstance(beta, int):
        if n != 1:
            raise ValueError("beta must be a tuple with one exponent per axis")
        beta = (beta,)
    if isinstance(center, (int, float)):
        center = (float(center),) * n
    if len(beta) != n or len(center) != n:
        raise ValueError("beta and center must have one component per axis")
    h = measure.grid.leaf_side
    spans = q.clipped_leaf_span()
    if any(lo >= hi for lo, hi in spans):
        return 0.0
    tables = [
        axis_monomial_integrals(lo, hi, h, center[ax], scale, beta[ax])[beta[ax]]
        for ax, (lo, hi) in enumerate(spans)
    ]
    sl = tuple(slice(lo, hi) for lo, hi in spans)
    dens = measure.density[sl]
    if n == 1:
        return float(np.dot(dens, tables[0]))
    return float(tables[0] @ dens @ tables[1])


def _interior_ratio_extremes(measure: DiscreteMeasure, factor: int, depth_range):
    """Ratios |factor*Q|/|Q| over interior cubes with factor*Q inside the box."""
    grid = measure.grid
    ratios = []
    d_lo, d_hi = depth_range
    for d in range(max(d_lo, 1), min(d_hi, grid.max_depth - 1) + 1):
        w = 1 << (grid.max_depth - d)
        margin = (factor - 1) * w // 2
        if (factor - 1) * w % 2 != 0:
            continue
        for q in grid.cubes_at_depth(d):
            spans = q.leaf_span()
            big = tuple((lo - margin, hi + margin) for lo, hi in spans)
            if any(lo < 0 or hi > grid.n_leaves for lo, hi in big):
                continue
            m_small = measure.mass_box(spans)
            if m_small <= 0:
                raise DegenerateMeasureError(f"zero-mass cube {q} in doubling scan")
            ratios.append(measure.mass_box(big) / m_small)
    return ratios


def doubling_exponents(
    measure: DiscreteMeasure, depth_range: tuple[int, int] | None = None
) -> DoublingReport:
    """Empirical doubling data from interior concentric doubles and triples.

    C_doub is the sup of |2Q|/|Q|; the exponents come from the tripling ratios
    via theta = log_3 of the sup (doubling) and inf (reverse doubling).
    """
    if depth_range is None:
        depth_range = (1, measure.grid.max_depth - 1)
    doubles = _interior_ratio_extremes(measure, 2, depth_range)
    triples = _interior_ratio_extremes(measure, 3, depth_range)
    if not doubles or not triples:
        raise ValueError("depth range leaves no interior cubes to scan")
    c_doub = max(doubles)
    theta_doub = float(np.log(max(triples)) / np.log(3.0))
    theta_rev = float(np.log(min(triples)) / np.log(3.0))
    return DoublingReport(c_doub=c_doub, theta_doub=theta_doub, theta_rev=theta_rev)


class Poly:
    """Small polynomial in global coordinates, for halo queries.

    coeffs maps multi-indices (per-axis exponents) to coefficients.
    """

    def __init__(self, coeffs: dict[tuple[int, ...], float], n: int):
        self.coeffs = {tuple(k): float(v) for k, v in coeffs.items()}
        self.n = n

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(pts.shape[0])
        for beta, c in self.coeffs.items():
            term = np.full(pts.shape[0], c)
            for ax, b in enumerate(beta):
                if b:
                    term = term * pts[:, ax] ** b
            out += term
        return out

    def grad(self) -> list["Poly"]:
        grads = []
        for ax in range(self.n):
            g = {}
            for beta, c in self.coeffs.items():
                if beta[ax] > 0:
                    nb = list(beta)
                    nb[ax] -= 1
                    g[tuple(nb)] = g.get(tuple(nb), 0.0) + c * beta[ax]
            grads.append(Poly(g or {(0,) * self.n: 0.0}, self.n))
        return grads

    def scaled(self, factor: float) -> "Poly":
        return Poly({k: v * factor for k, v in self.coeffs.items()}, self.n)


def _corner_points(q: DyadicCube) -> np.ndarray:
    lo, hi = q.lower(), q.upper()
    if q.n == 1:
        return np.array([[lo[0]], [hi[0]]])
    return np.array(
        [[a, b] for a in (lo[0], hi[0]) for b in (lo[1], hi[1])], dtype=float
    )


def halo_mass(measure: DiscreteMeasure, q: DyadicCube, poly: Poly, delta: float) -> float:
    """Mass of the leaf cells of Q within distance ~delta of the zero set of poly.

    A leaf joins the halo when poly changes sign on its corners or when
    |poly(center)| < delta * sup_Q |grad poly|. poly should be Q-normalized
    (sup norm 1 on Q); if not, it is renormalized with a warning.
    """
    grid = measure.grid
    if delta < grid.leaf_side:
        raise ValueError("delta must be at least one leaf side")
    spans = q.clipped_leaf_span()
    if any(lo >= hi for lo, hi in spans):
        return 0.0
    h = grid.leaf_side
    n = measure.n
    axes = [np.arange(lo, hi) for lo, hi in spans]
    if n == 1:
        centers = (axes[0][:, None] + 0.5) * h
        corners0 = axes[0][:, None] * h
        corners1 = (axes[0][:, None] + 1) * h
        corner_vals = np.stack([poly(corners0), poly(corners1)], axis=-1)
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        centers = np.stack([(gx + 0.5) * h, (gy + 0.5) * h], axis=-1).reshape(-1, 2)
        stacks = []
        for ox in (0, 1):
            for oy in (0, 1):
                pts = np.stack([(gx + ox) * h, (gy + oy) * h], axis=-1).reshape(-1, 2)
                stacks.append(poly(pts))
        corner_vals = np.stack(stacks, axis=-1)

    sup_est = float(np.max(np.abs(corner_vals)))
    sup_est = max(sup_est, float(np.max(np.abs(poly(_corner_points(q))))))
    if abs(sup_est - 1.0) > 1e-9 and sup_est > 0:
        warnings.warn(
            f"polynomial is not Q-normalized (sup ~ {sup_est:.3g}); renormalizing",
            stacklevel=2,
        )
        poly = poly.scaled(1.0 / sup_est)
        corner_vals = corner_vals / sup_est

    grad_bound = 0.0
    all_pts = centers if n == 2 else centers
    for g in poly.grad():
        grad_bound = max(grad_bound, float(np.max(np.abs(g(_corner_points(q))))))
        grad_bound = max(grad_bound, float(np.max(np.abs(g(all_pts)))))

    sign_change = (corner_vals.min(axis=-1) <= 0.0) & (corner_vals.max(axis=-1) >= 0.0)
    near_zero = np.abs(poly(centers)) < delta * grad_bound
    member = sign_change | near_zero

    sl = tuple(slice(lo, hi) for lo, hi in spans)
    masses = measure.leaf_masses[sl].reshape(-1)
    return float(masses[member.reshape(-1)].sum())


def halo_decay_fit(
    measure: DiscreteMeasure,
    q: DyadicCube,
    poly: Poly,
    deltas: np.ndarray,
) -> tuple[float, float]:
    """Log-log fit of halo_mass/|Q|_mu against delta: returns (exponent, R^2)."""
    total = measure.cube_mass(q)
    fracs = np.array([halo_mass(measure, q, poly, float(d)) / total for d in deltas])
    keep = fracs > 0
    x = np.log(np.asarray(deltas)[keep])
    y = np.log(fracs[keep])
    if len(x) < 3:
        raise ValueError("not enough positive halo masses to fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
