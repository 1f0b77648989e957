"""Functions stored as polynomial blocks on the leaf cells of the standard mesh.

A LeafFunction keeps, for every leaf, the coefficients of a polynomial of
degree < local_kappa in leaf-local coordinates u = (x - c_leaf)/h with
u in [-1/2, 1/2]^n. Inner products against a DiscreteMeasure are exact.
"""

from __future__ import annotations

import numpy as np

from ._poly import local_product_moments, multi_indices, space_dim
from .grid import DyadicCube, DyadicGrid
from .measure import DiscreteMeasure


class LeafFunction:
    def __init__(self, grid: DyadicGrid, coeffs: np.ndarray, local_kappa: int):
        if not grid.is_standard:
            raise ValueError("leaf functions live on the standard mesh")
        shape = (grid.n_leaves,) * grid.dimension + (space_dim(grid.dimension, local_kappa),)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != shape:
            raise ValueError(f"coeff shape {coeffs.shape} != {shape}")
        self.grid = grid
        self.coeffs = coeffs
        self.local_kappa = local_kappa

    @classmethod
    def zeros(cls, grid: DyadicGrid, local_kappa: int = 1) -> "LeafFunction":
        shape = (grid.n_leaves,) * grid.dimension + (space_dim(grid.dimension, local_kappa),)
        return cls(grid, np.zeros(shape), local_kappa)

    @classmethod
    def from_values(cls, grid: DyadicGrid, values: np.ndarray) -> "LeafFunction":
        """Piecewise-constant function from leaf-center values."""
        values = np.asarray(values, dtype=float).reshape((grid.n_leaves,) * grid.dimension)
        return cls(grid, values[..., None], 1)

    def values(self) -> np.ndarray:
        """Values at leaf centers (u = 0 picks out the constant coefficient)."""
        return self.coeffs[..., 0].copy()

    def with_kappa(self, kappa: int) -> "LeafFunction":
        """Re-embed into blocks of degree < kappa (kappa >= local_kappa)."""
        if kappa == self.local_kappa:
            return self
        if kappa < self.local_kappa:
            raise ValueError("cannot lower the block degree")
        src = multi_indices(self.grid.dimension, self.local_kappa)
        dst = {b: i for i, b in enumerate(multi_indices(self.grid.dimension, kappa))}
        out = LeafFunction.zeros(self.grid, kappa)
        for i, b in enumerate(src):
            out.coeffs[..., dst[b]] = self.coeffs[..., i]
        return out

    def _aligned(self, other: "LeafFunction") -> tuple["LeafFunction", "LeafFunction"]:
        k = max(self.local_kappa, other.local_kappa)
        return self.with_kappa(k), other.with_kappa(k)

    def __add__(self, other: "LeafFunction") -> "LeafFunction":
        a, b = self._aligned(other)
        return LeafFunction(self.grid, a.coeffs + b.coeffs, a.local_kappa)

    def __sub__(self, other: "LeafFunction") -> "LeafFunction":
        a, b = self._aligned(other)
        return LeafFunction(self.grid, a.coeffs - b.coeffs, a.local_kappa)

    def __mul__(self, scalar: float) -> "LeafFunction":
        return LeafFunction(self.grid, self.coeffs * float(scalar), self.local_kappa)

    __rmul__ = __mul__

    def __neg__(self) -> "LeafFunction":
        return self * -1.0

    def restrict_box(self, spans: tuple[tuple[int, int], ...]) -> "LeafFunction":
        """Zero the function outside a leaf-aligned box."""
        nl = self.grid.n_leaves
        spans = tuple((min(max(lo, 0), nl), min(max(hi, 0), nl)) for lo, hi in spans)
        out = np.zeros_like(self.coeffs)
        sl = tuple(slice(lo, hi) for lo, hi in spans)
        out[sl] = self.coeffs[sl]
        return LeafFunction(self.grid, out, self.local_kappa)

    def restrict(self, q: DyadicCube) -> "LeafFunction":
        return self.restrict_box(q.leaf_span())

    def inner(self, measure: DiscreteMeasure, other: "LeafFunction") -> float:
        """Exact L2(mu) inner product."""
        a, b = self._aligned(other)
        P = local_product_moments(self.grid.dimension, a.local_kappa)
        dens = measure.density.reshape(-1)
        A = a.coeffs.reshape(-1, P.shape[0])
        B = b.coeffs.reshape(-1, P.shape[0])
        vol = measure.leaf_volume
        return float(vol * np.einsum("lm,mk,lk,l->", A, P, B, dens))

    def norm_l2(self, measure: DiscreteMeasure) -> float:
        return float(np.sqrt(max(self.inner(measure, self), 0.0)))

    def square_masses(self, measure: DiscreteMeasure) -> np.ndarray:
        """Per-leaf integral of f^2 dmu, exact."""
        P = local_product_moments(self.grid.dimension, self.local_kappa)
        A = self.coeffs.reshape(-1, P.shape[0])
        per_leaf = np.einsum("lm,mk,lk->l", A, P, A)
        out = per_leaf.reshape(measure.density.shape) * measure.density * measure.leaf_volume
        return out

    def sup_estimate(self, samples_per_axis: int = 3) -> float:
        """Estimated sup norm from a sample grid inside each leaf."""
        n = self.grid.dimension
        pts = np.linspace(-0.5, 0.5, samples_per_axis)
        idx = multi_indices(n, self.local_kappa)
        if n == 1:
            basis = np.stack([pts**b[0] for b in idx], axis=0)
            vals = np.einsum("lm,mp->lp", self.coeffs.reshape(-1, len(idx)), basis)
        else:
            px, py = np.meshgrid(pts, pts, indexing="ij")
            basis = np.stack([px.ravel() ** b[0] * py.ravel() ** b[1] for b in idx], axis=0)
            vals = np.einsum("lm,mp->lp", self.coeffs.reshape(-1, len(idx)), basis)
        return float(np.max(np.abs(vals)))


def cube_poly_function(
    grid: DyadicGrid,
    support: DyadicCube,
    coeff_by_index: np.ndarray,
    kappa: int,
    coord_cube: DyadicCube | None = None,
) -> LeafFunction:
    """1_support times a polynomial given in coord_cube-local monomials.

    coord_cube defaults to the support cube; its center and side define the
    normalized coordinates ((x - c)/ell)^beta of the polynomial.
    """
    from ._poly import axis_rebase_coeffs

    coord_cube = coord_cube or support
    n = grid.dimension
    idx = multi_indices(n, kappa)
    out = LeafFunction.zeros(grid, kappa)
    spans = support.clipped_leaf_span()
    if any(lo >= hi for lo, hi in spans):
        return out
    h = grid.leaf_side
    ctr = coord_cube.center()
    scale = coord_cube.side
    tabs = [
        axis_rebase_coeffs(lo, hi, h, ctr[ax], scale, kappa - 1)
        for ax, (lo, hi) in enumerate(spans)
    ]
    pos = {b: i for i, b in enumerate(idx)}
    sl = tuple(slice(lo, hi) for lo, hi in spans)
    block = out.coeffs[sl]
    for i, beta in enumerate(idx):
        c = coeff_by_index[i]
        if c == 0.0:
            continue
        for gamma in idx:
            if any(g > b for g, b in zip(gamma, beta)):
                continue
            if n == 1:
                w = tabs[0][beta[0], gamma[0]]
            else:
                w = np.multiply.outer(tabs[0][beta[0], gamma[0]], tabs[1][beta[1], gamma[1]])
            block[..., pos[gamma]] += c * w
    return out


def eval_global_monomial(grid: DyadicGrid, beta: tuple[int, ...]) -> LeafFunction:
    """The global monomial x^beta as an exact leaf-block function."""
    n = grid.dimension
    kappa = sum(beta) + 1
    root = grid.root if grid.is_standard else None
    if root is None:
        raise ValueError("global monomials need the standard grid")
    idx = multi_indices(n, kappa)
    coeffs = np.zeros(len(idx))
    # x^beta = ((x - 0.5) + 0.5)^beta expanded in root-local coords (c=0.5, L=1)
    from math import comb

    pos = {b: i for i, b in enumerate(idx)}
    if n == 1:
        for r in range(beta[0] + 1):
            coeffs[pos[(r,)]] += comb(beta[0], r) * 0.5 ** (beta[0] - r)
    else:
        for rx in range(beta[0] + 1):
            for ry in range(beta[1] + 1):
                coeffs[pos[(rx, ry)]] += (
                    comb(beta[0], rx)
                    * comb(beta[1], ry)
                    * 0.5 ** (beta[0] - rx)
                    * 0.5 ** (beta[1] - ry)
                )
    return cube_poly_function(grid, root, coeffs, kappa)
