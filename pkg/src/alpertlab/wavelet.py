"""Weighted Alpert bases and multiresolution analysis in L2(mu).

The basis at a cube Q spans the moment-free space: linear combinations of
(child indicator) x (polynomial of degree < kappa) whose mu-moments against
all monomials of degree < kappa vanish on Q. Construction: Gram-Schmidt in
the exact L2(mu) inner product, seeded with the coarse polynomial space so
the surviving raw directions are automatically moment-free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._poly import axis_cross_integrals, axis_monomial_integrals, multi_indices, space_dim
from .grid import DyadicCube, DyadicGrid
from .leaffunc import LeafFunction, cube_poly_function
from .measure import DiscreteMeasure

_DROP_TOL = 1e-10


@dataclass
class AlpertBasis:
    """Orthonormal moment-free basis attached to one cube.

    vectors[a] holds the coefficients of basis function a over the raw index
    (child, monomial), children in descending lexicographic order, monomials
    graded-lex. reduced marks rank deficiency from a degenerate measure.
    """

    cube: DyadicCube
    kappa: int
    vectors: np.ndarray
    children: list[DyadicCube]
    reduced: bool = False
    _blocks: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def span_blocks(self, grid: DyadicGrid) -> np.ndarray:
        """Leaf-local coefficient blocks on the cube's own leaf span.

        Shape (dim, *span_shape, M): basis function a restricted to the
        cube's leaves, in leaf-local monomials.
        """
        if self._blocks is None:
            from ._poly import axis_rebase_coeffs

            n = self.cube.n
            M = space_dim(n, self.kappa)
            idx = multi_indices(n, self.kappa)
            spans = self.cube.clipped_leaf_span()
            shape = tuple(hi - lo for lo, hi in spans)
            out = np.zeros((self.dim,) + shape + (M,))
            h = grid.leaf_side
            ctr, scale = self.cube.center(), self.cube.side
            tabs = [
                axis_rebase_coeffs(lo, hi, h, ctr[ax], scale, self.kappa - 1)
                for ax, (lo, hi) in enumerate(spans)
            ]
            pos = {b: i for i, b in enumerate(idx)}
            for ci, child in enumerate(self.children):
                csp = child.clipped_leaf_span()
                loc = tuple(slice(a - spans[ax][0], b - spans[ax][0]) for ax, (a, b) in enumerate(csp))
                ctabs = [
                    tab[:, :, sl.start : sl.stop] for tab, sl in zip(tabs, loc)
                ]
                for i, beta in enumerate(idx):
                    coef = self.vectors[:, ci * M + i]
                    if not np.any(coef):
                        continue
                    for gamma in idx:
                        if any(g > b for g, b in zip(gamma, beta)):
                            continue
                        if n == 1:
                            w = ctabs[0][beta[0], gamma[0]]
                        else:
                            w = np.multiply.outer(
                                ctabs[0][beta[0], gamma[0]], ctabs[1][beta[1], gamma[1]]
                            )
                        out[(slice(None),) + loc + (pos[gamma],)] += coef.reshape(
                            (-1,) + (1,) * n
                        ) * w[None, ...]
            self._blocks = out
        return self._blocks

    def combine(self, grid: DyadicGrid, weights: np.ndarray) -> LeafFunction:
        """The leaf-block function sum_a weights[a] h_a."""
        blocks = self.span_blocks(grid)
        out = LeafFunction.zeros(grid, self.kappa)
        spans = self.cube.clipped_leaf_span()
        sl = tuple(slice(lo, hi) for lo, hi in spans)
        out.coeffs[sl] = np.tensordot(weights, blocks, axes=(0, 0))
        return out

    def functions(self, grid: DyadicGrid) -> list[LeafFunction]:
        eye = np.eye(self.dim)
        return [self.combine(grid, eye[a]) for a in range(self.dim)]


@dataclass
class WaveletCoefficients:
    """Alpert coefficient tree of a function plus the root coarse part."""

    kappa: int
    grid: DyadicGrid
    entries: dict[DyadicCube, np.ndarray]
    coarse: np.ndarray
    l2_sq: float

    def coefficient_l2_sq(self) -> float:
        return float(sum(np.dot(v, v) for v in self.entries.values()))

    def cubes(self) -> list[DyadicCube]:
        return sorted(self.entries, key=lambda q: (q.depth, q.coords))


def _gram_schmidt(A: np.ndarray, seeds: np.ndarray, flags: list[bool], drop_ref: float):
    """Gram-Schmidt in the inner product v^T A w with deterministic drops.

    flags marks which seed vectors are coarse; returns (coarse survivors,
    wavelet survivors). The raw seeds are deliberately overcomplete, so some
    drops are expected even for nondegenerate measures.
    """
    ortho: list[np.ndarray] = []
    kinds: list[bool] = []
    for v, is_coarse in zip(seeds, flags):
        w = v.astype(float).copy()
        for _ in range(2):
            for u in ortho:
                w = w - (u @ A @ w) * u
        nrm2 = float(w @ A @ w)
        if nrm2 <= (_DROP_TOL**2) * drop_ref:
            continue
        w = w / np.sqrt(nrm2)
        # sign: first significantly nonzero raw coordinate positive
        nz = np.flatnonzero(np.abs(w) > 1e-12 * np.max(np.abs(w)))
        if len(nz) and w[nz[0]] < 0:
            w = -w
        ortho.append(w)
        kinds.append(is_coarse)
    coarse = [w for w, k in zip(ortho, kinds) if k]
    wavelets = [w for w, k in zip(ortho, kinds) if not k]
    return coarse, wavelets


class AlpertSystem:
    """All Alpert bases of one (measure, kappa, grid) triple, built lazily.

    For shifted grids, cubes protruding past the unit box are excluded from
    basis construction; the root coarse space exists only for the standard
    grid.
    """

    def __init__(self, measure: DiscreteMeasure, kappa: int, grid: DyadicGrid | None = None):
        if kappa < 1:
            raise ValueError("kappa must be >= 1")
        self.measure = measure
        self.kappa = kappa
        self.grid = grid or measure.grid
        if self.grid.max_depth != measure.grid.max_depth or self.grid.dimension != measure.n:
            raise ValueError("analysis grid must match the measure's leaf mesh")
        self.n = self.grid.dimension
        self.M = space_dim(self.n, kappa)
        self._bases: dict[DyadicCube, AlpertBasis] = {}
        self._cross_tables: dict = {}
        self._root_coarse: tuple[np.ndarray, ...] | None = None

    # ------------------------------------------------------------------ tables

    def _cube_moments(self, q: DyadicCube, kmax: int) -> np.ndarray:
        """All mu-moments of Q-normalized monomials over Q up to kmax per axis."""
        h = self.grid.leaf_side
        ctr, scale = q.center(), q.side
        spans = q.clipped_leaf_span()
        dens = self.measure.density[tuple(slice(lo, hi) for lo, hi in spans)]
        tabs = [
            axis_monomial_integrals(lo, hi, h, ctr[ax], scale, kmax)
            for ax, (lo, hi) in enumerate(spans)
        ]
        if self.n == 1:
            return tabs[0] @ dens
        return np.einsum("ax,xy,by->ab", tabs[0], dens, tabs[1])

    def _poly_gram(self, q: DyadicCube, kappa: int) -> np.ndarray:
        """Gram matrix of Q-normalized monomials of degree < kappa in L2(mu|Q)."""
        T = self._cube_moments(q, 2 * (kappa - 1))
        idx = multi_indices(self.n, kappa)
        G = np.empty((len(idx), len(idx)))
        for i, bi in enumerate(idx):
            for j, bj in enumerate(idx):
                key = tuple(a + b for a, b in zip(bi, bj))
                G[i, j] = T[key] if self.n == 2 else T[key[0]]
        return G

    def _child_order(self, q: DyadicCube) -> list[DyadicCube]:
        return sorted(q.children(), key=lambda c: c.coords, reverse=True)

    # ------------------------------------------------------------------ basis

    def basis(self, q: DyadicCube) -> AlpertBasis:
        if q in self._bases:
            return self._bases[q]
        if q.is_clipped:
            raise ValueError(f"{q} protrudes past the unit box; no basis is built")
        if q.depth >= self.grid.max_depth:
            raise ValueError("leaf cubes carry no detail space")
        children = self._child_order(q)
        M = self.M
        raw_dim = len(children) * M
        idx = multi_indices(self.n, self.kappa)
        A = np.zeros((raw_dim, raw_dim))
        for ci, child in enumerate(children):
            G = self._poly_gram_in_cube_coords(child, q)
            A[ci * M : (ci + 1) * M, ci * M : (ci + 1) * M] = G
        drop_ref = max(float(np.max(np.diagonal(A))), 1e-300)
        seeds = []
        flags = []
        for j in range(M):
            e = np.zeros(raw_dim)
            for ci in range(len(children)):
                e[ci * M + j] = 1.0
            seeds.append(e)
            flags.append(True)
        eye = np.eye(raw_dim)
        for ci in range(len(children)):
            for j in range(M):
                seeds.append(eye[ci * M + j])
                flags.append(False)
        coarse, wavelets = _gram_schmidt(A, np.array(seeds), flags, drop_ref)
        expected = (2**self.n - 1) * M
        vecs = np.array(wavelets) if wavelets else np.zeros((0, raw_dim))
        basis = AlpertBasis(
            cube=q,
            kappa=self.kappa,
            vectors=vecs,
            children=children,
            reduced=len(wavelets) < expected,
        )
        self._bases[q] = basis
        return basis

    def _poly_gram_in_cube_coords(self, child: DyadicCube, q: DyadicCube) -> np.ndarray:
        """Gram of Q-normalized monomials restricted to one child of Q."""
        h = self.grid.leaf_side
        ctr, scale = q.center(), q.side
        spans = child.clipped_leaf_span()
        dens = self.measure.density[tuple(slice(lo, hi) for lo, hi in spans)]
        kmax = 2 * (self.kappa - 1)
        tabs = [
            axis_monomial_integrals(lo, hi, h, ctr[ax], scale, kmax)
            for ax, (lo, hi) in enumerate(spans)
        ]
        if self.n == 1:
            T = tabs[0] @ dens
        else:
            T = np.einsum("ax,xy,by->ab", tabs[0], dens, tabs[1])
        idx = multi_indices(self.n, self.kappa)
        G = np.empty((len(idx), len(idx)))
        for i, bi in enumerate(idx):
            for j, bj in enumerate(idx):
                key = tuple(a + b for a, b in zip(bi, bj))
                G[i, j] = T[key] if self.n == 2 else T[key[0]]
        return G

    def root_coarse_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormalized polynomial space at the root: (vectors, gram).

        Vectors are expansion coefficients in root-normalized monomials.
        """
        if not self.grid.is_standard:
            raise ValueError("root coarse space exists only for the standard grid")
        if self._root_coarse is None:
            G = self._poly_gram(self.grid.root, self.kappa)
            drop_ref = max(float(np.max(np.diagonal(G))), 1e-300)
            coarse, _ = _gram_schmidt(G, np.eye(self.M), [True] * self.M, drop_ref)
            vecs = np.array(coarse) if coarse else np.zeros((0, self.M))
            self._root_coarse = (vecs, G)
        return self._root_coarse

    # ------------------------------------------------------------------ moments

    def _cross_tabs(self, q: DyadicCube, gmax: int):
        key = (q, gmax)
        if key not in self._cross_tables:
            h = self.grid.leaf_side
            ctr, scale = q.center(), q.side
            spans = q.clipped_leaf_span()
            self._cross_tables[key] = [
                axis_cross_integrals(lo, hi, h, ctr[ax], scale, gmax, self.kappa - 1)
                for ax, (lo, hi) in enumerate(spans)
            ]
        return self._cross_tables[key]

    def _region_monomial_moments(self, f: LeafFunction, region: DyadicCube, coord_cube: DyadicCube) -> np.ndarray:
        """<f, 1_region m_coord^beta>_mu for all |beta| < kappa, graded-lex."""
        n = self.n
        gmax = f.local_kappa - 1
        h = self.grid.leaf_side
        ctr, scale = coord_cube.center(), coord_cube.side
        spans = region.clipped_leaf_span()
        if any(lo >= hi for lo, hi in spans):
            return np.zeros(self.M)
        tabs = [
            axis_cross_integrals(lo, hi, h, ctr[ax], scale, gmax, self.kappa - 1)
            for ax, (lo, hi) in enumerate(spans)
        ]
        sl = tuple(slice(lo, hi) for lo, hi in spans)
        dens = self.measure.density[sl]
        fidx = multi_indices(n, f.local_kappa)
        out_idx = multi_indices(n, self.kappa)
        B = f.coeffs[sl]
        if n == 1:
            # mom[b] = sum_j dens_j sum_g B[j,g] J[g,b,j]
            JW = tabs[0] * dens[None, None, :]
            mom = np.einsum("jg,gbj->b", B, JW)
            return mom
        kf = f.local_kappa
        B4 = np.zeros(B.shape[:2] + (kf, kf))
        for m, g in enumerate(fidx):
            B4[:, :, g[0], g[1]] = B[:, :, m]
        t = B4 * dens[:, :, None, None]
        s1 = np.einsum("xyab,aBx->xyBb", t, tabs[0])
        s2 = np.einsum("xyBb,bCy->BC", s1, tabs[1])
        return np.array([s2[b[0], b[1]] for b in out_idx])

    def child_moments(self, f: LeafFunction, q: DyadicCube) -> np.ndarray:
        """Raw-index moment vector: <f, 1_child m_Q^beta> in basis raw order."""
        basis_children = self._child_order(q)
        return np.concatenate(
            [self._region_monomial_moments(f, c, q) for c in basis_children]
        )

    # ------------------------------------------------------------------ analysis

    def _cube_list(self):
        out = []
        for d in range(0, self.grid.max_depth):
            for q in self.grid.cubes_at_depth(d):
                if not q.is_clipped:
                    out.append(q)
        return out

    def analyze(self, f: LeafFunction) -> WaveletCoefficients:
        """Alpert coefficients of f on every unclipped cube above the leaves."""
        if f.grid.max_depth != self.grid.max_depth:
            raise ValueError("function mesh does not match the analysis grid")
        entries: dict[DyadicCube, np.ndarray] = {}
        total = self.measure.total_mass
        for q in self._cube_list():
            if self.measure.cube_mass(q) <= 1e-300 * total:
                continue
            basis = self.basis(q)
            if basis.dim == 0:
                continue
            mom = self.child_moments(f, q)
            entries[q] = basis.vectors @ mom
        if self.grid.is_standard:
            vecs, _ = self.root_coarse_basis()
            mom = self._region_monomial_moments(f, self.grid.root, self.grid.root)
            coarse = vecs @ mom if len(vecs) else np.zeros(0)
        else:
            coarse = np.zeros(0)
        return WaveletCoefficients(
            kappa=self.kappa,
            grid=self.grid,
            entries=entries,
            coarse=coarse,
            l2_sq=f.inner(self.measure, f),
        )

    def synthesize(self, coeffs: WaveletCoefficients) -> LeafFunction:
        out = LeafFunction.zeros(self.measure.grid, self.kappa)
        if len(coeffs.coarse):
            vecs, _ = self.root_coarse_basis()
            poly = coeffs.coarse @ vecs
            out = out + cube_poly_function(
                self.measure.grid, self.grid.root, poly, self.kappa, coord_cube=self.grid.root
            )
        for q, v in coeffs.entries.items():
            if np.any(v):
                basis = self.basis(q)
                sl = tuple(slice(lo, hi) for lo, hi in q.clipped_leaf_span())
                out.coeffs[sl] += np.tensordot(v, basis.span_blocks(self.measure.grid), axes=(0, 0))
        return out

    def delta(self, q: DyadicCube, f: LeafFunction) -> LeafFunction:
        """The projection of f onto the moment-free space of Q, as a function."""
        basis = self.basis(q)
        if basis.dim == 0:
            return LeafFunction.zeros(self.measure.grid, self.kappa)
        v = basis.vectors @ self.child_moments(f, q)
        return basis.combine(self.measure.grid, v)

    def delta_coeffs(self, q: DyadicCube, f: LeafFunction) -> np.ndarray:
        basis = self.basis(q)
        if basis.dim == 0:
            return np.zeros(0)
        return basis.vectors @ self.child_moments(f, q)

    def project_E(self, q: DyadicCube, f: LeafFunction, kappa: int | None = None):
        """Least-squares polynomial fit on Q: returns (coeffs, function).

        Coefficients are in Q-normalized monomials of degree < kappa,
        graded-lex; the function is the fit times 1_Q.
        """
        kappa = kappa or self.kappa
        sub = self if kappa == self.kappa else AlpertSystem(self.measure, kappa, self.grid)
        G = sub._poly_gram(q, kappa)
        b = sub._region_monomial_moments(f, q, q)
        try:
            scale = np.sqrt(np.outer(np.diagonal(G), np.diagonal(G)))
            if np.any(np.diagonal(G) <= 0):
                raise np.linalg.LinAlgError("zero-mass direction")
            c = np.linalg.solve(G / scale, b / np.sqrt(np.diagonal(G))) / np.sqrt(
                np.diagonal(G)
            )
        except np.linalg.LinAlgError:
            warnings.warn(f"singular normal equations on {q}; least-squares fallback", stacklevel=2)
            c, *_ = np.linalg.lstsq(G, b, rcond=1e-12)
        func = cube_poly_function(self.measure.grid, q, c, kappa, coord_cube=q)
        return c, func


_SYSTEMS: dict = {}


def get_system(measure: DiscreteMeasure, kappa: int, grid: DyadicGrid | None = None) -> AlpertSystem:
    key = (id(measure), kappa, grid or measure.grid)
    if key not in _SYSTEMS:
        _SYSTEMS[key] = AlpertSystem(measure, kappa, grid)
    return _SYSTEMS[key]


def build_alpert_basis(measure: DiscreteMeasure, q: DyadicCube, kappa: int) -> AlpertBasis:
    return get_system(measure, kappa, q.grid).basis(q)


def analyze(measure: DiscreteMeasure, kappa: int, f: LeafFunction, grid: DyadicGrid | None = None) -> WaveletCoefficients:
    return get_system(measure, kappa, grid).analyze(f)


def synthesize(measure: DiscreteMeasure, coeffs: WaveletCoefficients) -> LeafFunction:
    return get_system(measure, coeffs.kappa, coeffs.grid).synthesize(coeffs)


def project_E(measure: DiscreteMeasure, q: DyadicCube, kappa: int, f: LeafFunction):
    return get_system(measure, kappa, q.grid).project_E(q, f, kappa)
