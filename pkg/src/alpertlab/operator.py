"""Smoothly truncated fractional singular integrals in wavelet coordinates.

Quadrature convention: operator application and all matrix functionals use
leaf-center evaluation with exact cell masses, on both measure sides, so
transpose duality is exact up to rounding. The assembled matrix acts on
scaled coefficient vectors (unit vectors of W^s(sigma) / W^{-s}(omega)), and
its spectral norm is the discretized bilinear-form norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._poly import smoothstep
from .grid import DyadicCube, DyadicGrid, GoodnessParams, is_deeply_embedded
from .leaffunc import LeafFunction, cube_poly_function
from .measure import DiscreteMeasure
from .poisson import _leaf_centers, third_trick_grids
from .report import ConstantReport
from .wavelet import WaveletCoefficients, get_system
from ._poly import multi_indices


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """alpha-fractional kernel with smooth (delta, R) truncation.

    family is "fractional_integral" (|x-y|^{alpha-n}) or "riesz"
    ((x_k - y_k)/|x-y|^{n+1-alpha}). The truncation bump is a C^bump_order
    polynomial smoothstep vanishing on [0, delta/2] and beyond 2R, equal to 1
    on [delta, R].
    """

    alpha: float
    family: str = "fractional_integral"
    component: int = 0
    delta: float = 1e-3
    big_r: float = 8.0
    bump_order: int = 3
    transposed: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not (0 < self.delta < self.big_r):
            raise ValueError("need 0 < delta < R")
        if self.family not in ("fractional_integral", "riesz"):
            raise ValueError(f"unknown kernel family {self.family!r}")

    def transpose(self) -> "KernelSpec":
        return replace(self, transposed=not self.transposed)


def default_kernel(
    grid: DyadicGrid, alpha: float, family: str = "fractional_integral", component: int = 0, kappa: int = 1
) -> KernelSpec:
    """Canonical truncation: delta = 4 leaf sides, R = 4 x ambient diameter."""
    n = grid.dimension
    return KernelSpec(
        alpha=alpha,
        family=family,
        component=component,
        delta=4.0 * grid.leaf_side,
        big_r=4.0 * float(np.sqrt(n)),
        bump_order=kappa + 2,
    )


def truncation(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """The smooth bump eta_{delta,R}(r)."""
    r = np.asarray(r, dtype=float)
    up = smoothstep((r - spec.delta / 2) / (spec.delta / 2), spec.bump_order)
    down = 1.0 - smoothstep((r - spec.big_r) / spec.big_r, spec.bump_order)
    return up * down


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """K_{delta,R}(x, y) on broadcast point arrays of shape (..., n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if spec.transposed:
        x, y = y, x
    n = x.shape[-1]
    diff = x - y
    r = np.sqrt(np.sum(diff**2, axis=-1))
    eta = truncation(spec, r)
    safe = np.where(r > 0, r, 1.0)
    if spec.family == "fractional_integral":
        core = safe ** (spec.alpha - n)
    else:
        core = diff[..., spec.component] / safe ** (n + 1 - spec.alpha)
    return np.where(r > 0, eta * core, 0.0)


def kernel_matrix(spec: KernelSpec, pts_x: np.ndarray, pts_y: np.ndarray) -> np.ndarray:
    return kernel_eval(spec, pts_x[:, None, :], pts_y[None, :, :])


def apply_operator(
    spec: KernelSpec, sigma: DiscreteMeasure, f: LeafFunction | np.ndarray
) -> LeafFunction:
    """T_sigma f at leaf centers: sum_cells K(x, y_cell) f(y_cell) sigma(cell)."""
    _check_resolution(spec, sigma)
    vals = f.values() if isinstance(f, LeafFunction) else np.asarray(f, dtype=float)
    pts = _leaf_centers(sigma.grid)
    K = kernel_matrix(spec, pts, pts)
    out = K @ (sigma.leaf_masses.reshape(-1) * vals.reshape(-1))
    return LeafFunction.from_values(sigma.grid, out)


# ------------------------------------------------------------------ matrix


@dataclass
class OperatorMatrix:
    """Scaled wavelet-coordinate matrix of T_sigma: W^s(sigma) -> W^s(omega).

    Columns are indexed by the sigma-side basis (root coarse block first,
    then wavelets cube by cube); rows likewise for omega. Entry blocks are
    ell(J)^{-s} <T_sigma h_I, h_J>_omega ell(I)^{s}, with coarse scale 1.
    """

    matrix: np.ndarray
    s: float
    kappa: int
    col_slices: dict[DyadicCube, slice]
    row_slices: dict[DyadicCube, slice]
    col_coarse: slice
    row_coarse: slice
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def col_vector(self, coeffs: WaveletCoefficients) -> np.ndarray:
        """Scaled sigma-side coefficient vector (unit length = unit W^s norm)."""
        v = np.zeros(self.matrix.shape[1])
        if len(coeffs.coarse):
            v[self.col_coarse] = coeffs.coarse
        for q, c in coeffs.entries.items():
            sl = self.col_slices.get(q)
            if sl is not None:
                v[sl] = 2.0 ** (self.s * q.depth) * c
        return v

    def row_vector(self, coeffs: WaveletCoefficients) -> np.ndarray:
        """Scaled omega-side vector (unit length = unit W^{-s} norm)."""
        v = np.zeros(self.matrix.shape[0])
        if len(coeffs.coarse):
            v[self.row_coarse] = coeffs.coarse
        for q, c in coeffs.entries.items():
            sl = self.row_slices.get(q)
            if sl is not None:
                v[sl] = 2.0 ** (-self.s * q.depth) * c
        return v

    def bilinear(self, f: WaveletCoefficients, g: WaveletCoefficients) -> float:
        """<T_sigma f, g>_omega of the expanded (coarse + wavelet) parts."""
        return float(self.row_vector(g) @ self.matrix @ self.col_vector(f))


def _basis_value_matrix(system, grid: DyadicGrid, s: float, side: str):
    """Center-value matrix of the scaled basis, plus index slices."""
    n = grid.dimension
    nl = grid.n_leaves
    nl_total = nl**n
    cols = []
    slices: dict[DyadicCube, slice] = {}
    coarse_sl = slice(0, 0)
    pos = 0
    if system.grid.is_standard:
        vecs, _ = system.root_coarse_basis()
        for v in vecs:
            fn = cube_poly_function(
                system.measure.grid, system.grid.root, v, system.kappa, coord_cube=system.grid.root
            )
            cols.append(fn.values().reshape(-1))
        coarse_sl = slice(0, len(vecs))
        pos = len(vecs)
    flat_idx = np.arange(nl_total).reshape((nl,) * n)
    for d in range(system.grid.max_depth):
        scale = 2.0 ** (-s * d) if side == "col" else 2.0 ** (s * d)
        for q in system.grid.cubes_at_depth(d):
            if q.is_clipped:
                continue
            basis = system.basis(q)
            if basis.dim == 0:
                continue
            blocks = basis.span_blocks(system.measure.grid)
            sl = tuple(slice(lo, hi) for lo, hi in q.clipped_leaf_span())
            where = flat_idx[sl].reshape(-1)
            vals = blocks[..., 0].reshape(basis.dim, -1)
            for a in range(basis.dim):
                col = np.zeros(nl_total)
                col[where] = scale * vals[a]
                cols.append(col)
            slices[q] = slice(pos, pos + basis.dim)
            pos += basis.dim
    V = np.stack(cols, axis=1) if cols else np.zeros((nl_total, 0))
    return V, slices, coarse_sl


def _check_resolution(spec: KernelSpec, measure: DiscreteMeasure) -> None:
    if spec.delta < 2.0 * measure.grid.leaf_side:
        raise ResolutionError(
            f"truncation delta={spec.delta:g} below 2 leaf sides; refine or enlarge delta"
        )


def assemble_sobolev_matrix(
    spec: KernelSpec,
    sigma: DiscreteMeasure,
    omega: DiscreteMeasure,
    s: float,
    kappa: int,
    grid_sigma: DyadicGrid | None = None,
    grid_omega: DyadicGrid | None = None,
    max_entries: int = 64_000_000,
) -> OperatorMatrix:
    if sigma.grid != omega.grid:
        raise ValueError("measures must share one leaf mesh")
    _check_resolution(spec, sigma)
    sys_s = get_system(sigma, kappa, grid_sigma)
    sys_w = get_system(omega, kappa, grid_omega)
    Vs, col_slices, col_coarse = _basis_value_matrix(sys_s, sigma.grid, s, "col")
    Vw, row_slices, row_coarse = _basis_value_matrix(sys_w, omega.grid, s, "row")
    if Vs.shape[1] * Vw.shape[1] > max_entries:
        raise MemoryError(
            f"matrix would hold {Vs.shape[1] * Vw.shape[1]} entries; raise max_entries or cap the depth"
        )
    pts = _leaf_centers(sigma.grid)
    K = kernel_matrix(spec, pts, pts)
    mid = K @ (sigma.leaf_masses.reshape(-1)[:, None] * Vs)
    M = (Vw * omega.leaf_masses.reshape(-1)[:, None]).T @ mid
    return OperatorMatrix(
        matrix=M,
        s=s,
        kappa=kappa,
        col_slices=col_slices,
        row_slices=row_slices,
        col_coarse=col_coarse,
        row_coarse=row_coarse,
        meta={
            "kernel": spec,
            "sigma": sigma.name,
            "omega": omega.name,
            "grid_sigma": (grid_sigma or sigma.grid).shift,
            "grid_omega": (grid_omega or omega.grid).shift,
        },
    )


def operator_norm(
    opmat: OperatorMatrix | np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    seed: int = 7,
) -> ConstantReport:
    """Largest singular value by power iteration on M^T M, with witness pair."""
    M = opmat.matrix if isinstance(opmat, OperatorMatrix) else np.asarray(opmat)
    if M.size == 0 or not np.any(M):
        return ConstantReport(name="operator_norm", value=0.0, witness={"converged": True})
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    sigma_old = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w = M @ v
        u = M.T @ w
        nu = np.linalg.norm(u)
        if nu == 0:
            break
        v = u / nu
        sigma_new = float(np.linalg.norm(M @ v))
        if abs(sigma_new - sigma_old) <= tol * max(sigma_new, 1e-300):
            sigma_old = sigma_new
            converged = True
            break
        sigma_old = sigma_new
    value = sigma_old
    w = M @ v
    nw = np.linalg.norm(w)
    witness = {
        "converged": converged,
        "iterations": iterations,
        "col_vector": v,
        "row_vector": w / nw if nw > 0 else w,
    }
    report = ConstantReport(name="operator_norm", value=value, witness=witness)
    if not converged:
        report.notes.append(f"power iteration hit the {max_iter} iteration cap")
    return report


def _cube_monomial_values(grid_std: DyadicGrid, q: DyadicCube, beta, kappa: int) -> np.ndarray:
    idx = multi_indices(grid_std.dimension, kappa)
    coeff = np.zeros(len(idx))
    coeff[idx.index(tuple(beta))] = 1.0
    fn = cube_poly_function(grid_std, q, coeff, kappa, coord_cube=q)
    return fn.values().reshape(-1)


def testing_constant(
    spec: KernelSpec,
    sigma: DiscreteMeasure,
    omega: DiscreteMeasure,
    s: float,
    kappa: int,
    mode: str = "cube",
    dual: bool = False,
    normalization: str = "mass",
    grids: Sequence[DyadicGrid] | None = None,
    opmat: OperatorMatrix | None = None,
    include_coarse: bool = False,
) -> ConstantReport:
    """kappa-cube (or triple) testing constant, sup over grids x cubes x monomials.

    normalization="mass" is the measure-normalized definition
    ell(Q)^s ||1_{(3)Q} T_sigma(1_Q m_Q^beta)||_{W^s(omega)} / sqrt(|Q|_sigma);
    normalization="norm" is the Rayleigh quotient ||M c||/||c|| of the
    assembled full matrix on the same test functions, which is exactly
    dominated by the operator norm. dual swaps the roles and s -> -s.
    include_coarse adds the root coarse energy to the mass-mode norm, making
    it the plain L2(omega) norm at s = 0.
    """
    if mode not in ("cube", "triple"):
        raise ValueError("mode must be 'cube' or 'triple'")
    if normalization not in ("mass", "norm"):
        raise ValueError("normalization must be 'mass' or 'norm'")
    if dual:
        return testing_constant(
            spec.transpose(), omega, sigma, -s, kappa,
            mode=mode, dual=False, normalization=normalization, grids=grids,
            opmat=None if opmat is None else _transpose_opmat(opmat),
            include_coarse=include_coarse,
        )
    grid_std = sigma.grid
    _check_resolution(spec, sigma)
    grids = list(grids) if grids is not None else third_trick_grids(grid_std)
    pts = _leaf_centers(grid_std)
    K = kernel_matrix(spec, pts, pts)
    sys_norm = get_system(omega, 1)
    if normalization == "norm" and opmat is None:
        opmat = assemble_sobolev_matrix(spec, sigma, omega, s, kappa)
    sys_kappa = get_system(sigma, kappa) if normalization == "norm" else None
    idx = multi_indices(grid_std.dimension, kappa)
    best, arg = 0.0, None
    skipped = 0
    sm = sigma.leaf_masses.reshape(-1)
    for g in grids:
        for d in range(1, g.max_depth + 1):
            for q in g.cubes_at_depth(d):
                if q.is_clipped:
                    continue
                mass = sigma.cube_mass(q)
                if mass <= 0:
                    skipped += 1
                    continue
                for beta in idx:
                    fvals = _cube_monomial_values(grid_std, q, beta, kappa)
                    tvals = K @ (sm * fvals)
                    if normalization == "mass":
                        spans = q.leaf_span()
                        if mode == "triple":
                            w = 1 << (grid_std.max_depth - q.depth)
                            spans = tuple((lo - w, hi + w) for lo, hi in spans)
                        masked = LeafFunction.from_values(
                            grid_std, tvals.reshape(sigma.density.shape)
                        ).restrict_box(spans)
                        from .sobolev import norm_dyadic

                        nrm = norm_dyadic(sys_norm.analyze(masked), s, include_coarse)
                        val = q.side ** (-s) * nrm / np.sqrt(mass)
                    else:
                        f = cube_poly_function(
                            grid_std, q, _unit_coeff(idx, beta), kappa, coord_cube=q
                        )
                        chat = opmat.col_vector(sys_kappa.analyze(f))
                        denom = float(np.linalg.norm(chat))
                        if denom <= 0:
                            skipped += 1
                            continue
                        val = float(np.linalg.norm(opmat.matrix @ chat)) / denom
                    if val > best:
                        best, arg = val, (g.shift, q.depth, q.coords, beta)
    witness = (
        {"grid_shift": arg[0], "depth": arg[1], "coords": arg[2], "beta": arg[3]}
        if arg
        else {}
    )
    report = ConstantReport(
        name=f"testing_{mode}{'_dual' if dual else ''}_{normalization}",
        value=best,
        witness=witness,
        params={"s": s, "kappa": kappa, "mode": mode, "normalization": normalization},
    )
    if skipped:
        report.notes.append(f"skipped {skipped} zero-mass or degenerate cubes")
    return report


def _unit_coeff(idx, beta):
    c = np.zeros(len(idx))
    c[idx.index(tuple(beta))] = 1.0
    return c


def _transpose_opmat(opmat: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(
        matrix=opmat.matrix.T,
        s=-opmat.s,
        kappa=opmat.kappa,
        col_slices=opmat.row_slices,
        row_slices=opmat.col_slices,
        col_coarse=opmat.row_coarse,
        row_coarse=opmat.col_coarse,
        meta={**opmat.meta, "transposed": True},
    )


def wbp_constant(
    spec: KernelSpec,
    sigma: DiscreteMeasure,
    omega: DiscreteMeasure,
    s: float,
    kappa: int,
    grids: Sequence[DyadicGrid] | None = None,
) -> ConstantReport:
    """Weak boundedness constant over touching-annulus cube pairs.

    Pairs (Q, Q') with Q' inside 3Q \\ Q or Q inside 3Q' \\ Q'; the inner sup
    over polynomial pairs is the generalized singular value problem with
    L2(sigma 1_Q) / L2(omega 1_Q') normalizations.
    """
    grid_std = sigma.grid
    _check_resolution(spec, sigma)
    grids = list(grids) if grids is not None else [grid_std]
    pts = _leaf_centers(grid_std)
    K = kernel_matrix(spec, pts, pts)
    idx = multi_indices(grid_std.dimension, kappa)
    sys_s = get_system(sigma, kappa)
    sys_w = get_system(omega, kappa)
    om = omega.leaf_masses.reshape(-1)
    sm = sigma.leaf_masses.reshape(-1)
    best, arg = 0.0, None

    def in_annulus(inner: DyadicCube, outer: DyadicCube) -> bool:
        w = 1 << (grid_std.max_depth - outer.depth)
        spans3 = tuple((lo - w, hi + w) for lo, hi in outer.leaf_span())
        inn = inner.leaf_span()
        inside3 = all(a <= lo and hi <= b for (a, b), (lo, hi) in zip(spans3, inn))
        disjoint = any(
            hi <= lo2 or hi2 <= lo
            for (lo, hi), (lo2, hi2) in zip(outer.leaf_span(), inn)
        )
        return inside3 and disjoint

    for g in grids:
        cubes = [q for q in g.cubes(1, g.max_depth) if not q.is_clipped]
        tmap = {}
        for q in cubes:
            if sigma.cube_mass(q) <= 0:
                continue
            cols = []
            for beta in idx:
                fv = _cube_monomial_values(grid_std, q, beta, kappa)
                cols.append(K @ (sm * fv))
            tmap[q] = np.stack(cols, axis=1)
        for q in cubes:
            if q not in tmap:
                continue
            for qp in cubes:
                if omega.cube_mass(qp) <= 0:
                    continue
                if not (in_annulus(qp, q) or in_annulus(q, qp)):
                    continue
                B = np.empty((len(idx), len(idx)))
                mvals = [
                    _cube_monomial_values(grid_std, qp, beta, kappa) * om for beta in idx
                ]
                for jb, mv in enumerate(mvals):
                    B[:, jb] = tmap[q].T @ mv
                Gs = sys_s._poly_gram(q, kappa)
                Gw = sys_w._poly_gram(qp, kappa)
                try:
                    Ls = np.linalg.cholesky(Gs)
                    Lw = np.linalg.cholesky(Gw)
                except np.linalg.LinAlgError:
                    continue
                core = np.linalg.solve(Ls, B)
                core = np.linalg.solve(Lw, core.T).T
                sv = float(np.linalg.svd(core, compute_uv=False)[0])
                val = q.side**s * qp.side ** (-s) * sv
                if val > best:
                    best, arg = val, (g.shift, repr(q), repr(qp))
    witness = {"grid_shift": arg[0], "Q": arg[1], "Qprime": arg[2]} if arg else {}
    return ConstantReport(
        name="wbp",
        value=best,
        witness=witness,
        params={"s": s, "kappa": kappa},
    )


def form_split(
    opmat: OperatorMatrix,
    f: WaveletCoefficients,
    g: WaveletCoefficients,
    rho: int,
    eps: float,
) -> dict[str, float]:
    """Cube-size splitting of the wavelet double sum into four buckets.

    Buckets: b_below (J deeply embedded in I), b_above (symmetric),
    b_disjoint (disjoint cubes with side ratio outside [2^-rho, 2^rho]) and
    b_comparable (everything else). Coarse parts are not part of the split;
    feed functions with vanishing root components for exact additivity
    against the full bilinear form.
    """
    params = GoodnessParams(rho, eps)
    buckets = {"b_below": 0.0, "b_above": 0.0, "b_disjoint": 0.0, "b_comparable": 0.0}
    cols = {q: 2.0 ** (opmat.s * q.depth) * c for q, c in f.entries.items() if np.any(c)}
    rows = {q: 2.0 ** (-opmat.s * q.depth) * c for q, c in g.entries.items() if np.any(c)}
    for i_cube, cvec in cols.items():
        csl = opmat.col_slices.get(i_cube)
        if csl is None:
            continue
        for j_cube, rvec in rows.items():
            rsl = opmat.row_slices.get(j_cube)
            if rsl is None:
                continue
            term = float(rvec @ opmat.matrix[rsl, csl] @ cvec)
            if term == 0.0:
                continue
            if is_deeply_embedded(j_cube, i_cube, params):
                buckets["b_below"] += term
            elif is_deeply_embedded(i_cube, j_cube, params):
                buckets["b_above"] += term
            else:
                spans_i, spans_j = i_cube.leaf_span(), j_cube.leaf_span()
                disjoint = any(
                    hi <= lo2 or hi2 <= lo
                    for (lo, hi), (lo2, hi2) in zip(spans_i, spans_j)
                )
                ratio = j_cube.side / i_cube.side
                if disjoint and not (2.0**-rho <= ratio <= 2.0**rho):
                    buckets["b_disjoint"] += term
                else:
                    buckets["b_comparable"] += term
    return buckets
