"""Numerical checks of the monotonicity-type and energy-type bounds.

Sobolev quantities in this module include the root coarse term so the s = 0
cases reduce to exact Parseval identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._poly import central_difference_stencil, multi_indices
from .grid import DyadicCube
from .leaffunc import LeafFunction, eval_global_monomial
from .measure import DiscreteMeasure
from .operator import KernelSpec, kernel_eval
from .poisson import _leaf_centers
from .sobolev import norm_dyadic
from .wavelet import get_system


@dataclass
class MonotonicityTerms:
    lhs: float
    phi_sq: float
    psi_sq: float
    m_point: tuple[float, ...]
    holder_delta: float

    @property
    def ratio(self) -> float:
        denom = self.phi_sq + self.psi_sq
        return self.lhs / denom if denom > 0 else float("nan")


def kernel_x_derivative(
    spec: KernelSpec, beta: tuple[int, ...], x0: np.ndarray, y_pts: np.ndarray, step: float
) -> np.ndarray:
    """Central finite difference of partial^beta_x K(x, y) at x0, vectorized in y."""
    n = len(beta)
    grids = [central_difference_stencil(b, step) for b in beta]
    out = np.zeros(y_pts.shape[0])
    for combo in product(*[range(len(g[0])) for g in grids]):
        w = 1.0
        x = np.array(x0, dtype=float)
        for ax, ci in enumerate(combo):
            offs, wts = grids[ax]
            x[ax] += offs[ci]
            w *= wts[ci]
        out += w * kernel_eval(spec, x[None, :], y_pts)
    return out


def _restricted_measure(measure: DiscreteMeasure, q: DyadicCube) -> DiscreteMeasure:
    dens = np.array(measure.density)
    mask = np.zeros_like(dens, dtype=bool)
    sl = tuple(slice(lo, hi) for lo, hi in q.clipped_leaf_span())
    mask[sl] = True
    dens[~mask] = 0.0
    return DiscreteMeasure(measure.grid, dens, name=f"{measure.name}|{q!r}")


_RESTRICTED_SYSTEMS: dict = {}


def _restricted_system(measure: DiscreteMeasure, q: DyadicCube):
    key = (id(measure), q)
    if key not in _RESTRICTED_SYSTEMS:
        _RESTRICTED_SYSTEMS[key] = get_system(_restricted_measure(measure, q), 1)
    return _RESTRICTED_SYSTEMS[key]


def _modulus_power_norm_sq(
    measure: DiscreteMeasure, q: DyadicCube, m: tuple[float, ...], kappa: int, s: float
) -> float:
    """||  |x-m|^kappa ||^2 in W^s of the measure restricted to Q (coarse included)."""
    pts = _leaf_centers(measure.grid)
    d = np.sqrt(np.sum((pts - np.asarray(m)[None, :]) ** 2, axis=1)) ** kappa
    f = LeafFunction.from_values(measure.grid, d.reshape(measure.density.shape)).restrict(q)
    sysr = _restricted_system(measure, q)
    return norm_dyadic(sysr.analyze(f), s, include_coarse=True) ** 2


def minimizing_point(
    measure: DiscreteMeasure, q: DyadicCube, kappa: int, s: float
) -> tuple[tuple[float, ...], float]:
    """Grid search over leaf centers in Q for the minimizer of the modulus norm.

    Ties break toward the cube center.
    """
    grid = measure.grid
    h = grid.leaf_side
    spans = q.clipped_leaf_span()
    center = np.asarray(q.center())
    best_val, best_pt, best_key = None, None, None
    axes = [np.arange(lo, hi) for lo, hi in spans]
    for combo in product(*axes):
        pt = tuple((c + 0.5) * h for c in combo)
        val = _modulus_power_norm_sq(measure, q, pt, kappa, s)
        key = (val, float(np.max(np.abs(np.asarray(pt) - center))))
        if best_key is None or key < best_key:
            best_key, best_val, best_pt = key, val, pt
    return best_pt, best_val


def modulus_wavelet_ratio(measure: DiscreteMeasure, q: DyadicCube, kappa: int, s: float) -> float:
    """|| |h_Q| ||^2_{W^{-s}} / (||  |h_Q| ||^2_{L^2} ell(Q)^{2s}) for the wavelet vector.

    The pointwise Euclidean modulus is sampled at leaf centers; normalizing
    by its own L2 mass makes the s = 0 value exactly 1 for every kappa.
    """
    system = get_system(measure, kappa)
    basis = system.basis(q)
    if basis.dim == 0:
        raise ValueError(f"no basis at {q}")
    sq = np.zeros((measure.grid.n_leaves,) * measure.n)
    for fn in basis.functions(measure.grid):
        sq += fn.values() ** 2
    mod = LeafFunction.from_values(measure.grid, np.sqrt(sq))
    sys1 = get_system(measure, 1)
    co = sys1.analyze(mod)
    num = norm_dyadic(co, -s, include_coarse=True) ** 2
    denom = mod.inner(measure, mod) * q.side ** (2 * s)
    return float(num / denom)


def _support_outside(masses: np.ndarray, grid, box_lo, box_hi) -> bool:
    """All mass sits strictly outside the real box [box_lo, box_hi]^n."""
    pts = _leaf_centers(grid)
    m = masses.reshape(-1)
    inside = np.ones(len(m), dtype=bool)
    for ax in range(grid.dimension):
        inside &= (pts[:, ax] > box_lo[ax]) & (pts[:, ax] < box_hi[ax])
    return not np.any(m[inside] > 0)


def monotonicity_terms(
    j: DyadicCube,
    remote_masses: np.ndarray,
    omega: DiscreteMeasure,
    kappa: int,
    s: float,
    holder_delta: float,
    spec: KernelSpec,
    m_point: tuple[float, ...] | None = None,
) -> MonotonicityTerms:
    """The three quantities of the kappa-th order smoothness estimate.

    remote_masses is the cell-mass vector of the remote (signed) measure; it
    must vanish on the concentric double 2J. The kernel derivative at the
    minimizing point uses central differences with step leaf/4.
    """
    grid = omega.grid
    n = omega.n
    c = np.asarray(j.center())
    half = j.side
    if not _support_outside(remote_masses, grid, c - half, c + half):
        raise ValueError("remote measure must vanish on the double of J")
    sysw = get_system(omega, kappa)
    pts = _leaf_centers(grid)
    tvals = kernel_eval(spec, pts[:, None, :], pts[None, :, :]) @ remote_masses.reshape(-1)
    tfun = LeafFunction.from_values(grid, tvals.reshape(omega.density.shape))
    coeff = sysw.delta_coeffs(j, tfun)
    lhs = 4.0 ** (s * j.depth) * float(np.dot(coeff, coeff))

    if m_point is None:
        m_point, mod_norm_sq = minimizing_point(omega, j, kappa, s)
    else:
        mod_norm_sq = _modulus_power_norm_sq(omega, j, m_point, kappa, s)

    step = grid.leaf_side / 4.0
    abs_masses = np.abs(remote_masses.reshape(-1))
    phi_sq = 0.0
    top = [b for b in multi_indices(n, kappa + 1) if sum(b) == kappa]
    for beta in top:
        dval = float(
            np.dot(kernel_x_derivative(spec, beta, np.asarray(m_point), pts, step),
                   remote_masses.reshape(-1))
        )
        xb = eval_global_monomial(grid, beta)
        cb = sysw.delta_coeffs(j, xb)
        phi_sq += dval**2 * 4.0 ** (s * j.depth) * float(np.dot(cb, cb))

    abs_measure_masses = abs_masses
    p_far = _poisson_masses(j, grid, kappa + holder_delta, spec.alpha, abs_measure_masses)
    mod_ratio = modulus_wavelet_ratio(omega, j, kappa, s)
    psi_sq = (p_far / j.side**kappa) ** 2 * mod_norm_sq * mod_ratio
    return MonotonicityTerms(
        lhs=lhs, phi_sq=phi_sq, psi_sq=psi_sq, m_point=tuple(m_point), holder_delta=holder_delta
    )


def _poisson_masses(j: DyadicCube, grid, m: float, alpha: float, masses: np.ndarray) -> float:
    pts = _leaf_centers(grid)
    c = np.asarray(j.center())
    d = np.sqrt(np.sum((pts - c[None, :]) ** 2, axis=1))
    ell = j.side
    w = ell**m / (ell + d) ** (m + grid.dimension - alpha)
    return float(np.dot(w, masses.reshape(-1)))


def energy_pivotal_ratio(
    j: DyadicCube,
    far_masses: np.ndarray,
    psi: LeafFunction,
    kappa: int,
    s: float,
    spec: KernelSpec,
    omega: DiscreteMeasure,
    gamma: float = 2.0,
) -> float:
    """Measured constant in the pivotal-type bound for one far-mass configuration.

    |<T nu, Psi_J>| / [P_kappa(J, nu) ell(J)^{-s} sqrt(|J|_omega)
    ||Psi_J||_{W^{-s}} mod_ratio]. Psi_J must be supported in J with
    vanishing omega-moments below order kappa; nu must vanish on gamma J.
    """
    grid = omega.grid
    c = np.asarray(j.center())
    half = gamma * j.side / 2.0
    if not _support_outside(far_masses, grid, c - half, c + half):
        raise ValueError(f"far measure must vanish on {gamma} J")
    sysw = get_system(omega, kappa)
    mom = sysw._region_monomial_moments(psi, j, j)
    scale = max(psi.norm_l2(omega), 1e-30)
    if np.max(np.abs(mom)) > 1e-8 * scale:
        raise ValueError("Psi_J must have vanishing omega-moments below order kappa")
    pts = _leaf_centers(grid)
    tvals = kernel_eval(spec, pts[:, None, :], pts[None, :, :]) @ far_masses.reshape(-1)
    numer = abs(float(np.dot(tvals * omega.leaf_masses.reshape(-1), psi.values().reshape(-1))))
    p = _poisson_masses(j, grid, kappa, spec.alpha, np.abs(far_masses))
    mass_j = omega.cube_mass(j)
    psi_norm = norm_dyadic(sysw.analyze(psi), -s, include_coarse=True)
    mod_ratio = modulus_wavelet_ratio(omega, j, kappa, s)
    denom = p * j.side ** (-s) * np.sqrt(mass_j) * psi_norm * mod_ratio
    if denom <= 0:
        return 0.0
    return numer / denom
