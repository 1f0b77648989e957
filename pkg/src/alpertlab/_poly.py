"""Multi-index bookkeeping and exact monomial integrals on dyadic leaf meshes.

All function representations in this package are polynomial blocks in
leaf-local coordinates u = (x - c_leaf) / h with u in [-1/2, 1/2]^n, so every
inner product reduces to the closed-form moments computed here.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(n: int, kappa: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices of total degree < kappa in n variables, graded-lex order."""
    out = []
    for total in range(kappa):
        level = []

        def rec(prefix, remaining, axes_left):
            if axes_left == 1:
                level.append(prefix + (remaining,))
                return
            for k in range(remaining + 1):
                rec(prefix + (k,), remaining - k, axes_left - 1)

        rec((), total, n)
        out.extend(sorted(level))
    return tuple(out)


def space_dim(n: int, kappa: int) -> int:
    return len(multi_indices(n, kappa))


@lru_cache(maxsize=None)
def centered_moments(kmax: int) -> np.ndarray:
    """m_k = integral of u^k over [-1/2, 1/2], k = 0..kmax."""
    m = np.zeros(kmax + 1)
    for k in range(0, kmax + 1, 2):
        m[k] = (0.5**k) / (k + 1)
    return m


@lru_cache(maxsize=None)
def local_product_moments(n: int, kappa: int) -> np.ndarray:
    """Matrix P with P[i, j] = integral over [-1/2,1/2]^n of u^{b_i + b_j} du.

    Indices follow multi_indices(n, kappa); the per-leaf inner product of two
    blocks is vol(leaf) * density * a^T P b.
    """
    idx = multi_indices(n, kappa)
    m = centered_moments(2 * (kappa - 1))
    P = np.empty((len(idx), len(idx)))
    for i, bi in enumerate(idx):
        for j, bj in enumerate(idx):
            P[i, j] = np.prod([m[bi[ax] + bj[ax]] for ax in range(n)])
    return P


def axis_monomial_integrals(
    lo: int, hi: int, leaf_h: float, center: float, scale: float, kmax: int
) -> np.ndarray:
    """Exact 1d integrals over leaves: I[k, j] = int_leaf ((x-center)/scale)^k dx.

    Leaves are [j*leaf_h, (j+1)*leaf_h) for j in [lo, hi).
    """
    j = np.arange(lo, hi)
    t0 = (j * leaf_h - center) / scale
    t1 = ((j + 1) * leaf_h - center) / scale
    out = np.empty((kmax + 1, hi - lo))
    p0, p1 = t0.copy(), t1.copy()
    for k in range(kmax + 1):
        out[k] = scale * (p1 - p0) / (k + 1)
        p0 *= t0
        p1 *= t1
    return out


def axis_rebase_coeffs(
    lo: int, hi: int, leaf_h: float, center: float, scale: float, bmax: int
) -> np.ndarray:
    """Expansion of cube monomials in leaf-local coordinates.

    ((x - center)/scale)^b = sum_r C[b, r, j] u^r on leaf j, where
    u = (x - c_leaf)/leaf_h. Returns C with shape (bmax+1, bmax+1, hi-lo).
    """
    j = np.arange(lo, hi)
    a = ((j + 0.5) * leaf_h - center) / scale
    t = leaf_h / scale
    C = np.zeros((bmax + 1, bmax + 1, hi - lo))
    for b in range(bmax + 1):
        for r in range(b + 1):
            C[b, r] = comb(b, r) * a ** (b - r) * t**r
    return C


def axis_cross_integrals(
    lo: int, hi: int, leaf_h: float, center: float, scale: float, gmax: int, bmax: int
) -> np.ndarray:
    """J[g, b, j] = int_leaf u^g ((x-center)/scale)^b dx on each leaf j."""
    C = axis_rebase_coeffs(lo, hi, leaf_h, center, scale, bmax)
    m = centered_moments(gmax + bmax)
    J = np.zeros((gmax + 1, bmax + 1, hi - lo))
    for g in range(gmax + 1):
        for b in range(bmax + 1):
            # int u^g u^r du = m[g+r]; dx = leaf_h du
            J[g, b] = leaf_h * np.tensordot(m[g : g + b + 1], C[b, : b + 1], axes=(0, 0))
    return J


def central_difference_stencil(order: int, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the standard central finite-difference stencil."""
    if order == 0:
        return np.array([0.0]), np.array([1.0])
    if order == 1:
        return np.array([-step, step]), np.array([-0.5, 0.5]) / step
    if order == 2:
        return np.array([-step, 0.0, step]), np.array([1.0, -2.0, 1.0]) / step**2
    if order == 3:
        return (
            np.array([-2 * step, -step, step, 2 * step]),
            np.array([-0.5, 1.0, -1.0, 0.5]) / step**3,
        )
    if order == 4:
        return (
            np.array([-2 * step, -step, 0.0, step, 2 * step]),
            np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / step**4,
        )
    raise ValueError(f"unsupported derivative order {order}")


def smoothstep(u: np.ndarray | float, order: int) -> np.ndarray | float:
    """Polynomial smoothstep S on [0,1] with S(0)=0, S(1)=1 and C^order joins."""
    u = np.clip(u, 0.0, 1.0)
    N = order
    acc = 0.0
    for k in range(N + 1):
        acc = acc + comb(N + k, k) * comb(2 * N + 1, N - k) * (-u) ** k
    return u ** (N + 1) * acc
