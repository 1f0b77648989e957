"""Reusable verification routines behind the CLI and the acceptance suite.

The basis checks deliberately go through the leaf-block function
representation (a different code path from the construction's cube-moment
tables) so they cross-check the orthonormalization.
"""

from __future__ import annotations

import numpy as np

from ._poly import local_product_moments, multi_indices, space_dim
from .grid import DyadicCube
from .leaffunc import LeafFunction, eval_global_monomial
from .measure import DiscreteMeasure
from .wavelet import get_system


def basis_quality(measure: DiscreteMeasure, kappa: int, rng: np.random.Generator) -> dict:
    """Gram, moment-vanishing, telescoping and round-trip errors for one system.

    Inner products here go through the leaf-block representation, a separate
    code path from the cube-moment tables used during construction.
    """
    grid = measure.grid
    system = get_system(measure, kappa)
    n = grid.dimension
    P = local_product_moments(n, kappa)
    M = P.shape[0]
    monomials = [
        eval_global_monomial(grid, b).with_kappa(kappa) for b in multi_indices(n, kappa)
    ]
    mono_blocks_full = np.stack([m.coeffs for m in monomials])
    gram_err = 0.0
    moment_err = 0.0
    sup_comp = 0.0
    dims_ok = True
    expected = (2**n - 1) * space_dim(n, kappa)
    samples = np.linspace(-0.5, 0.5, 3)
    if n == 1:
        basis_vals = np.stack([samples**b[0] for b in multi_indices(1, kappa)])
    else:
        px, py = np.meshgrid(samples, samples, indexing="ij")
        basis_vals = np.stack(
            [px.ravel() ** b[0] * py.ravel() ** b[1] for b in multi_indices(2, kappa)]
        )
    vol = measure.leaf_volume
    for d in range(grid.max_depth):
        for q in grid.cubes_at_depth(d):
            basis = system.basis(q)
            if basis.dim != expected:
                dims_ok = False
            if basis.dim == 0:
                continue
            sl = tuple(slice(lo, hi) for lo, hi in q.clipped_leaf_span())
            A = basis.span_blocks(grid).reshape(basis.dim, -1, M)
            dens = measure.density[sl].reshape(-1)
            G = vol * np.einsum("alm,mk,blk,l->ab", A, P, A, dens)
            gram_err = max(gram_err, float(np.abs(G - np.eye(basis.dim)).max()))
            B = mono_blocks_full[(slice(None),) + sl].reshape(len(monomials), -1, M)
            Mm = vol * np.einsum("alm,mk,blk,l->ab", A, P, B, dens)
            moment_err = max(moment_err, float(np.abs(Mm).max()))
            mass = measure.cube_mass(q)
            sup = float(np.abs(np.einsum("alm,mp->alp", A, basis_vals)).max())
            sup_comp = max(sup_comp, sup * np.sqrt(mass))
    tel_err = telescoping_error(measure, kappa, rng)
    rt_err = roundtrip_error(measure, kappa, rng)
    return {
        "gram_err": gram_err,
        "moment_err": moment_err,
        "telescoping_err": tel_err,
        "roundtrip_err": rt_err,
        "dims_ok": dims_ok,
        "sup_comparability": sup_comp,
    }


def telescoping_error(
    measure: DiscreteMeasure, kappa: int, rng: np.random.Generator, samples: int = 8
) -> float:
    """Max deviation in 1_Q sum_{Q strict I subset P} Delta_I f = E_Q f - 1_Q E_P f."""
    grid = measure.grid
    system = get_system(measure, kappa)
    f = LeafFunction.from_values(
        grid, rng.standard_normal((grid.n_leaves,) * grid.dimension)
    )
    err = 0.0
    for _ in range(samples):
        dq = int(rng.integers(2, grid.max_depth + 1))
        coords = tuple(int(rng.integers(0, 1 << dq)) for _ in range(grid.dimension))
        q = grid.cube(dq, coords)
        dp = int(rng.integers(0, dq - 1))
        p = q.ancestor(dq - dp)
        acc = LeafFunction.zeros(grid, kappa)
        cur = q.parent()
        while True:
            acc = acc + system.delta(cur, f)
            if cur == p:
                break
            cur = cur.parent()
        _, eq = system.project_E(q, f)
        _, ep = system.project_E(p, f)
        diff = acc.restrict(q) - (eq - ep.restrict(q))
        err = max(err, float(np.abs(diff.coeffs).max()))
    return err


def roundtrip_error(measure: DiscreteMeasure, kappa: int, rng: np.random.Generator) -> float:
    """Relative sup error of synthesize(analyze(f)) for a random leaf function."""
    grid = measure.grid
    vals = rng.standard_normal((grid.n_leaves,) * grid.dimension)
    f = LeafFunction.from_values(grid, vals)
    system = get_system(measure, kappa)
    back = system.synthesize(system.analyze(f))
    return float(np.abs(back.values() - vals).max() / np.abs(vals).max())


def parseval_error(measure: DiscreteMeasure, kappa: int, rng: np.random.Generator) -> float:
    grid = measure.grid
    f = LeafFunction.from_values(
        grid, rng.standard_normal((grid.n_leaves,) * grid.dimension)
    )
    co = get_system(measure, kappa).analyze(f)
    total = co.coefficient_l2_sq() + float(np.dot(co.coarse, co.coarse))
    return abs(total - co.l2_sq) / co.l2_sq


def doubling_suite(grid, cascade_seed: int = 12345) -> list[DiscreteMeasure]:
    """The four standing test measures: lebesgue, power 1, power -1/2, cascade."""
    from .measure import cascade_measure, lebesgue_measure, power_measure

    return [
        lebesgue_measure(grid),
        power_measure(grid, 1.0),
        power_measure(grid, -0.5),
        cascade_measure(grid, cascade_seed),
    ]
