"""Fractional Poisson integrals, Muckenhoupt A2, pivotal constants, decay checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DyadicCube, DyadicGrid, make_grid
from .measure import DiscreteMeasure
from .report import ConstantReport


@dataclass
class PivotalParams:
    alpha: float
    kappa: int
    eps: float
    strategy: str = "uniform_depth"  # or "greedy_stopping"
    depth_cap: int = 4
    gamma: float = 1.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.strategy not in ("uniform_depth", "greedy_stopping"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


def _leaf_centers(grid: DyadicGrid) -> np.ndarray:
    h = grid.leaf_side
    nl = grid.n_leaves
    ax = (np.arange(nl) + 0.5) * h
    if grid.dimension == 1:
        return ax[:, None]
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([gx, gy], axis=-1).reshape(-1, 2)


def poisson_integral(
    j: DyadicCube,
    measure: DiscreteMeasure,
    m: float,
    alpha: float,
    masses: np.ndarray | None = None,
) -> float:
    """P_m^alpha(J, mu) with exact cell masses and cell-center evaluation.

    masses overrides the measure's leaf masses (e.g. a restriction 1_Q mu).
    """
    if m < 1:
        raise ValueError("the Poisson order m must be >= 1")
    n = measure.n
    ell = j.side
    c = np.asarray(j.center())
    pts = _leaf_centers(measure.grid)
    d = np.sqrt(np.sum((pts - c[None, :]) ** 2, axis=1))
    w = ell**m / (ell + d) ** (m + n - alpha)
    mm = measure.leaf_masses if masses is None else masses
    return float(np.dot(w, mm.reshape(-1)))


def third_trick_grids(grid: DyadicGrid) -> list[DyadicGrid]:
    """The given grid plus the 3^n leaf-lattice shifts approximating thirds."""
    nl = grid.n_leaves
    s1, s2 = round(nl / 3), round(2 * nl / 3)
    shifts = sorted({0, s1 % nl, s2 % nl})
    n = grid.dimension
    grids = []
    if n == 1:
        for a in shifts:
            grids.append(make_grid(1, grid.max_depth, (a,)))
    else:
        for a in shifts:
            for b in shifts:
                grids.append(make_grid(2, grid.max_depth, (a, b)))
    return grids


def muckenhoupt_a2(
    sigma: DiscreteMeasure,
    omega: DiscreteMeasure,
    alpha: float,
    grids: list[DyadicGrid] | None = None,
) -> ConstantReport:
    """sup over ensemble cubes of |Q|_omega |Q|_sigma / |Q|^{2(1-alpha/n)}.

    |Q| is Lebesgue volume. Shifted-grid cubes protruding past the box are
    excluded.
    """
    if sigma.grid != omega.grid:
        raise ValueError("measures must share one leaf mesh")
    n = sigma.n
    grids = grids or third_trick_grids(sigma.grid)
    best, arg = -1.0, None
    for g in grids:
        for q in g.cubes(0, g.max_depth):
            if q.is_clipped:
                continue
            vol = q.side**n
            val = sigma.cube_mass(q) * omega.cube_mass(q) / vol ** (2 * (1 - alpha / n))
            if val > best:
                best, arg = val, q
    return ConstantReport(
        name="A2",
        value=best,
        witness={"cube": repr(arg), "grid_shift": arg.grid.shift},
        params={"alpha": alpha, "n_grids": len(grids)},
    )


def _descendants_at(q: DyadicCube, extra_depth: int) -> list[DyadicCube]:
    out = [q]
    for _ in range(extra_depth):
        out = [c for cube in out for c in cube.children()]
    return out


def pivotal_constant(
    sigma: DiscreteMeasure, omega: DiscreteMeasure, params: PivotalParams
) -> ConstantReport:
    """Certified lower bound for the eps-strong kappa-pivotal constant squared.

    The sup over arbitrary subdecompositions is not computable; this
    enumerates uniform-depth partitions (and optionally greedy stopping
    families) below every dyadic top cube and reports the best value found.
    """
    grid = sigma.grid
    best, arg = 0.0, None
    for q in grid.cubes(0, grid.max_depth - 1):
        mass_q = sigma.cube_mass(q)
        if mass_q <= 0:
            continue
        restricted = sigma.masked_leaf_masses(q)
        families = []
        max_t = min(params.depth_cap, grid.max_depth - q.depth)
        for t in range(1, max_t + 1):
            families.append((f"uniform_depth_{t}", _descendants_at(q, t)))
        if params.strategy == "greedy_stopping":
            from .corona import build_corona

            forest = build_corona(q, sigma, omega, params.gamma, params.kappa, params.alpha)
            if len(forest.generations) > 1 and forest.generations[1]:
                families.append(("greedy_stopping", forest.generations[1]))
        for label, cubes in families:
            acc = 0.0
            for qr in cubes:
                p = poisson_integral(qr, sigma, params.kappa, params.alpha, masses=restricted)
                acc += (
                    p * p * (q.side / qr.side) ** params.eps * omega.cube_mass(qr)
                )
            val = acc / mass_q
            if val > best:
                best, arg = val, (q, label)
    witness = {"cube": repr(arg[0]), "family": arg[1]} if arg else {}
    return ConstantReport(
        name="pivotal_lower_bound_sq",
        value=best,
        witness=witness,
        params={
            "alpha": params.alpha,
            "kappa": params.kappa,
            "eps": params.eps,
            "strategy": params.strategy,
        },
        notes=["lower bound from enumerated decomposition families"],
    )


def poisson_decay_ratio(
    j: DyadicCube,
    i: DyadicCube,
    k_outer: DyadicCube,
    sigma: DiscreteMeasure,
    m: float,
    alpha: float,
    eps: float,
) -> float | None:
    """Ratio P_m(J, sigma 1_{K\\I}) / [(l(J)/l(I))^{m-eps(n+m-alpha)} P_m(I, sigma 1_{K\\I})].

    Returns None when the annulus carries no mass. J = I is allowed for
    degenerate testing and gives 1.
    """
    n = sigma.n
    if j != i:
        if not (i.contains(j) and k_outer.contains(i)):
            raise ValueError("need J subset I subset K")
        lo, hi = i.lower(), i.upper()
        edge = min(
            min(j.lower()[ax] - lo[ax], hi[ax] - j.upper()[ax]) for ax in range(n)
        )
        if edge <= 2 * np.sqrt(n) * j.side**eps * i.side ** (1 - eps):
            raise ValueError("J is not deeply inside I for the decay estimate")
    annulus = sigma.masked_leaf_masses(k_outer) - sigma.masked_leaf_masses(i)
    annulus = np.maximum(annulus, 0.0)
    if annulus.sum() <= 0:
        return None
    pj = poisson_integral(j, sigma, m, alpha, masses=annulus)
    pi = poisson_integral(i, sigma, m, alpha, masses=annulus)
    if pi <= 0:
        return None
    factor = (j.side / i.side) ** (m - eps * (n + m - alpha))
    return float(pj / (factor * pi))
