"""Pivotal stopping-time corona decomposition and its quantitative checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import DyadicCube
from .leaffunc import LeafFunction
from .measure import DiscreteMeasure
from .poisson import poisson_integral
from .report import ConstantReport
from .wavelet import get_system


@dataclass
class CoronaForest:
    """Stopping cubes organized by generation, with the tree parent map.

    generations[0] is [root]; generations[g] holds the maximal cubes whose
    Poisson-mass quotient trips the threshold gamma inside their parent's
    corona. Coronas partition the cubes below the root.
    """

    root: DyadicCube
    generations: list[list[DyadicCube]]
    parent: dict[DyadicCube, DyadicCube]
    gamma: float
    kappa: int
    alpha: float

    def stopping_cubes(self) -> list[DyadicCube]:
        return [f for gen in self.generations for f in gen]

    def corona_of(self, q: DyadicCube) -> DyadicCube:
        """The stopping cube whose corona contains q (deepest F with F >= q)."""
        tops = set(self.stopping_cubes())
        cur = q
        while True:
            if cur in tops:
                return cur
            if cur.depth == 0:
                return self.root
            cur = cur.parent()

    def corona_members(self, f: DyadicCube) -> list[DyadicCube]:
        """All cubes of C_F: inside F but inside no stopping child of F."""
        grid = self.root.grid
        out = []
        for d in range(f.depth, grid.max_depth + 1):
            for q in grid.cubes_at_depth(d):
                if f.contains(q) and self.corona_of(q) == f:
                    out.append(q)
        return out

    def stopping_children(self, f: DyadicCube) -> list[DyadicCube]:
        return [c for c, p in self.parent.items() if p == f]


def build_corona(
    root: DyadicCube,
    sigma: DiscreteMeasure,
    omega: DiscreteMeasure,
    gamma: float,
    kappa: int,
    alpha: float,
) -> CoronaForest:
    """Recursive maximal-cube stopping construction below `root`.

    A cube I strictly inside the current top F stops when
    P_kappa^alpha(I, 1_F sigma)^2 |I|_omega >= gamma |I|_sigma. The recursion
    only descends to depth max_depth - 1 so stopping cubes always have
    children; bottom coronas absorb the leaves.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    grid = root.grid
    generations: list[list[DyadicCube]] = [[root]]
    parent: dict[DyadicCube, DyadicCube] = {}
    current = [root]
    while current:
        nxt: list[DyadicCube] = []
        for f in current:
            restricted = sigma.masked_leaf_masses(f)
            frontier = list(f.children()) if f.depth < grid.max_depth else []
            while frontier:
                q = frontier.pop()
                if q.depth > grid.max_depth - 1:
                    continue
                mass_s = sigma.cube_mass(q)
                p = poisson_integral(q, sigma, kappa, alpha, masses=restricted)
                lhs = p * p * omega.cube_mass(q)
                if lhs >= gamma * mass_s and (lhs > 0 or gamma == 0):
                    nxt.append(q)
                    parent[q] = f
                elif q.depth < grid.max_depth - 1:
                    frontier.extend(q.children())
        if nxt:
            generations.append(nxt)
        current = nxt
    return CoronaForest(
        root=root, generations=generations, parent=parent, gamma=gamma, kappa=kappa, alpha=alpha
    )


def carleson_constant(
    forest: CoronaForest, sigma: DiscreteMeasure, eps: float
) -> ConstantReport:
    """sup over stopping F' of |F'|^{-1} sum_{F in forest, F inside F'} (l(F')/l(F))^eps |F|."""
    tops = forest.stopping_cubes()
    best, arg = 0.0, None
    for fp in tops:
        denom = sigma.cube_mass(fp)
        if denom <= 0:
            continue
        acc = 0.0
        for f in tops:
            if fp.contains(f):
                acc += (fp.side / f.side) ** eps * sigma.cube_mass(f)
        val = acc / denom
        if val > best:
            best, arg = val, fp
    return ConstantReport(
        name="carleson",
        value=best,
        witness={"cube": repr(arg)},
        params={"eps": eps, "gamma": forest.gamma, "n_stopping": len(tops)},
    )


def per_generation_ratios(forest: CoronaForest, sigma: DiscreteMeasure, eps: float) -> list[float]:
    """Mass ratios sum_{F' child of F}(l(F)/l(F'))^eps |F'| / |F| per stopping cube."""
    out = []
    for f in forest.stopping_cubes():
        kids = forest.stopping_children(f)
        if not kids:
            continue
        denom = sigma.cube_mass(f)
        if denom <= 0:
            continue
        out.append(
            sum((f.side / c.side) ** eps * sigma.cube_mass(c) for c in kids) / denom
        )
    return out


def quasiorthogonality_ratio(
    forest: CoronaForest,
    ensemble: list[LeafFunction],
    s: float,
    kappa: int,
    measure: DiscreteMeasure,
) -> float:
    """max over the ensemble of sum_F l(F)^{-2s} ||E_F f||^2 / ||f||_{W^s}^2."""
    from .sobolev import norm_dyadic

    system = get_system(measure, kappa)
    best = 0.0
    for f in ensemble:
        denom = norm_dyadic(system.analyze(f), s) ** 2
        if denom <= 1e-28:
            continue
        acc = 0.0
        for top in forest.stopping_cubes():
            c, _ = system.project_E(top, f, kappa)
            b = system._region_monomial_moments(f, top, top)
            acc += 4.0 ** (s * top.depth) * float(np.dot(c, b))
        best = max(best, acc / denom)
    return best


@dataclass
class ShiftedCorona:
    """tau-shifted corona membership: cube -> list of stopping tops owning it."""

    tau: int
    assignment: dict[DyadicCube, list[DyadicCube]] = field(default_factory=dict)

    def overlap(self, q: DyadicCube) -> int:
        return len(self.assignment.get(q, []))

    def max_overlap(self) -> int:
        return max((len(v) for v in self.assignment.values()), default=0)


def shifted_corona_assign(forest: CoronaForest, tau: int) -> ShiftedCorona:
    """C_F^{tau-shift}: C_F minus its top tau levels, plus the top tau levels
    of each stopping child not already removed."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    grid = forest.root.grid

    def near_top(f: DyadicCube, q: DyadicCube) -> bool:
        return f.contains(q) and q.side > 2.0**-tau * f.side

    def top_levels(f: DyadicCube) -> list[DyadicCube]:
        out_ = []
        for d in range(f.depth, min(f.depth + tau, grid.max_depth + 1)):
            out_.extend(q for q in grid.cubes_at_depth(d) if f.contains(q))
        return out_

    out: dict[DyadicCube, list[DyadicCube]] = {}
    tops = forest.stopping_cubes()
    members = {f: set(forest.corona_members(f)) for f in tops}
    kids = {f: forest.stopping_children(f) for f in tops}
    for f in tops:
        shifted = {q for q in members[f] if not near_top(f, q)}
        for child in kids[f]:
            for q in top_levels(child):
                if not near_top(f, q):
                    shifted.add(q)
        for q in shifted:
            out.setdefault(q, []).append(f)
    sc = ShiftedCorona(tau=tau, assignment=out)
    if sc.max_overlap() > tau:
        raise AssertionError("shifted corona overlap exceeded tau")
    return sc


def serialize_forest(forest: CoronaForest, path: str | Path) -> None:
    """One line per stopping cube: depth coords generation parent-index."""
    tops = forest.stopping_cubes()
    index = {f: i for i, f in enumerate(tops)}
    lines = []
    for g, gen in enumerate(forest.generations):
        for f in gen:
            parent = forest.parent.get(f)
            pidx = index[parent] if parent is not None else -1
            coords = " ".join(str(c) for c in f.coords)
            lines.append(f"{f.depth} {coords} {g} {pidx}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def deserialize_forest(
    path: str | Path,
    root: DyadicCube,
    gamma: float = float("nan"),
    kappa: int = 1,
    alpha: float = 0.0,
) -> CoronaForest:
    grid = root.grid
    tops: list[DyadicCube] = []
    gens: dict[int, list[DyadicCube]] = {}
    parents_idx: list[int] = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        parts = line.split()
        depth = int(parts[0])
        coords = tuple(int(x) for x in parts[1 : 1 + grid.dimension])
        g = int(parts[1 + grid.dimension])
        pidx = int(parts[2 + grid.dimension])
        q = grid.cube(depth, coords)
        gens.setdefault(g, []).append(q)
        tops.append(q)
        parents_idx.append(pidx)
    parent = {
        tops[i]: tops[p] for i, p in enumerate(parents_idx) if p >= 0
    }
    generations = [gens[g] for g in sorted(gens)]
    return CoronaForest(
        root=root, generations=generations, parent=parent, gamma=gamma, kappa=kappa, alpha=alpha
    )
