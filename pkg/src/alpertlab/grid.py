"""Dyadic cube geometry on the unit box [0,1)^n.

Grids may be translated by integer multiples of the leaf side 2^-D_max, so
every shifted cube decomposes exactly into standard leaf cells. Cubes are
half-open boxes; distances are in the sup metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product


class Relation(Enum):
    EQUAL = "equal"
    INSIDE = "inside"
    CONTAINS = "contains"
    TOUCH = "touch"
    SEPARATED = "separated"


@dataclass(frozen=True)
class DyadicGrid:
    """Dyadic grid of depth 0..max_depth over [0,1)^n, shifted on the leaf lattice."""

    dimension: int
    max_depth: int
    shift: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.max_depth <= 0:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if len(self.shift) != self.dimension:
            raise ValueError("shift must have one component per axis")
        if any(not (0 <= s < self.n_leaves) for s in self.shift):
            raise ValueError(f"shift components must lie in [0, {self.n_leaves})")

    @property
    def n_leaves(self) -> int:
        return 1 << self.max_depth

    @property
    def leaf_side(self) -> float:
        return 2.0**-self.max_depth

    @property
    def is_standard(self) -> bool:
        return all(s == 0 for s in self.shift)

    def cube(self, depth: int, coords: tuple[int, ...]) -> "DyadicCube":
        return DyadicCube(depth, tuple(coords), self)

    @property
    def root(self) -> "DyadicCube":
        return self.cube(0, (0,) * self.dimension)

    def cubes_at_depth(self, depth: int):
        for coords in product(range(1 << depth), repeat=self.dimension):
            yield self.cube(depth, coords)

    def cubes(self, min_depth: int = 0, max_depth: int | None = None):
        top = self.max_depth if max_depth is None else max_depth
        for d in range(min_depth, top + 1):
            yield from self.cubes_at_depth(d)


def make_grid(n: int, d_max: int, shift: int | tuple[int, ...] = 0) -> DyadicGrid:
    """Build a dyadic grid on [0,1)^n with origin translated by shift leaf cells."""
    if isinstance(shift, int):
        shift = (shift,) * n
    return DyadicGrid(n, d_max, tuple(shift))


@dataclass(frozen=True)
class DyadicCube:
    depth: int
    coords: tuple[int, ...]
    grid: DyadicGrid

    def __post_init__(self):
        if self.depth < 0 or self.depth > self.grid.max_depth:
            raise ValueError(f"depth {self.depth} outside 0..{self.grid.max_depth}")
        if any(not (0 <= c < (1 << self.depth)) for c in self.coords):
            raise ValueError(f"coords {self.coords} out of range at depth {self.depth}")

    @property
    def n(self) -> int:
        return self.grid.dimension

    @property
    def side(self) -> float:
        return 2.0**-self.depth

    def leaf_span(self) -> tuple[tuple[int, int], ...]:
        """Unclipped per-axis half-open leaf index ranges, including the grid shift."""
        w = 1 << (self.grid.max_depth - self.depth)
        return tuple((c * w + s, (c + 1) * w + s) for c, s in zip(self.coords, self.grid.shift))

    def clipped_leaf_span(self) -> tuple[tuple[int, int], ...]:
        nl = self.grid.n_leaves
        return tuple((min(max(lo, 0), nl), min(max(hi, 0), nl)) for lo, hi in self.leaf_span())

    @property
    def is_clipped(self) -> bool:
        """True when the cube protrudes past [0,1)^n."""
        nl = self.grid.n_leaves
        return any(lo < 0 or hi > nl for lo, hi in self.leaf_span())

    def lower(self) -> tuple[float, ...]:
        h = self.grid.leaf_side
        return tuple(lo * h for lo, _ in self.leaf_span())

    def upper(self) -> tuple[float, ...]:
        h = self.grid.leaf_side
        return tuple(hi * h for _, hi in self.leaf_span())

    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (a + b) for a, b in zip(self.lower(), self.upper()))

    def children(self) -> list["DyadicCube"]:
        if self.depth >= self.grid.max_depth:
            raise ValueError("leaf cubes have no children")
        out = []
        for off in product((0, 1), repeat=self.n):
            coords = tuple(2 * c + o for c, o in zip(self.coords, off))
            out.append(self.grid.cube(self.depth + 1, coords))
        return out

    def parent(self) -> "DyadicCube":
        if self.depth == 0:
            raise ValueError("root cube has no parent")
        return self.grid.cube(self.depth - 1, tuple(c >> 1 for c in self.coords))

    def ancestor(self, m: int) -> "DyadicCube":
        if m < 0 or m > self.depth:
            raise ValueError(f"ancestor level {m} outside 0..{self.depth}")
        return self.grid.cube(self.depth - m, tuple(c >> m for c in self.coords))

    def contains(self, other: "DyadicCube") -> bool:
        a, b = self.leaf_span(), other.leaf_span()
        return all(sa <= oa and ob <= sb for (sa, sb), (oa, ob) in zip(a, b))

    def __repr__(self):
        return f"Q(d={self.depth}, k={self.coords})"


@dataclass(frozen=True)
class GoodnessParams:
    r: int
    eps: float

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")


def _interval_gap(a0: float, a1: float, b0: float, b1: float) -> float:
    """Distance between closed intervals [a0,a1] and [b0,b1]."""
    return max(0.0, b0 - a1, a0 - b1)


def _point_gap(a0: float, a1: float, p: float) -> float:
    return max(0.0, a0 - p, p - a1)


def relation(q: DyadicCube, q2: DyadicCube) -> Relation:
    """Pairwise position of two cubes: equal, inside, contains, touch or separated."""
    if q.grid.max_depth != q2.grid.max_depth:
        raise ValueError("cubes must live on lattices of equal resolution")
    a, b = q.leaf_span(), q2.leaf_span()
    if a == b:
        return Relation.EQUAL
    if all(oa <= sa and sb <= ob for (sa, sb), (oa, ob) in zip(a, b)):
        return Relation.INSIDE
    if all(sa <= oa and ob <= sb for (sa, sb), (oa, ob) in zip(a, b)):
        return Relation.CONTAINS
    # open interiors intersect iff max(lo) < min(hi) on every axis
    if all(max(sa, oa) < min(sb, ob) for (sa, sb), (oa, ob) in zip(a, b)):
        raise ValueError("cubes overlap partially; not dyadically comparable")
    if all(max(sa, oa) <= min(sb, ob) for (sa, sb), (oa, ob) in zip(a, b)):
        return Relation.TOUCH
    return Relation.SEPARATED


def cube_distance(q: DyadicCube, q2: DyadicCube) -> float:
    """Sup-metric distance between the closures of two cubes."""
    return max(
        _interval_gap(a0, a1, b0, b1)
        for (a0, a1), (b0, b1) in zip(
            zip(q.lower(), q.upper()), zip(q2.lower(), q2.upper())
        )
    )


def child_boundary_distance(j: DyadicCube, i: DyadicCube) -> float:
    """dist(J, e(I)) where e(I) is the union of the boundaries of I's children.

    e(I) consists of the points of closure(I) having some coordinate on a
    child face; the sup-metric distance from the box J minimizes over the
    face axis while matching the remaining coordinates inside closure(I).
    """
    jlo, jhi = j.lower(), j.upper()
    ilo, ihi = i.lower(), i.upper()
    n = j.n
    best = float("inf")
    for ax in range(n):
        faces = (ilo[ax], 0.5 * (ilo[ax] + ihi[ax]), ihi[ax])
        d_ax = min(_point_gap(jlo[ax], jhi[ax], f) for f in faces)
        other = 0.0
        for ax2 in range(n):
            if ax2 != ax:
                other = max(other, _interval_gap(jlo[ax2], jhi[ax2], ilo[ax2], ihi[ax2]))
        best = min(best, max(d_ax, other))
    return best


def is_deeply_embedded(j: DyadicCube, i: DyadicCube, params: GoodnessParams) -> bool:
    """J is (r,eps)-deeply embedded in I: small enough and far from child faces."""
    if not i.contains(j):
        return False
    if j.side > 2.0**-params.r * i.side:
        return False
    threshold = 2.0 * j.side**params.eps * i.side ** (1.0 - params.eps)
    return child_boundary_distance(j, i) >= threshold


def _axis_lattice_gap(a0: float, a1: float, offset: float, step: float, kmax: int) -> float:
    """Distance from [a0,a1] to the lattice {offset + k*step : 0 <= k <= kmax}."""
    if kmax < 0:
        return float("inf")
    lo_k = (a0 - offset) / step
    hi_k = (a1 - offset) / step
    import math

    k_in_lo = math.ceil(lo_k - 1e-12)
    k_in_hi = math.floor(hi_k + 1e-12)
    k_in_lo = max(k_in_lo, 0)
    k_in_hi = min(k_in_hi, kmax)
    if k_in_lo <= k_in_hi:
        return 0.0
    cands = []
    for k in (math.floor(lo_k), math.ceil(hi_k)):
        k = min(max(k, 0), kmax)
        cands.append(_point_gap(a0, a1, offset + k * step))
    return min(cands)


def is_good(
    j: DyadicCube, grid: DyadicGrid, params: GoodnessParams, depth_cap: int = 0
) -> bool:
    """Whether J is (r,eps)-good relative to `grid`.

    J is bad when some cube I of `grid` with side >= 2^r side(J) and depth at
    least depth_cap comes within (1/2) side(J)^eps side(I)^(1-eps) of J in the
    sense of dist(e(I), J). The union of e(I) over the cubes of one depth is
    the child-face lattice of that depth, so the check reduces to per-axis
    lattice distances.
    """
    jlo, jhi = j.lower(), j.upper()
    n = grid.dimension
    h = grid.leaf_side
    top_depth = j.depth - params.r
    for d in range(depth_cap, top_depth + 1):
        step = 2.0 ** -(d + 1)
        side_i = 2.0**-d
        threshold = 0.5 * j.side**params.eps * side_i ** (1.0 - params.eps)
        # coverage of the grid at this depth: [shift*h, shift*h + 1] per axis
        cov = [(grid.shift[ax] * h, grid.shift[ax] * h + 1.0) for ax in range(n)]
        best = float("inf")
        for ax in range(n):
            gap_ax = _axis_lattice_gap(
                jlo[ax], jhi[ax], grid.shift[ax] * h, step, 1 << (d + 1)
            )
            other = 0.0
            for ax2 in range(n):
                if ax2 != ax:
                    other = max(other, _interval_gap(jlo[ax2], jhi[ax2], *cov[ax2]))
            best = min(best, max(gap_ax, other))
        if best <= threshold:
            return False
    return True
