import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpertlab.grid import (
    GoodnessParams,
    Relation,
    child_boundary_distance,
    cube_distance,
    is_deeply_embedded,
    is_good,
    make_grid,
    relation,
)


def test_make_grid_examples():
    g = make_grid(1, 4, 0)
    assert g.is_standard and g.root.lower() == (0.0,)
    g5 = make_grid(1, 4, 5)
    assert g5.root.lower() == (5 / 16,)
    g2 = make_grid(2, 3, (1, 2))
    assert g2.leaf_side == 1 / 8
    assert g2.cube(3, (0, 0)).side == 1 / 8


def test_make_grid_errors():
    with pytest.raises(ValueError):
        make_grid(3, 4)
    with pytest.raises(ValueError):
        make_grid(1, 0)
    with pytest.raises(ValueError):
        make_grid(1, 4, 16)


def test_relation_examples(grid1):
    g = grid1
    a = g.cube(1, (0,))  # [0, 1/2)
    b = g.cube(1, (1,))  # [1/2, 1)
    assert relation(a, b) is Relation.TOUCH
    c = g.cube(2, (0,))  # [0, 1/4)
    assert relation(c, a) is Relation.INSIDE
    assert relation(a, c) is Relation.CONTAINS
    d = g.cube(3, (0,))  # [0, 1/8)
    e = g.cube(3, (4,))  # [1/2, 5/8)
    assert relation(d, e) is Relation.SEPARATED
    assert relation(a, a) is Relation.EQUAL


@given(
    d1=st.integers(0, 4), d2=st.integers(0, 4),
    k1=st.integers(0, 15), k2=st.integers(0, 15),
)
@settings(max_examples=200, deadline=None)
def test_relation_symmetry(d1, d2, k1, k2):
    g = make_grid(1, 4)
    a = g.cube(d1, (k1 % (1 << d1),))
    b = g.cube(d2, (k2 % (1 << d2),))
    r_ab, r_ba = relation(a, b), relation(b, a)
    flip = {
        Relation.EQUAL: Relation.EQUAL,
        Relation.TOUCH: Relation.TOUCH,
        Relation.SEPARATED: Relation.SEPARATED,
        Relation.INSIDE: Relation.CONTAINS,
        Relation.CONTAINS: Relation.INSIDE,
    }
    assert r_ba is flip[r_ab]


def test_children_partition_parent(grid2):
    q = grid2.cube(1, (1, 0))
    kids = q.children()
    assert len(kids) == 4
    total = sum(k.side ** 2 for k in kids)
    assert total == pytest.approx(q.side ** 2)
    for k in kids:
        assert q.contains(k)
        assert k.ancestor(1) == q
    # disjoint leaf spans
    spans = [k.leaf_span() for k in kids]
    cells = set()
    for sp in spans:
        for x in range(*sp[0]):
            for y in range(*sp[1]):
                assert (x, y) not in cells
                cells.add((x, y))


def test_deeply_embedded_hand_cases():
    g = make_grid(1, 6)
    root = g.root
    # J=[1/4,3/8), I=[0,1), r=3, eps=1/2: dist 1/8 < 2 (1/8)^(1/2)
    j = g.cube(3, (2,))
    assert child_boundary_distance(j, root) == pytest.approx(1 / 8)
    assert not is_deeply_embedded(j, root, GoodnessParams(3, 0.5))
    # J = I is never deeply embedded
    assert not is_deeply_embedded(root, root, GoodnessParams(1, 0.5))
    # J=[7/16,15/32), I=[0,1), r=5, eps=0.1: both inequalities evaluated directly
    j2 = g.cube(5, (14,))
    lhs_size = j2.side <= 2.0 ** -5 * root.side
    dist = child_boundary_distance(j2, root)
    thresh = 2.0 * j2.side ** 0.1 * root.side ** 0.9
    assert lhs_size and dist < thresh
    assert not is_deeply_embedded(j2, root, GoodnessParams(5, 0.1))
    # a genuinely embedded pair: depth gap 5, eps large
    j3 = g.cube(5, (7,))  # [7/32, 8/32), dist to {0, 1/2, 1} = 7/32
    assert is_deeply_embedded(j3, root, GoodnessParams(3, 0.75))


def test_deeply_embedded_monotone_in_r():
    g = make_grid(1, 6)
    root = g.root
    params_loose = GoodnessParams(2, 0.75)
    params_tight = GoodnessParams(4, 0.75)
    embedded_loose = {
        q.coords for q in g.cubes_at_depth(5) if is_deeply_embedded(q, root, params_loose)
    }
    embedded_tight = {
        q.coords for q in g.cubes_at_depth(5) if is_deeply_embedded(q, root, params_tight)
    }
    assert embedded_tight <= embedded_loose


def test_deeply_embedded_implies_inside():
    g = make_grid(1, 6)
    for q in g.cubes_at_depth(5):
        for i in list(g.cubes_at_depth(1)) + [g.root]:
            if is_deeply_embedded(q, i, GoodnessParams(2, 0.9)):
                assert relation(q, i) is Relation.INSIDE


def _is_good_bruteforce(j, ref, params, depth_cap=0):
    """Oracle: enumerate every cube I of the reference grid explicitly."""
    top = j.depth - params.r
    for d in range(depth_cap, top + 1):
        for i in ref.cubes_at_depth(d):
            thresh = 0.5 * j.side ** params.eps * i.side ** (1 - params.eps)
            if child_boundary_distance(j, i) <= thresh:
                return False
    return True


def test_is_good_trivial_cases():
    g = make_grid(1, 6)
    params = GoodnessParams(2, 0.5)
    # J adjacent to a depth-0 child boundary (x=1/2) with r <= depth(J): bad
    j_bad = g.cube(4, (8,))  # [1/2, 9/16)
    assert not is_good(j_bad, g, params)
    # center band cube: maximal distance from child boundaries of ancestors
    j_center = g.cube(4, (4,))  # [1/4, 5/16): dist 1/4 to {0,1/2}, 1/16 to depth-1 lattice...
    assert is_good(j_center, g, GoodnessParams(3, 0.9)) == _is_good_bruteforce(
        j_center, g, GoodnessParams(3, 0.9)
    )


@given(shift=st.integers(0, 63), coords=st.integers(0, 15), r=st.integers(1, 3))
@settings(max_examples=120, deadline=None)
def test_is_good_matches_bruteforce(shift, coords, r):
    g = make_grid(1, 6)
    ref = make_grid(1, 6, shift)
    j = g.cube(4, (coords,))
    params = GoodnessParams(r, 0.5)
    assert is_good(j, ref, params) == _is_good_bruteforce(j, ref, params)


def test_is_good_matches_bruteforce_2d(rng):
    g = make_grid(2, 4)
    params = GoodnessParams(1, 0.4)
    for _ in range(30):
        ref = make_grid(2, 4, tuple(rng.integers(0, 16, size=2)))
        j = g.cube(3, tuple(rng.integers(0, 8, size=2)))
        assert is_good(j, ref, params) == _is_good_bruteforce(j, ref, params)


def test_goodness_shift_covariant():
    # translate grid and cube together: same relative geometry, same verdict
    base = make_grid(1, 6)
    params = GoodnessParams(2, 0.5)
    verdicts = []
    for t in (0, 4, 8, 12):
        g = make_grid(1, 6, t)
        j = g.cube(4, (5,))
        verdicts.append(is_good(j, g, params))
    assert len(set(verdicts)) == 1


def test_cube_distance():
    g = make_grid(1, 4)
    a, b = g.cube(3, (0,)), g.cube(3, (4,))
    assert cube_distance(a, b) == pytest.approx(3 / 8)
    assert cube_distance(a, a) == 0.0
