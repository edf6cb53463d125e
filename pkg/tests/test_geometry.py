import math

import numpy as np
import pytest

from czkit.geometry import (
    Box,
    Cube,
    DyadicCube,
    cube_rescale,
    dist_euclid,
    dist_max,
    dist_point_to_cube,
)


def test_cube_rescale_definition():
    q = cube_rescale(Cube((0.0, 0.0), 1.0), 2.0)
    assert q.center == (0.0, 0.0) and q.side == 2.0


def test_cube_rescale_identity():
    q = Cube((1.0, 1.0), 0.5)
    assert cube_rescale(q, 1.0) == q


def test_cube_rescale_fractional():
    q = cube_rescale(Cube((3.0, -1.0), 2.0), 1.5)
    assert q.center == (3.0, -1.0) and q.side == 3.0


def test_cube_rescale_invalid():
    with pytest.raises(ValueError):
        cube_rescale(Cube((0.0,), 1.0), 0.0)
    with pytest.raises(ValueError):
        Cube((0.0,), 1.0).rescale(-2.0)


def test_dist_max_examples():
    assert dist_max((0, 0), (3, 4)) == 4.0
    assert dist_max((1, 2, 3), (1, 2, 3)) == 0.0
    assert dist_max((1, -2, 0), (0, 0, 0)) == 2.0


def test_dist_max_dimension_mismatch():
    with pytest.raises(ValueError):
        dist_max((0, 0), (1, 2, 3))


def test_norm_equivalence_random():
    rng = np.random.default_rng(123)
    for _ in range(200):
        dim = rng.integers(1, 4)
        x = rng.normal(size=dim)
        y = rng.normal(size=dim)
        dinf = dist_max(x, y)
        d2 = dist_euclid(x, y)
        assert dinf <= d2 + 1e-15
        assert d2 <= math.sqrt(dim) * dinf + 1e-12


def test_dist_point_to_cube_examples():
    q = Cube((0.0, 0.0), 2.0)
    assert dist_point_to_cube((2.0, 0.0), q) == pytest.approx(1.0)
    assert dist_point_to_cube((0.0, 0.0), q) == 0.0
    assert dist_point_to_cube((2.0, 2.0), q) == pytest.approx(math.sqrt(2.0))


def test_dist_point_to_cube_zero_iff_in_closure():
    rng = np.random.default_rng(5)
    q = Cube((0.25, -0.5), 1.0)
    for _ in range(300):
        x = rng.uniform(-2, 2, size=2)
        d = dist_point_to_cube(x, q)
        in_closure = bool(np.all(x >= q.lo - 1e-15) and np.all(x <= q.hi + 1e-15))
        assert (d == 0.0) == in_closure or (d < 1e-12 and in_closure)


def test_halfclosed_membership():
    q = DyadicCube(1, (0, 0), 1.0)  # [0, 0.5)^2
    assert q.contains((0.0, 0.0))          # lower-left corner in
    assert not q.contains((0.5, 0.5))      # upper-right corner out
    assert q.contains(tuple(q.center))
    c = Cube((0.5, 0.5), 1.0)
    assert c.contains((0.0, 0.0))
    assert not c.contains((1.0, 1.0))


def test_samelevel_dyadic_disjoint_exhaustive():
    # every point of a small lattice lies in at most one same-level cube
    cubes = [DyadicCube(2, (i, j), 1.0) for i in range(-2, 2) for j in range(-2, 2)]
    pts = [(x / 16.0, y / 16.0) for x in range(-8, 8) for y in range(-8, 8)]
    for p in pts:
        owners = [q for q in cubes if q.contains(p)]
        assert len(owners) == 1


def test_parent_is_disjoint_union_of_children():
    q = DyadicCube(0, (0, 0, 0), 1.0)
    kids = q.children()
    assert len(kids) == 8
    rng = np.random.default_rng(9)
    for _ in range(200):
        p = rng.uniform(0, 1, size=3) * (1 - 1e-12)
        owners = [c for c in kids if c.contains(p)]
        assert len(owners) == 1 and q.contains(p)


def test_box_validation():
    with pytest.raises(ValueError):
        Box((0.0, 0.0), (1.0, 0.0))
    b = Box((-1.0, -1.0), (1.0, 1.0))
    assert b.volume == 4.0
    assert b.contains((-1.0, -1.0)) and not b.contains((1.0, 1.0))
