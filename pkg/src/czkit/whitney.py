"""Whitney covering of the complement of a closed set by half-closed dyadic cubes.

The closed set F is a grid mask: the finite set of centers of marked cells.
Selection runs a level-synchronous dyadic descent from the root tiling of the
box: a cube containing no F-center is selected as soon as its Euclidean
diameter is below its distance to F (the textbook maximal-cube rule), and
cells of the mask grid that remain uncovered when the descent bottoms out are
forced in as leaves. With d(Q, F) the exact cube-to-center-set distance and
"diam" the max-norm diameter (= side), every output cube satisfies

    1/2 * side <= d(Q, F) <= 4 * sqrt(N) * side,

the lower bound being attained by forced boundary leaves (the nearest foreign
center sits side/2 away from an adjacent cell) and the upper bound following
from the parent-not-selected argument. Predicate-selected cubes additionally
satisfy 2Q inside the complement of F; forced leaves may not, and are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .geometry import DyadicCube, dist_points_to_cube
from .measures import GridField, SignedMeasure

C1_DECLARED = 0.5


def c2_declared(dim: int) -> float:
    return 4.0 * math.sqrt(dim)


class UnboundedCoverError(ValueError):
    """F is empty in the working box; the cover would need infinitely many cubes."""


class ResolutionExceededError(RuntimeError):
    """Descent depth exhausted with cells still uncovered."""

    def __init__(self, message, uncovered_cells):
        super().__init__(message)
        self.uncovered_cells = uncovered_cells


@dataclass
class WhitneyCover:
    """Disjoint dyadic cubes filling the cell-exact complement of F."""

    cubes: list
    f_mask: GridField
    distances: np.ndarray
    forced: np.ndarray
    base_scale: float
    finest_level: int
    alpha_achieved: float

    @property
    def dim(self) -> int:
        return self.f_mask.dim

    @property
    def sides(self) -> np.ndarray:
        return np.asarray([q.side for q in self.cubes])

    @property
    def ratios(self) -> np.ndarray:
        """d(Q, F) / side per cube."""
        return self.distances / self.sides

    @property
    def constants(self) -> tuple:
        """(c1, c2) actually achieved."""
        if not self.cubes:
            return (math.inf, 0.0)
        r = self.ratios
        return (float(np.min(r)), float(np.max(r)))

    def to_json(self) -> list:
        return [{"level": q.level, "corner_index": list(q.corner_index)} for q in self.cubes]


def _dyadic_layout(box, cells):
    """Root indexing for a mask grid: (base_scale, roots_per_axis, cells_per_root)."""
    n = cells[0]
    if any(c != n for c in cells):
        raise ValueError("whitney mask grid must have equal cell counts per axis")
    ext = box.extent
    if not np.allclose(ext, ext[0], rtol=1e-12, atol=0.0):
        raise ValueError("whitney working box must be a hypercube")
    side = float(ext[0])
    for roots in (1, 2, 4):
        if n % roots:
            continue
        per_root = n // roots
        if per_root & (per_root - 1):
            continue
        base = side / roots
        anchors = np.asarray(box.lo) / base
        if np.max(np.abs(anchors - np.round(anchors))) < 1e-9:
            return base, roots, per_root
    raise ValueError(
        "box is not dyadic-compatible: need lo divisible by side/m and cells/m a "
        "power of two for m in {1, 2, 4}"
    )


def _prefix_counts(mask_shaped: np.ndarray) -> np.ndarray:
    # integral image padded with a zero layer in front of every axis
    p = mask_shaped.astype(np.int64)
    for ax in range(mask_shaped.ndim):
        p = np.cumsum(p, axis=ax)
    return np.pad(p, [(1, 0)] * mask_shaped.ndim)


def _box_counts(prefix: np.ndarray, corners: np.ndarray, width: int) -> np.ndarray:
    """Marked-cell counts in the cubes [corner, corner + width) via the integral image."""
    dim = corners.shape[1]
    total = np.zeros(corners.shape[0], dtype=np.int64)
    for signs in np.ndindex(*(2,) * dim):
        sel = corners + np.asarray(signs) * width
        term = prefix[tuple(sel[:, d] for d in range(dim))]
        parity = (dim - sum(signs)) % 2
        total += -term if parity else term
    return total


def _exact_cube_distances(tree, f_points, centers, side):
    """Exact Euclidean distance from cubes (given by centers/side) to the F-point set."""
    dim = centers.shape[1]
    half_diam = math.sqrt(dim) * side / 2.0
    center_dist, _ = tree.query(centers)
    out = np.empty(centers.shape[0])
    radius = center_dist + half_diam * (1.0 + 1e-12) + 1e-300
    candidates = tree.query_ball_point(centers, radius)
    lo_off = side / 2.0
    for i, cand in enumerate(candidates):
        pts = f_points[cand]
        out[i] = float(np.min(dist_points_to_cube(pts, centers[i] - lo_off, centers[i] + lo_off)))
    return out


def whitney_cover(f_mask: GridField, max_depth: int | None = None) -> WhitneyCover:
    """Whitney cover of the cell-exact complement of the mask within its box.

    f_mask: nonzero values mark the cells of F. max_depth limits how deep the
    descent may go below the roots; the mask resolution itself is the natural
    bottom. Cubes come out sorted lexicographically by (level, corner_index).
    """
    mask = f_mask.shaped() != 0
    box = f_mask.box
    base_scale, roots, per_root = _dyadic_layout(box, f_mask.cells)
    finest = int(round(math.log2(per_root)))
    if max_depth is None:
        max_depth = finest
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")

    if not mask.any():
        raise UnboundedCoverError("F is empty in the working box")
    if mask.all():
        return WhitneyCover([], f_mask, np.zeros(0), np.zeros(0, dtype=bool),
                            base_scale, finest, 0.0)

    centers_all = f_mask.centers()
    f_points = centers_all[mask.reshape(-1)]
    tree = cKDTree(f_points)
    prefix = _prefix_counts(mask)
    dim = f_mask.dim
    sqrt_dim = math.sqrt(dim)
    lo = np.asarray(box.lo)
    origin_index = np.round(lo / base_scale).astype(np.int64)

    # active cubes per level, tracked as mask-grid cell corners (finest units)
    active = np.stack(
        [idx.reshape(-1) for idx in np.meshgrid(*[np.arange(roots) * per_root] * dim, indexing="ij")],
        axis=1,
    ).astype(np.int64)

    selected: list[tuple] = []
    for level in range(finest + 1):
        if active.size == 0:
            break
        width = per_root >> level
        side = base_scale / (1 << level)
        counts = _box_counts(prefix, active, width)
        full = counts == width ** dim
        empty = counts == 0
        keep = active[empty]
        if keep.size:
            cube_centers = lo + (keep + width / 2.0) * f_mask.spacing[0]
            dists = _exact_cube_distances(tree, f_points, cube_centers, side)
            qualifies = dists >= sqrt_dim * side
            chosen = qualifies if level < finest else np.ones(len(keep), dtype=bool)
            for corner, d, qual in zip(keep[chosen], dists[chosen], qualifies[chosen]):
                selected.append((level, tuple(corner), float(d), not bool(qual)))
            recurse_empty = keep[~chosen]
        else:
            recurse_empty = keep
        recurse_mixed = active[~full & ~empty]
        pending = np.vstack([recurse_empty, recurse_mixed]) if recurse_empty.size or recurse_mixed.size \
            else np.zeros((0, dim), dtype=np.int64)
        if pending.size and level == max_depth and level < finest:
            uncovered = _list_uncovered(pending, per_root >> level, mask)
            raise ResolutionExceededError(
                f"max_depth={max_depth} exhausted with {len(uncovered)} uncovered cells",
                uncovered,
            )
        if level < finest and pending.size:
            half = width // 2
            offsets = np.stack(
                [o.reshape(-1) for o in np.meshgrid(*[np.asarray([0, half])] * dim, indexing="ij")],
                axis=1,
            )
            active = (pending[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
        else:
            active = np.zeros((0, dim), dtype=np.int64)

    selected.sort(key=lambda rec: (rec[0], rec[1]))
    cubes = []
    dists = []
    forced = []
    for level, corner, d, forc in selected:
        width = per_root >> level
        # corner_index in units of the cube's own side, anchored at the origin
        idx = tuple(int(o * (1 << level) + c // width) for o, c in zip(origin_index, corner))
        cubes.append(DyadicCube(level, idx, base_scale))
        dists.append(d)
        forced.append(forc)
    dists = np.asarray(dists)
    forced = np.asarray(forced, dtype=bool)

    alpha = 0.0
    if cubes:
        cube_centers = np.asarray([q.center for q in cubes])
        _, nearest = tree.query(cube_centers)
        gaps = np.max(np.abs(f_points[nearest] - cube_centers), axis=1)
        alpha = float(np.max(gaps / (np.asarray([q.side for q in cubes]) / 2.0)))

    return WhitneyCover(cubes, f_mask, dists, forced, base_scale, finest, alpha)


def _list_uncovered(pending, width, mask):
    cells = []
    for corner in pending:
        sl = tuple(slice(c, c + width) for c in corner)
        sub = ~mask[sl]
        offs = np.argwhere(sub)
        cells.extend([tuple(corner + o) for o in offs])
    return cells


def verify_cover(cover: WhitneyCover) -> dict:
    """Exact disjointness/coverage/ratio report for a cover."""
    mask = cover.f_mask.shaped() != 0
    paint = np.zeros_like(mask, dtype=np.int64)
    per_root = 1 << cover.finest_level
    lo = np.asarray(cover.f_mask.box.lo)
    h = cover.f_mask.spacing[0]
    for q in cover.cubes:
        width = per_root >> q.level
        start = np.round((q.lo - lo) / h).astype(int)
        sl = tuple(slice(s, s + width) for s in start)
        paint[sl] += 1
    disjoint = bool(np.max(paint, initial=0) <= 1)
    covers_complement = bool(np.array_equal(paint > 0, ~mask))
    if cover.cubes:
        r = cover.ratios
        c1_ok = bool(np.min(r) >= C1_DECLARED - 1e-12)
        c2_ok = bool(np.max(r) <= c2_declared(cover.dim) + 1e-12)
    else:
        c1_ok = c2_ok = True
    return {
        "disjoint": disjoint,
        "covers_complement": covers_complement,
        "c1_ok": c1_ok,
        "c2_ok": c2_ok,
        "constants": cover.constants,
        "num_cubes": len(cover.cubes),
        "num_forced": int(np.count_nonzero(cover.forced)),
    }


def mask_distance_field(f_mask: GridField) -> GridField:
    """Exact Euclidean distance from every cell center to the nearest F-center."""
    mask = f_mask.shaped() != 0
    if not mask.any():
        raise UnboundedCoverError("F is empty in the working box")
    d = distance_transform_edt(~mask, sampling=tuple(f_mask.spacing))
    return GridField(f_mask.box, f_mask.cells, d.reshape(-1))


def marcinkiewicz_integral(mu: SignedMeasure, f_mask: GridField, y) -> float:
    """Quadrature of int_{complement of F} d(z, F) / |y - z|^(N+1) d|mu|(z) for y in F."""
    y = np.asarray(y, dtype=float)
    try:
        cell = f_mask.cell_index_of(y)
    except ValueError:
        raise ValueError("y must lie inside the working box") from None
    if f_mask.shaped()[cell] == 0:
        raise ValueError("y must belong to the closed set F")
    dim = f_mask.dim
    power = dim + 1
    total = 0.0
    mask = f_mask.shaped() != 0
    f_points = f_mask.centers()[mask.reshape(-1)]
    tree = cKDTree(f_points)
    if mu.num_atoms:
        d_atoms, _ = tree.query(mu.atom_locations)
        sep = np.linalg.norm(mu.atom_locations - y, axis=1)
        good = d_atoms > 0
        total += float(np.sum(np.abs(mu.atom_weights[good]) * d_atoms[good] / sep[good] ** power))
    if mu.density is not None:
        dist_f = mask_distance_field_on(mu.density, f_mask)
        centers = mu.density.centers()
        sep = np.linalg.norm(centers - y, axis=1)
        good = (dist_f > 0) & (sep > 0)
        total += float(np.sum(
            np.abs(mu.density.values[good]) * mu.density.cell_volume
            * dist_f[good] / sep[good] ** power
        ))
    return total


def mask_distance_field_on(grid: GridField, f_mask: GridField) -> np.ndarray:
    """d(center, F) for the cells of an arbitrary grid against the mask's center set."""
    if grid.same_layout(f_mask):
        return mask_distance_field(f_mask).values
    mask = f_mask.shaped() != 0
    f_points = f_mask.centers()[mask.reshape(-1)]
    tree = cKDTree(f_points)
    d, _ = tree.query(grid.centers())
    return np.asarray(d)
