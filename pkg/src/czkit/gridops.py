"""Small finite-difference and norm helpers on grid fields."""

from __future__ import annotations

import numpy as np

from .measures import GridField


def gradient_field(u: GridField) -> GridField:
    """Central-difference gradient; one-sided at the grid edge."""
    if u.ncomp != 1:
        raise ValueError("gradient_field expects a scalar field")
    vals = u.shaped()
    comps = np.stack(np.gradient(vals, *[u.spacing[a] for a in range(u.dim)]), axis=-1)
    return GridField(u.box, u.cells, comps.reshape(-1), ncomp=u.dim)


def gradient_magnitude(u: GridField) -> GridField:
    g = gradient_field(u)
    mag = np.linalg.norm(g.values.reshape(-1, u.dim), axis=1)
    return GridField(u.box, u.cells, mag)


def laplacian_field(u: GridField) -> tuple[GridField, np.ndarray]:
    """(2N+1)-point discrete Laplacian and the interior-cell mask where it is valid."""
    if u.ncomp != 1:
        raise ValueError("laplacian_field expects a scalar field")
    vals = u.shaped()
    out = np.zeros_like(vals)
    interior = np.ones(vals.shape, dtype=bool)
    for ax in range(u.dim):
        h2 = u.spacing[ax] ** 2
        up = np.roll(vals, -1, axis=ax)
        dn = np.roll(vals, 1, axis=ax)
        out += (up - 2.0 * vals + dn) / h2
        sl_lo = [slice(None)] * u.dim
        sl_lo[ax] = 0
        sl_hi = [slice(None)] * u.dim
        sl_hi[ax] = -1
        interior[tuple(sl_lo)] = False
        interior[tuple(sl_hi)] = False
    return GridField(u.box, u.cells, out.reshape(-1)), interior.reshape(-1)


def interior_mask(grid: GridField, inset_cells: int) -> np.ndarray:
    """Flat mask of cells at least inset_cells away from every grid edge."""
    m = np.ones(grid.cells, dtype=bool)
    if inset_cells > 0:
        for ax in range(grid.dim):
            sl = [slice(None)] * grid.dim
            sl[ax] = slice(0, inset_cells)
            m[tuple(sl)] = False
            sl[ax] = slice(grid.cells[ax] - inset_cells, grid.cells[ax])
            m[tuple(sl)] = False
    return m.reshape(-1)


def lp_norm(f: GridField, p: float, mask=None) -> float:
    vals = np.abs(f.values if f.ncomp == 1 else np.linalg.norm(f.values.reshape(-1, f.ncomp), axis=1))
    if mask is not None:
        vals = vals[mask]
    if p == np.inf:
        return float(np.max(vals, initial=0.0))
    return float((np.sum(vals ** p) * f.cell_volume) ** (1.0 / p))
