"""Calderon-Zygmund decomposition of a measure at height t.

mu = g dx + sum_n b_n with F = {M mu <= t} on the grid, a Whitney cover of
the complement, g the density of mu restricted to F plus the cube averages
mu(Q_n)/|Q_n|, and b_n = mu|_{Q_n} - average * chi_{Q_n} dx.

Bad parts are stored symbolically (atoms inside the cube, density cells
inside the cube, subtracted constant and the accumulated signed mass), not
materialized, so that the cancellation b_n(Q_n) = 0 is checkable exactly:
the verifier recomputes the restriction mass with the same summation order
and subtracts the stored mass, which is bitwise the same float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, DyadicCube
from .maximal import MaximalField, maximal_function, unit_ball_volume, weak_maximal_constant
from .measures import GridField, SignedMeasure
from .whitney import WhitneyCover, whitney_cover

REL_SLACK = 1e-12


def good_part_linf_constant(dim: int) -> float:
    """Declared bound on ||g||_inf / t.

    From the eqMeasureCubes argument run on the dyadic radii schedule: the
    nearest F-center z to a Whitney cube Q is within (4 sqrt(N) + sqrt(N)/2)
    * side, a ball around z of radius 5 sqrt(N) * side covers Q, and the
    schedule contains a radius at most twice that, giving
    |mu(Q)|/|Q| <= omega_N (10 sqrt(N))^N t.
    """
    return max(1.0, unit_ball_volume(dim) * (10.0 * math.sqrt(dim)) ** dim)


@dataclass
class CZBadPart:
    """One mean-zero piece b_n = mu|_{Q_n} - (mu(Q_n)/|Q_n|) chi_{Q_n} dx."""

    cube: DyadicCube
    atom_locations: np.ndarray
    atom_weights: np.ndarray
    cell_flat_indices: np.ndarray
    cell_values: np.ndarray
    cell_volume: float
    mass: float
    mean_value: float

    def restriction_mass(self) -> float:
        """mu(Q_n) recomputed in the construction's summation order."""
        m = float(np.sum(self.cell_values) * self.cell_volume) if self.cell_values.size else 0.0
        m += float(np.sum(self.atom_weights)) if self.atom_weights.size else 0.0
        return m

    def measure_of_cube(self) -> float:
        """b_n(Q_n); exactly 0.0 by construction."""
        return self.restriction_mass() - self.mass

    def total_variation(self) -> float:
        tv = float(np.sum(np.abs(self.atom_weights)))
        tv += float(np.sum(np.abs(self.cell_values - self.mean_value)) * self.cell_volume)
        # cells not carrying source density still hold the subtracted constant
        missing = self.cube.volume - self.cell_values.size * self.cell_volume
        if self.cell_values.size == 0:
            tv += abs(self.mean_value) * self.cube.volume
        elif missing > 1e-12 * self.cube.volume:
            tv += abs(self.mean_value) * missing
        return tv

    def materialize(self, grid: GridField) -> SignedMeasure:
        """b_n as a SignedMeasure on the decomposition grid (float drift ~1 ulp)."""
        vals = np.zeros(grid.num_cells)
        inside = _cube_cell_indices(self.cube, grid)
        vals[inside] = -self.mean_value
        if self.cell_flat_indices.size:
            vals[self.cell_flat_indices] += self.cell_values
        dens = GridField(grid.box, grid.cells, vals)
        return SignedMeasure(grid.dim, self.atom_locations, self.atom_weights, dens)


@dataclass
class CZDecomposition:
    t: float
    f_mask: GridField
    cover: WhitneyCover
    g: GridField
    bad_parts: list
    source: SignedMeasure
    maximal: MaximalField
    source_mass: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.g.dim

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "source_mass": self.source_mass,
            "whitney": {"base_scale": self.cover.base_scale, "cubes": self.cover.to_json()},
            "g": self.g.to_json(),
            "bad_parts": [
                {
                    "cube": {"level": b.cube.level, "corner_index": list(b.cube.corner_index)},
                    "mass": b.mass,
                    "mean_value": b.mean_value,
                    "atoms": [
                        {"x": list(map(float, x)), "w": float(w)}
                        for x, w in zip(b.atom_locations, b.atom_weights)
                    ],
                }
                for b in self.bad_parts
            ],
        }


def _cube_cell_indices(cube: DyadicCube, grid: GridField) -> np.ndarray:
    """Flat indices of the grid cells tiling a dyadic cube of the same lattice."""
    h = grid.spacing
    start = np.round((cube.lo - np.asarray(grid.box.lo)) / h).astype(int)
    width = int(round(cube.side / h[0]))
    axes = [np.arange(start[a], start[a] + width) for a in range(grid.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.ravel_multi_index(tuple(m.reshape(-1) for m in mesh), grid.cells)


def cz_decompose(
    mu: SignedMeasure,
    t: float,
    box: Box,
    resolution,
    radii=None,
    maximal_field: MaximalField | None = None,
) -> CZDecomposition:
    """Decompose mu at height t on a grid over box.

    maximal_field lets callers sweeping several heights reuse one M mu
    evaluation; it must have been computed for mu on the same grid.
    """
    if not (t > 0 and math.isfinite(t)):
        raise ValueError("height t must be positive and finite")
    if isinstance(resolution, int):
        resolution = (resolution,) * box.dim
    grid = GridField.zeros(box, resolution)
    if mu.density is not None and not mu.density.same_layout(grid):
        raise ValueError(
            "measure density must live on the decomposition grid "
            f"(density {mu.density.cells} on {mu.density.box}, requested {tuple(resolution)} on {box})"
        )
    for loc in mu.atom_locations:
        if not box.contains(loc):
            raise ValueError(f"atom at {tuple(loc)} outside the working box")

    if maximal_field is not None:
        if not maximal_field.field.same_layout(grid):
            raise ValueError("supplied maximal field does not match the decomposition grid")
        mf = maximal_field
    else:
        mf = maximal_function(mu, grid, radii)
    mask_vals = (mf.values <= t).astype(float)
    f_mask = GridField(box, grid.cells, mask_vals)

    shaped_mask = f_mask.shaped() != 0
    for loc in mu.atom_locations:
        cell = grid.cell_index_of(loc)
        if shaped_mask[cell]:
            raise RuntimeError(
                "internal error: an atom fell inside F={Mmu<=t}; the maximal "
                "function must exceed any finite height at atoms"
            )

    source_mass = mu.total_variation()
    if bool(np.all(shaped_mask)):
        # M mu <= t everywhere: everything is good part
        g_vals = mu.density.values.copy() if mu.density is not None else np.zeros(grid.num_cells)
        g = GridField(box, grid.cells, g_vals)
        cover = WhitneyCover([], f_mask, np.zeros(0), np.zeros(0, dtype=bool),
                             f_mask.box.extent[0], 0, 0.0)
        return CZDecomposition(t, f_mask, cover, g, [], mu, mf, source_mass)

    cover = whitney_cover(f_mask)

    g_vals = np.zeros(grid.num_cells)
    if mu.density is not None:
        on_f = f_mask.values != 0
        g_vals[on_f] = mu.density.values[on_f]

    cellvol = grid.cell_volume
    bad_parts = []
    for cube in cover.cubes:
        lo, hi = cube.lo, cube.hi
        if mu.num_atoms:
            inside = np.all(mu.atom_locations >= lo, axis=1) & np.all(mu.atom_locations < hi, axis=1)
            a_locs, a_ws = mu.atom_locations[inside], mu.atom_weights[inside]
        else:
            a_locs, a_ws = np.zeros((0, mu.dim)), np.zeros(0)
        idx = _cube_cell_indices(cube, grid)
        if mu.density is not None:
            c_vals = mu.density.values[idx]
        else:
            c_vals = np.zeros(idx.size)
        mass = float(np.sum(c_vals) * cellvol) if c_vals.size else 0.0
        mass += float(np.sum(a_ws)) if a_ws.size else 0.0
        mean = mass / cube.volume
        g_vals[idx] = mean
        bad_parts.append(
            CZBadPart(cube, a_locs, a_ws, idx, c_vals, cellvol, mass, mean)
        )

    g = GridField(box, grid.cells, g_vals)
    return CZDecomposition(t, f_mask, cover, g, bad_parts, mu, mf, source_mass)


@dataclass
class CZVerification:
    cancellation_ok: bool
    max_cancellation_residual: float
    support_ok: bool
    l1_ok: bool
    g_l1: float
    linf_ok: bool
    g_linf_over_t: float
    linf_declared: float
    reconstruction_ok: bool
    reconstruction_residual: float
    bad_tv_ok: bool
    max_bad_tv_ratio: float
    mass_accounting_ok: bool
    weak_level_ratio: float
    weak_level_declared: float

    @property
    def passed(self) -> bool:
        return (
            self.cancellation_ok
            and self.support_ok
            and self.l1_ok
            and self.linf_ok
            and self.reconstruction_ok
            and self.bad_tv_ok
            and self.mass_accounting_ok
        )

    def to_json(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def verify_cz(d: CZDecomposition) -> CZVerification:
    """Check every decomposition invariant; the report carries failures."""
    mu = d.source
    grid = d.g
    cellvol = grid.cell_volume

    # per-piece cancellation, exact
    residuals = [abs(b.measure_of_cube()) for b in d.bad_parts]
    max_resid = max(residuals, default=0.0)
    cancellation_ok = max_resid == 0.0

    # support: atoms and cells of each b_n inside its cube
    support_ok = True
    for b in d.bad_parts:
        lo, hi = b.cube.lo, b.cube.hi
        if b.atom_locations.size and not np.all(
            np.all(b.atom_locations >= lo, axis=1) & np.all(b.atom_locations < hi, axis=1)
        ):
            support_ok = False
        if b.cell_flat_indices.size:
            centers = grid.centers()[b.cell_flat_indices]
            if not np.all(np.all(centers >= lo, axis=1) & np.all(centers < hi, axis=1)):
                support_ok = False

    g_l1 = float(np.sum(np.abs(d.g.values)) * cellvol)
    mu_tv = d.source_mass
    l1_ok = g_l1 <= mu_tv * (1.0 + REL_SLACK) + 1e-300

    g_linf = float(np.max(np.abs(d.g.values), initial=0.0))
    linf_declared = good_part_linf_constant(d.dim)
    ratio_linf = g_linf / d.t
    linf_ok = ratio_linf <= linf_declared * (1.0 + REL_SLACK)

    # reconstruction: bitwise identities of the symbolic representation
    recon_resid = 0.0
    on_f = d.f_mask.values != 0
    if mu.density is not None:
        diff = np.abs(d.g.values[on_f] - mu.density.values[on_f])
    else:
        diff = np.abs(d.g.values[on_f])
    if diff.size:
        recon_resid = max(recon_resid, float(np.max(diff)))
    covered = np.zeros(grid.num_cells, dtype=bool)
    for b in d.bad_parts:
        idx = _cube_cell_indices(b.cube, grid)
        covered[idx] = True
        dg = np.abs(d.g.values[idx] - b.mean_value)
        if dg.size:
            recon_resid = max(recon_resid, float(np.max(dg)))
        if mu.density is not None and b.cell_flat_indices.size:
            dv = np.abs(mu.density.values[b.cell_flat_indices] - b.cell_values)
            recon_resid = max(recon_resid, float(np.max(dv)))
    # atoms: every source atom appears in exactly one bad part
    n_bad_atoms = sum(b.atom_weights.size for b in d.bad_parts)
    atoms_ok = n_bad_atoms == mu.num_atoms
    reconstruction_ok = recon_resid == 0.0 and atoms_ok and bool(np.all(on_f | covered))

    # per-piece ||b_n|| <= 2 |mu|(Q_n)
    max_tv_ratio = 0.0
    sum_bad_tv = 0.0
    for b in d.bad_parts:
        abs_q = float(np.sum(np.abs(b.atom_weights)))
        abs_q += float(np.sum(np.abs(b.cell_values)) * cellvol) if b.cell_values.size else 0.0
        tv = b.total_variation()
        sum_bad_tv += tv
        if abs_q > 0:
            max_tv_ratio = max(max_tv_ratio, tv / (2.0 * abs_q))
        elif tv > 0:
            max_tv_ratio = math.inf
    bad_tv_ok = max_tv_ratio <= 1.0 + REL_SLACK

    mass_ok = g_l1 + sum_bad_tv <= 3.0 * mu_tv * (1.0 + REL_SLACK) + 1e-300

    open_measure = float(np.count_nonzero(~on_f)) * cellvol
    weak_ratio = open_measure * d.t / mu_tv if mu_tv > 0 else 0.0
    weak_declared = weak_maximal_constant(d.dim)

    return CZVerification(
        cancellation_ok=cancellation_ok,
        max_cancellation_residual=max_resid,
        support_ok=support_ok,
        l1_ok=l1_ok,
        g_l1=g_l1,
        linf_ok=linf_ok,
        g_linf_over_t=ratio_linf,
        linf_declared=linf_declared,
        reconstruction_ok=reconstruction_ok,
        reconstruction_residual=recon_resid,
        bad_tv_ok=bad_tv_ok,
        max_bad_tv_ratio=max_tv_ratio,
        mass_accounting_ok=mass_ok,
        weak_level_ratio=weak_ratio,
        weak_level_declared=weak_declared,
    )
