"""Finite signed Borel measures as weighted atoms plus a cell-constant density.

The representation is closed under every operation used downstream
(restriction, cube averaging, CZ subtraction): a measure is a finite list of
point atoms together with an optional GridField whose cells carry constant
density values. Restriction assigns whole cells by cell-center membership,
so restrict(mu, S) + restrict(mu, S^c) reproduces mu exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, Cube, DyadicCube, as_point


@dataclass
class GridField:
    """Cell-centered samples on a uniform box grid.

    values is flat, C-ordered over the cell index (i_0, ..., i_{N-1}); vector
    fields append the component axis last (length prod(cells) * ncomp).
    """

    box: Box
    cells: tuple
    values: np.ndarray
    ncomp: int = 1

    def __post_init__(self):
        self.cells = tuple(int(c) for c in self.cells)
        if len(self.cells) != self.box.dim:
            raise ValueError("cells_per_axis length must match box dimension")
        if any(c <= 0 for c in self.cells):
            raise ValueError("cells_per_axis must be positive")
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        expected = int(np.prod(self.cells)) * self.ncomp
        if self.values.size != expected:
            raise ValueError(f"values length {self.values.size} != cells*ncomp {expected}")

    # -- layout -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> np.ndarray:
        return self.box.extent / np.asarray(self.cells, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.cells))

    def shaped(self) -> np.ndarray:
        """View of values with one axis per grid dimension (+ component axis)."""
        if self.ncomp == 1:
            return self.values.reshape(self.cells)
        return self.values.reshape(self.cells + (self.ncomp,))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.box.lo[axis] + (np.arange(self.cells[axis]) + 0.5) * h

    def centers(self) -> np.ndarray:
        """(num_cells, N) array of cell centers in C order."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def cell_index_of(self, x) -> tuple:
        """Multi-index of the cell containing x (half-closed cells)."""
        p = as_point(x, dim=self.dim)
        rel = (p - np.asarray(self.box.lo)) / self.spacing
        idx = np.floor(rel).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.cells)):
            raise ValueError(f"point {tuple(p)} outside grid box")
        return tuple(idx)

    def same_layout(self, other: "GridField") -> bool:
        return (
            self.cells == other.cells
            and np.allclose(self.box.lo, other.box.lo)
            and np.allclose(self.box.hi, other.box.hi)
        )

    def copy(self) -> "GridField":
        return GridField(self.box, self.cells, self.values.copy(), self.ncomp)

    @classmethod
    def zeros(cls, box: Box, cells, ncomp: int = 1) -> "GridField":
        cells = tuple(int(c) for c in cells)
        return cls(box, cells, np.zeros(int(np.prod(cells)) * ncomp), ncomp)

    @classmethod
    def from_function(cls, box: Box, cells, fn) -> "GridField":
        g = cls.zeros(box, cells)
        pts = g.centers()
        g.values = np.asarray(fn(pts), dtype=float).reshape(-1)
        return g

    def to_json(self) -> dict:
        out = {"box": self.box.to_json(), "cells": list(self.cells), "values": self.values.tolist()}
        if self.ncomp != 1:
            out["ncomp"] = self.ncomp
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GridField":
        return cls(
            Box.from_json(data["box"]),
            tuple(data["cells"]),
            np.asarray(data["values"], dtype=float),
            int(data.get("ncomp", 1)),
        )


def region_bounds(region):
    """Closed-below/open-above bounds (lo, hi) of a Cube, DyadicCube or Box."""
    if isinstance(region, (Cube, DyadicCube)):
        return np.asarray(region.lo), np.asarray(region.hi)
    if isinstance(region, Box):
        return np.asarray(region.lo), np.asarray(region.hi)
    raise TypeError(f"unsupported region type {type(region)!r}")


def _halfclosed_membership(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.all(pts >= lo, axis=1) & np.all(pts < hi, axis=1)


@dataclass
class SignedMeasure:
    """Finite signed Borel measure: atoms + optional cell-constant density."""

    dim: int
    atom_locations: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    atom_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: GridField | None = None

    def __post_init__(self):
        self.atom_locations = np.asarray(self.atom_locations, dtype=float).reshape(-1, self.dim)
        self.atom_weights = np.asarray(self.atom_weights, dtype=float).reshape(-1)
        if self.atom_locations.shape[0] != self.atom_weights.size:
            raise ValueError("atom locations and weights disagree in length")
        if not np.all(np.isfinite(self.atom_locations)) or not np.all(np.isfinite(self.atom_weights)):
            raise ValueError("atoms must be finite")
        if self.density is not None and self.density.dim != self.dim:
            raise ValueError("density dimension mismatch")
        if self.density is not None and self.density.ncomp != 1:
            raise ValueError("measure density must be scalar")
        self._merge_atoms()

    def _merge_atoms(self):
        # merge duplicate locations, drop zero weights
        if self.atom_weights.size == 0:
            return
        seen: dict = {}
        for loc, w in zip(self.atom_locations, self.atom_weights):
            key = tuple(loc)
            seen[key] = seen.get(key, 0.0) + float(w)
        locs = [k for k, w in seen.items() if w != 0.0]
        ws = [w for w in seen.values() if w != 0.0]
        self.atom_locations = np.asarray(locs, dtype=float).reshape(-1, self.dim)
        self.atom_weights = np.asarray(ws, dtype=float)

    @property
    def num_atoms(self) -> int:
        return self.atom_weights.size

    def is_zero(self) -> bool:
        return self.num_atoms == 0 and (
            self.density is None or not np.any(self.density.values)
        )

    # -- construction helpers ----------------------------------------------
    @classmethod
    def from_atoms(cls, locations, weights) -> "SignedMeasure":
        locations = np.atleast_2d(np.asarray(locations, dtype=float))
        return cls(locations.shape[1], locations, np.asarray(weights, dtype=float))

    @classmethod
    def dirac(cls, location, weight: float = 1.0) -> "SignedMeasure":
        loc = as_point(location)
        return cls.from_atoms(loc.reshape(1, -1), [weight])

    @classmethod
    def from_density(cls, density: GridField) -> "SignedMeasure":
        return cls(density.dim, np.zeros((0, density.dim)), np.zeros(0), density)

    # -- measure algebra -----------------------------------------------------
    def total_variation(self) -> float:
        """||mu|| = sum |atom weights| + sum |cell value| * cell volume."""
        tv = float(np.sum(np.abs(self.atom_weights)))
        if self.density is not None:
            tv += float(np.sum(np.abs(self.density.values)) * self.density.cell_volume)
        return tv

    def mass(self, region=None) -> float:
        """Signed mass mu(region); the whole space when region is None."""
        if region is None:
            m = float(np.sum(self.atom_weights))
            if self.density is not None:
                m += float(np.sum(self.density.values) * self.density.cell_volume)
            return m
        lo, hi = region_bounds(region)
        m = 0.0
        if self.num_atoms:
            inside = _halfclosed_membership(self.atom_locations, lo, hi)
            m += float(np.sum(self.atom_weights[inside]))
        if self.density is not None:
            inside = _halfclosed_membership(self.density.centers(), lo, hi)
            m += float(np.sum(self.density.values[inside]) * self.density.cell_volume)
        return m

    def abs_mass(self, region=None) -> float:
        """|mu|(region)."""
        if region is None:
            return self.total_variation()
        lo, hi = region_bounds(region)
        m = 0.0
        if self.num_atoms:
            inside = _halfclosed_membership(self.atom_locations, lo, hi)
            m += float(np.sum(np.abs(self.atom_weights[inside])))
        if self.density is not None:
            inside = _halfclosed_membership(self.density.centers(), lo, hi)
            m += float(np.sum(np.abs(self.density.values[inside])) * self.density.cell_volume)
        return m

    def restrict(self, region, complement: bool = False) -> "SignedMeasure":
        """mu restricted to a cube/box: atoms by half-closed membership, cells by center."""
        lo, hi = region_bounds(region)
        if self.num_atoms:
            inside = _halfclosed_membership(self.atom_locations, lo, hi)
            if complement:
                inside = ~inside
            locs, ws = self.atom_locations[inside], self.atom_weights[inside]
        else:
            locs, ws = np.zeros((0, self.dim)), np.zeros(0)
        dens = None
        if self.density is not None:
            inside = _halfclosed_membership(self.density.centers(), lo, hi)
            if complement:
                inside = ~inside
            vals = np.where(inside, self.density.values, 0.0)
            dens = GridField(self.density.box, self.density.cells, vals)
        return SignedMeasure(self.dim, locs, ws, dens)

    def ac_singular_split(self) -> tuple["SignedMeasure", "SignedMeasure"]:
        """(mu_a, mu_s): density part and atomic part; their sum reproduces mu."""
        ac = SignedMeasure(self.dim, np.zeros((0, self.dim)), np.zeros(0),
                           self.density.copy() if self.density is not None else None)
        sing = SignedMeasure(self.dim, self.atom_locations.copy(), self.atom_weights.copy(), None)
        return ac, sing

    def signed_average_on(self, region) -> float:
        """mu(Q)/|Q| for a cube or box of positive volume."""
        if isinstance(region, (Cube, DyadicCube)):
            vol = region.volume
        elif isinstance(region, Box):
            vol = region.volume
        else:
            raise TypeError(f"unsupported region type {type(region)!r}")
        if vol <= 0 or not math.isfinite(vol):
            raise ValueError("region must have positive finite volume")
        return self.mass(region) / vol

    def __add__(self, other: "SignedMeasure") -> "SignedMeasure":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        locs = np.vstack([self.atom_locations, other.atom_locations])
        ws = np.concatenate([self.atom_weights, other.atom_weights])
        if self.density is None:
            dens = other.density.copy() if other.density is not None else None
        elif other.density is None:
            dens = self.density.copy()
        else:
            if not self.density.same_layout(other.density):
                raise ValueError("cannot add measures with different density grids")
            dens = GridField(self.density.box, self.density.cells,
                             self.density.values + other.density.values)
        return SignedMeasure(self.dim, locs, ws, dens)

    def scaled(self, c: float) -> "SignedMeasure":
        dens = None
        if self.density is not None:
            dens = GridField(self.density.box, self.density.cells, self.density.values * c)
        return SignedMeasure(self.dim, self.atom_locations.copy(), self.atom_weights * c, dens)

    # -- io -------------------------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {"dim": self.dim}
        if self.num_atoms:
            out["atoms"] = [
                {"x": list(map(float, loc)), "w": float(w)}
                for loc, w in zip(self.atom_locations, self.atom_weights)
            ]
        if self.density is not None:
            out["density"] = self.density.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SignedMeasure":
        dim = int(data["dim"])
        atoms = data.get("atoms", [])
        locs = np.asarray([a["x"] for a in atoms], dtype=float).reshape(-1, dim)
        ws = np.asarray([a["w"] for a in atoms], dtype=float)
        dens = GridField.from_json(data["density"]) if "density" in data else None
        return cls(dim, locs, ws, dens)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "SignedMeasure":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def total_variation(mu: SignedMeasure) -> float:
    return mu.total_variation()


def restrict(mu: SignedMeasure, region) -> SignedMeasure:
    return mu.restrict(region)


def ac_singular_split(mu: SignedMeasure):
    return mu.ac_singular_split()


def signed_average_on(mu: SignedMeasure, region) -> float:
    return mu.signed_average_on(region)
