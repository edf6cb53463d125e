"""Singular kernels with decay constants and the convolution K * mu.

A kernel carries the constants (A, B) of the bounds

    |K(x)| <= A / |x|^(N-1)   and   |D^2 K(x)| <= B / |x|^(N+1),

with |D^2 K| measured in Frobenius norm. Built-ins: the Riesz kernel
1/|x|^(N-1), the fundamental solution E of -Laplace, and the components of
grad E. The log/E kernels cannot satisfy the bounds globally; their constants
are certified on the punctured unit ball (domain_radius = 1), which covers
every use in this package (E enters through convolutions against compactly
supported measures).

Convolution values are sums over atoms plus a cell-midpoint quadrature of the
density; cells whose center falls within 1.5 spacings of the evaluation point
are integrated with a refined 4^N sub-midpoint rule so the (integrable)
singularity contributes its finite share. The domain mask encodes the
numerical surrogate of x not in Dom(K * mu): any atom within eps_cut of x, or
an absolute partial sum beyond the overflow guard, excludes the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .measures import GridField, SignedMeasure

OVERFLOW_GUARD = 1e14


def sphere_area(dim: int) -> float:
    """sigma_N, the area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass
class Kernel:
    name: str
    dim: int
    A: float
    B: float
    eval_fn: Callable
    grad_fn: Callable | None = None
    domain_radius: float | None = None  # radius within which (A, B) are certified
    family: str | None = None  # calibration family; components of grad E share one

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.eval(points)

    def eval(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"kernel is {self.dim}-dimensional, got points of dim {pts.shape[1]}")
        r = np.linalg.norm(pts, axis=1)
        if np.any(r == 0):
            raise ValueError("kernel evaluated at the origin")
        return self.eval_fn(pts, r)

    def grad(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        if np.any(r == 0):
            raise ValueError("kernel gradient evaluated at the origin")
        if self.grad_fn is not None:
            return self.grad_fn(pts, r)
        return _fd_gradient(self, pts, r)

    @property
    def key(self) -> str:
        return f"{self.family or self.name}:{self.dim}"


def _fd_gradient(k: Kernel, pts, r, rel_step=1e-6):
    out = np.zeros_like(pts)
    h = (rel_step * r).reshape(-1, 1)
    for j in range(k.dim):
        e = np.zeros((1, k.dim))
        e[0, j] = 1.0
        out[:, j] = (k.eval(pts + h * e) - k.eval(pts - h * e)) / (2.0 * h[:, 0])
    return out


# -- built-ins ----------------------------------------------------------------

_GRAD_E_HESS = {2: 2.0 * math.sqrt(2.0), 3: math.sqrt(54.0)}


def riesz_kernel(dim: int) -> Kernel:
    """K(x) = 1/|x|^(N-1)."""
    n = dim

    def ev(pts, r):
        return r ** (1 - n)

    def gr(pts, r):
        return (1 - n) * pts * (r ** (-n - 1))[:, None]

    b = (n - 1) * math.sqrt(n * n + n - 1)
    return Kernel("riesz", n, A=1.0, B=b, eval_fn=ev, grad_fn=gr)


def fundamental_kernel(dim: int) -> Kernel:
    """E, the fundamental solution of -Laplace; (A, B) certified on |x| <= 1."""
    n = dim
    if n == 2:
        def ev(pts, r):
            return np.log(1.0 / r) / (2.0 * math.pi)

        def gr(pts, r):
            return -pts / (2.0 * math.pi * (r * r)[:, None])

        a = 1.0 / (2.0 * math.pi * math.e)
        b = math.sqrt(2.0) / (2.0 * math.pi)
    elif n == 3:
        sig = sphere_area(3)

        def ev(pts, r):
            return 1.0 / ((n - 2) * sig * r ** (n - 2))

        def gr(pts, r):
            return -pts * (r ** (-n))[:, None] / sig

        a = 1.0 / sig
        b = math.sqrt(6.0) / sig
    else:
        raise ValueError("fundamental solution implemented for N in {2, 3}")
    return Kernel("e", n, A=a, B=b, eval_fn=ev, grad_fn=gr, domain_radius=1.0)


def grad_e_kernel(dim: int, component: int = 0) -> Kernel:
    """Component i of grad E(x) = -(1/sigma_N) x / |x|^N."""
    if component >= dim:
        raise ValueError("component out of range")
    sig = sphere_area(dim)
    n = dim
    i = component

    def ev(pts, r):
        return -pts[:, i] / (sig * r ** n)

    def gr(pts, r):
        out = -np.zeros_like(pts)
        rn2 = r ** (-n - 2)
        for j in range(n):
            delta = 1.0 if j == i else 0.0
            out[:, j] = (-delta * r * r + n * pts[:, i] * pts[:, j]) * rn2 / sig
        return out

    return Kernel(f"grad_e{i}", n, A=1.0 / sig, B=_GRAD_E_HESS[n] / sig, eval_fn=ev,
                  grad_fn=gr, family="grad_e")


_BUILTINS = {"riesz": riesz_kernel, "e": fundamental_kernel, "grad_e": grad_e_kernel}


def get_kernel(name: str, dim: int) -> Kernel:
    """Kernel by CLI name: riesz | e | grad_e (alias gradE, optional :component)."""
    base = name.strip().lower().replace("grade", "grad_e")
    comp = 0
    if ":" in base:
        base, comp_s = base.split(":", 1)
        comp = int(comp_s)
    if base not in _BUILTINS:
        raise ValueError(f"unknown kernel {name!r}; available: riesz, e, grad_e")
    if base == "grad_e":
        return grad_e_kernel(dim, comp)
    return _BUILTINS[base](dim)


# -- eqKernel bounds check -----------------------------------------------------

def default_bound_samples(dim: int, seed: int = 7, num: int = 256) -> np.ndarray:
    """Seeded sample points in the punctured unit ball (annulus 0.05..1)."""
    rng = np.random.default_rng(seed)
    radii = np.geomspace(0.05, 1.0, num)
    dirs = rng.normal(size=(num, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return radii[:, None] * dirs


def fd_hessian_frobenius(k: Kernel, pts: np.ndarray, rel_step: float = 1e-3) -> np.ndarray:
    """Frobenius norm of the finite-difference Hessian, relative stepping.

    Diagonal entries use the 5-point fourth-order stencil, mixed entries the
    4-point cross, both at step rel_step * |x|.
    """
    pts = np.atleast_2d(pts)
    r = np.linalg.norm(pts, axis=1)
    steps = rel_step * r
    n = k.dim
    out = np.zeros((pts.shape[0], n, n))
    f0 = k.eval(pts)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = 1.0
        h = steps[:, None] * e_i
        out[:, i, i] = (
            -k.eval(pts + 2 * h) + 16 * k.eval(pts + h) - 30 * f0
            + 16 * k.eval(pts - h) - k.eval(pts - 2 * h)
        ) / (12.0 * steps ** 2)
        for j in range(i + 1, n):
            e_j = np.zeros(n)
            e_j[j] = 1.0
            g = steps[:, None] * e_j
            mixed = (
                k.eval(pts + h + g) - k.eval(pts + h - g)
                - k.eval(pts - h + g) + k.eval(pts - h - g)
            ) / (4.0 * steps ** 2)
            out[:, i, j] = mixed
            out[:, j, i] = mixed
    return np.linalg.norm(out, axis=(1, 2))


def kernel_bounds_check(k: Kernel, samples=None, slack: float = 0.01):
    """(A_fit, B_fit, pass): empirical eqKernel constants over a point sample."""
    if samples is None:
        samples = default_bound_samples(k.dim)
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r == 0):
        raise ValueError("bound samples must exclude the origin")
    a_fit = float(np.max(np.abs(k.eval(pts)) * r ** (k.dim - 1)))
    b_fit = float(np.max(fd_hessian_frobenius(k, pts) * r ** (k.dim + 1)))
    ok = a_fit <= k.A * (1.0 + slack) and b_fit <= k.B * (1.0 + slack)
    return a_fit, b_fit, bool(ok)


# -- convolution ----------------------------------------------------------------

def _cell_weight_lattice(k: Kernel, grid: GridField, absolute: bool = False) -> np.ndarray:
    """Per-offset quadrature weights: integral of K over a cell at each lattice offset.

    Far cells use the midpoint value times the cell volume; offsets within 1.5
    spacings (including zero) are refined with a 4^N sub-midpoint rule.
    """
    cells = grid.cells
    h = grid.spacing
    axes = [np.arange(-(n - 1), n) * hh for n, hh in zip(cells, h)]
    mesh = np.meshgrid(*axes, indexing="ij")
    offsets = np.stack([m.reshape(-1) for m in mesh], axis=1)
    r = np.linalg.norm(offsets, axis=1)
    vol = grid.cell_volume
    vals = np.zeros(offsets.shape[0])
    far = r > 1.5 * float(np.max(h))
    kv = k.eval(offsets[far])
    vals[far] = (np.abs(kv) if absolute else kv) * vol

    near_idx = np.nonzero(~far)[0]
    sub_axes = [(np.arange(4) + 0.5) * hh / 4.0 - hh / 2.0 for hh in h]
    sub_mesh = np.meshgrid(*sub_axes, indexing="ij")
    subs = np.stack([m.reshape(-1) for m in sub_mesh], axis=1)
    sub_vol = vol / 4 ** grid.dim
    for idx in near_idx:
        pts = offsets[idx] - subs
        kv = k.eval(pts)
        vals[idx] = float(np.sum(np.abs(kv) if absolute else kv)) * sub_vol
    return vals.reshape([2 * n - 1 for n in cells])


def convolve_grid(k: Kernel, mu: SignedMeasure, grid: GridField, eps_cut: float | None = None):
    """(values, domain_mask) of K * mu at the cell centers of a grid."""
    if eps_cut is None:
        eps_cut = float(np.min(grid.spacing)) / 2.0
    if eps_cut <= 0:
        raise ValueError("eps_cut must be positive")
    centers = grid.centers()
    values = np.zeros(grid.num_cells)
    abs_sum = np.zeros(grid.num_cells)
    mask = np.ones(grid.num_cells, dtype=bool)

    if mu.density is not None:
        if mu.density.same_layout(grid):
            w = _cell_weight_lattice(k, grid)
            dens = mu.density.shaped()
            values += fftconvolve(dens, w, mode="same").reshape(-1)
            wa = np.abs(w)
            abs_sum += fftconvolve(np.abs(dens), wa, mode="same").reshape(-1)
        else:
            vals, absv = _convolve_direct_density(k, mu.density, centers, eps_cut)
            values += vals
            abs_sum += absv

    if mu.num_atoms:
        diff = centers[:, None, :] - mu.atom_locations[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        near = dist < eps_cut
        mask &= ~np.any(near, axis=1)
        flat = diff.reshape(-1, grid.dim)
        kvals = np.zeros(flat.shape[0])
        okf = (~near).reshape(-1)
        kvals[okf] = k.eval(flat[okf])
        kv = kvals.reshape(dist.shape)
        values += kv @ mu.atom_weights
        abs_sum += np.abs(kv) @ np.abs(mu.atom_weights)

    mask &= abs_sum <= OVERFLOW_GUARD
    return values, mask


def _convolve_direct_density(k: Kernel, density: GridField, points: np.ndarray, eps_cut: float):
    src = density.centers()
    vol = density.cell_volume
    h = float(np.max(density.spacing))
    vals = np.zeros(points.shape[0])
    absv = np.zeros(points.shape[0])
    sub_axes = [(np.arange(4) + 0.5) * hh / 4.0 - hh / 2.0 for hh in density.spacing]
    sub_mesh = np.meshgrid(*sub_axes, indexing="ij")
    subs = np.stack([m.reshape(-1) for m in sub_mesh], axis=1)
    sub_vol = vol / 4 ** density.dim
    dvals = density.values
    for i, x in enumerate(points):
        diff = x[None, :] - src
        r = np.linalg.norm(diff, axis=1)
        far = r > 1.5 * h
        kv = np.zeros(src.shape[0])
        kv[far] = k.eval(diff[far]) * vol
        for j in np.nonzero(~far)[0]:
            kv[j] = float(np.sum(k.eval(diff[j][None, :] - subs))) * sub_vol
        vals[i] = float(np.dot(kv, dvals))
        absv[i] = float(np.dot(np.abs(kv), np.abs(dvals)))
    return vals, absv


def convolve(k: Kernel, mu: SignedMeasure, points, eps_cut: float | None = None):
    """K * mu at arbitrary points or on a grid; returns (values, domain_mask)."""
    if isinstance(points, GridField):
        return convolve_grid(k, mu, points, eps_cut)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if eps_cut is None:
        if mu.density is not None:
            eps_cut = float(np.min(mu.density.spacing)) / 2.0
        else:
            eps_cut = 1e-12
    if eps_cut <= 0:
        raise ValueError("eps_cut must be positive")
    values = np.zeros(pts.shape[0])
    abs_sum = np.zeros(pts.shape[0])
    mask = np.ones(pts.shape[0], dtype=bool)
    if mu.density is not None:
        vals, absv = _convolve_direct_density(k, mu.density, pts, eps_cut)
        values += vals
        abs_sum += absv
    if mu.num_atoms:
        diff = pts[:, None, :] - mu.atom_locations[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        near = dist < eps_cut
        mask &= ~np.any(near, axis=1)
        flat = diff.reshape(-1, pts.shape[1])
        kvals = np.zeros(flat.shape[0])
        okf = (~near).reshape(-1)
        kvals[okf] = k.eval(flat[okf])
        kv = kvals.reshape(dist.shape)
        values += kv @ mu.atom_weights
        abs_sum += np.abs(kv) @ np.abs(mu.atom_weights)
    mask &= abs_sum <= OVERFLOW_GUARD
    return values, mask
