import math

import numpy as np
import pytest

from czkit.geometry import Box
from czkit.kernels import (
    Kernel,
    convolve,
    convolve_grid,
    default_bound_samples,
    get_kernel,
    kernel_bounds_check,
    sphere_area,
)
from czkit.measures import GridField, SignedMeasure


def test_riesz_a_fit_is_one():
    k = get_kernel("riesz", 2)
    a_fit, b_fit, ok = kernel_bounds_check(k)
    assert a_fit == pytest.approx(1.0, rel=1e-12)
    assert ok


def test_grad_e_constant_matches_formula():
    # |grad E| component bound: A = 1/sigma_N = 1/(4 pi) in N=3
    k = get_kernel("grad_e", 3)
    assert k.A == pytest.approx(1.0 / (4.0 * math.pi))
    a_fit, b_fit, ok = kernel_bounds_check(k)
    assert ok
    assert a_fit <= k.A * (1 + 1e-9)


def test_mislabeled_exponent_fails():
    # kernel |x|^-N labeled with the |x|^-(N-1) bound: A_fit diverges near 0
    n = 2
    bad = Kernel("bad", n, A=1.0, B=100.0,
                 eval_fn=lambda pts, r: r ** (-n))
    samples = default_bound_samples(n)
    a_fit, _, ok = kernel_bounds_check(bad, samples)
    assert not ok
    assert a_fit > 1.0


def test_all_builtins_pass_their_bounds():
    for name in ("riesz", "e", "grad_e"):
        for dim in (2, 3):
            k = get_kernel(name, dim)
            a_fit, b_fit, ok = kernel_bounds_check(k)
            assert ok, (k.key, a_fit, b_fit)


def test_bounds_check_rejects_origin():
    k = get_kernel("riesz", 2)
    with pytest.raises(ValueError):
        kernel_bounds_check(k, np.asarray([[0.0, 0.0]]))


def test_convolve_dirac_fundamental_solution_values():
    e3 = get_kernel("e", 3)
    mu = SignedMeasure.dirac((0.0, 0.0, 0.0))
    v, mask = convolve(e3, mu, [(2.0, 0.0, 0.0)])
    assert mask[0]
    assert v[0] == pytest.approx(1.0 / (8.0 * math.pi), abs=1e-12)
    e2 = get_kernel("e", 2)
    v2, _ = convolve(e2, SignedMeasure.dirac((0.0, 0.0)), [(1.0, 0.0)])
    assert v2[0] == pytest.approx(0.0, abs=1e-15)


def test_convolve_zero_measure():
    k = get_kernel("riesz", 2)
    box = Box((0.0, 0.0), (1.0, 1.0))
    g = GridField.zeros(box, (8, 8))
    v, mask = convolve_grid(k, SignedMeasure(2), g)
    assert np.all(v == 0.0) and np.all(mask)


def test_convolve_mask_excludes_atom_neighborhood():
    k = get_kernel("riesz", 2)
    box = Box((0.0, 0.0), (1.0, 1.0))
    g = GridField.zeros(box, (16, 16))
    atom = tuple(g.centers()[100])
    mu = SignedMeasure.dirac(atom)
    v, mask = convolve_grid(k, mu, g)
    assert not mask[100]
    assert mask.sum() == g.num_cells - 1


def test_grid_fft_matches_direct_quadrature():
    rng = np.random.default_rng(2)
    box = Box((-1.0, -1.0), (1.0, 1.0))
    n = 24
    g = GridField(box, (n, n), rng.normal(size=n * n))
    mu = SignedMeasure.from_density(g)
    k = get_kernel("riesz", 2)
    vals, mask = convolve_grid(k, mu, g)
    pick = rng.integers(0, n * n, size=6)
    direct, _ = convolve(k, mu, g.centers()[pick])
    assert np.allclose(vals[pick], direct, rtol=1e-10, atol=1e-12)


def test_convolution_linearity_in_measure():
    box = Box((-1.0, -1.0), (1.0, 1.0))
    g = GridField.zeros(box, (16, 16))
    k = get_kernel("riesz", 2)
    a = SignedMeasure.dirac((0.3, 0.1), 1.0)
    b = SignedMeasure.dirac((-0.4, -0.2), -2.0)
    va, _ = convolve_grid(k, a, g)
    vb, _ = convolve_grid(k, b, g)
    vab, _ = convolve_grid(k, a + b, g)
    assert np.allclose(vab, va + vb, rtol=1e-12, atol=1e-14)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_newtonian_quadrature_converges_to_potential():
    # E * (smooth bump) away from the support, refined midpoint vs refinement
    box = Box((-1.0, -1.0), (1.0, 1.0))
    k = get_kernel("e", 2)
    x = np.asarray([[0.9, 0.9]])
    vals = []
    for n in (16, 32, 64):
        g = GridField.from_function(
            box, (n, n),
            lambda p: np.exp(-40 * ((p[:, 0] + 0.3) ** 2 + (p[:, 1] + 0.3) ** 2)),
        )
        mu = SignedMeasure.from_density(g)
        v, _ = convolve(k, mu, x)
        vals.append(v[0])
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])
