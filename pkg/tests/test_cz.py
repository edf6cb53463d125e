import math

import numpy as np
import pytest

from czkit.cz import cz_decompose, good_part_linf_constant, verify_cz
from czkit.geometry import Box
from czkit.maximal import maximal_function
from czkit.measures import GridField, SignedMeasure
from czkit.whitney import UnboundedCoverError


BOX = Box((-1.0, -1.0), (1.0, 1.0))


def random_measure(rng, n=32, atoms=True):
    k = int(rng.integers(1, 8)) if atoms else 0
    locs = rng.uniform(-0.8, 0.8, size=(k, 2))
    ws = rng.normal(size=k)
    dens = GridField(BOX, (n, n), rng.normal(size=n * n))
    return SignedMeasure(2, locs, ws, dens)


def test_dirac_decomposition_structure():
    # mu = delta_0, t = 1: exactly one whitney cube carries the atom; g is the
    # cube-average indicator; b(Q*) = 0 exactly
    mu = SignedMeasure.dirac((0.0, 0.0))
    # dense schedule so the schedule-based M delta_0 tracks 1/(pi |x|^2) tightly
    radii = np.geomspace(2.0 / 64 / 4, 90.0, 800)
    d = cz_decompose(mu, 1.0, BOX, 64, radii=radii)
    rep = verify_cz(d)
    assert rep.passed
    carrying = [b for b in d.bad_parts if b.atom_weights.size]
    assert len(carrying) == 1
    b = carrying[0]
    assert b.measure_of_cube() == 0.0
    assert b.mean_value == pytest.approx(1.0 / b.cube.volume)
    # closed-form F: M delta_0(x) = 1/(pi |x|^2) <= 1 iff |x| >= pi^-1/2;
    # every F cell center must satisfy this up to the schedule bias
    centers = d.f_mask.centers()
    on_f = d.f_mask.values != 0
    radii = np.linalg.norm(centers[on_f], axis=1)
    assert np.all(radii >= (1.0 / math.sqrt(math.pi)) * 0.99)
    # g vanishes off the carrying cube
    g_nonzero = np.abs(d.g.values) > 0
    assert np.count_nonzero(g_nonzero) == b.cell_flat_indices.size


def test_zero_measure_trivial():
    mu = SignedMeasure(2)
    d = cz_decompose(mu, 1.0, BOX, 32)
    assert not d.bad_parts
    assert np.all(d.g.values == 0.0)
    assert np.all(d.f_mask.values != 0)
    assert verify_cz(d).passed


def test_small_constant_density_trivial():
    n = 32
    dens = GridField(BOX, (n, n), np.full(n * n, 0.5))
    mu = SignedMeasure.from_density(dens)
    d = cz_decompose(mu, 1.0, BOX, n)
    assert not d.bad_parts
    assert np.array_equal(d.g.values, dens.values)
    rep = verify_cz(d)
    assert rep.passed
    assert rep.g_linf_over_t == pytest.approx(0.5)


def test_unbounded_cover_propagates():
    # t far below M mu everywhere -> F empty
    n = 16
    dens = GridField(BOX, (n, n), np.full(n * n, 5.0))
    mu = SignedMeasure.from_density(dens)
    with pytest.raises(UnboundedCoverError):
        cz_decompose(mu, 1e-6, BOX, n)


def test_atom_outside_box_rejected():
    mu = SignedMeasure.dirac((5.0, 5.0))
    with pytest.raises(ValueError):
        cz_decompose(mu, 1.0, BOX, 16)


def test_invalid_height():
    with pytest.raises(ValueError):
        cz_decompose(SignedMeasure.dirac((0.0, 0.0)), 0.0, BOX, 16)


def test_random_measures_all_invariants():
    rng = np.random.default_rng(31)
    n = 32
    for _ in range(12):
        mu = random_measure(rng, n=n)
        grid = GridField.zeros(BOX, (n, n))
        mf = maximal_function(mu, grid)
        finite = mf.values[mf.values < np.inf]
        lo_q, hi_q = np.quantile(finite, [0.55, 0.97])
        for t in np.geomspace(max(lo_q, 1e-6), hi_q, 3):
            d = cz_decompose(mu, float(t), BOX, n, maximal_field=mf)
            rep = verify_cz(d)
            assert rep.cancellation_ok and rep.max_cancellation_residual == 0.0
            assert rep.support_ok
            assert rep.l1_ok
            assert rep.linf_ok
            assert rep.reconstruction_ok and rep.reconstruction_residual == 0.0
            assert rep.bad_tv_ok
            assert rep.mass_accounting_ok
            assert rep.weak_level_ratio <= rep.weak_level_declared * 1.05


def test_monotone_f_in_height():
    rng = np.random.default_rng(5)
    n = 32
    mu = random_measure(rng, n=n)
    grid = GridField.zeros(BOX, (n, n))
    mf = maximal_function(mu, grid)
    t1, t2 = 1.0, 3.0
    d1 = cz_decompose(mu, t1, BOX, n, maximal_field=mf)
    d2 = cz_decompose(mu, t2, BOX, n, maximal_field=mf)
    f1 = d1.f_mask.values != 0
    f2 = d2.f_mask.values != 0
    assert np.all(f2[f1])  # F(t1) subset of F(t2)


def test_hand_built_violation_detected():
    # negative control: corrupting a bad part's stored mass breaks cancellation
    mu = SignedMeasure.dirac((0.0, 0.0))
    d = cz_decompose(mu, 1.0, BOX, 32)
    d.bad_parts[0].mass += 0.25
    rep = verify_cz(d)
    assert not rep.cancellation_ok


def test_declared_linf_constant():
    assert good_part_linf_constant(2) == pytest.approx(math.pi * (10 * math.sqrt(2)) ** 2)
    assert good_part_linf_constant(1) >= 1.0


def test_serialization_roundtrip():
    mu = SignedMeasure.dirac((0.1, -0.2), 2.0)
    d = cz_decompose(mu, 2.0, BOX, 32)
    payload = d.to_json()
    assert payload["t"] == 2.0
    assert payload["whitney"]["cubes"]
    assert any(b["atoms"] for b in payload["bad_parts"])
