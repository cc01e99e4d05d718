import math

import numpy as np
import pytest

from creaselab.bartnik import (
    BartnikError,
    bartnik_from_data,
    beta_delta,
    crease_margin,
    crease_report_for,
    equivalence_angle,
    rotate_bartnik,
    rotated_components,
    spacelike_form_check,
)
from creaselab.catalog import miao_corner, trivial_crease
from creaselab.geometry import CreaseAngle

MIAO_MARGIN = 0.5 * (1.0 - math.sqrt(0.5))


@pytest.fixture(scope="module")
def miao_pair():
    mc = miao_corner(1.0, 4.0)
    bm = bartnik_from_data(mc.minus, mc.r0, order=16, side="minus")
    bp = bartnik_from_data(mc.plus, mc.r0, order=16, side="plus")
    return mc, bm, bp


def test_rotated_components_identity(miao_pair):
    _, bm, _ = miao_pair
    nu, tau = rotated_components(bm, 0.0)
    assert np.allclose(nu, bm.H) and np.allclose(tau, bm.trk)


def test_rotated_components_log2(miao_pair):
    _, bm, _ = miao_pair
    # H = 0.5, trk = 0 on the flat side of the corner
    nu, tau = rotated_components(bm, math.log(2.0))
    assert np.allclose(nu, 0.625, atol=1e-12)
    assert np.allclose(tau, 0.375, atol=1e-12)


def test_rotation_preserves_causal_length(miao_pair):
    _, bm, _ = miao_pair
    rng = np.random.default_rng(2)
    f = rng.normal(size=bm.size)
    nu, tau = rotated_components(bm, f)
    assert np.max(np.abs(nu**2 - tau**2 - bm.causal_length_squared())) < 1e-12


def test_beta_delta_trivial_and_gradient():
    tc = trivial_crease(2.0)
    bm = bartnik_from_data(tc.minus, 2.0, order=12, side="minus")
    bp = bartnik_from_data(tc.plus, 2.0, order=12, side="plus")
    assert np.max(np.abs(beta_delta(bm, bp, 0.7))) < 1e-14  # constant f

    ang = CreaseAngle.cos_theta(0.1)
    bd = beta_delta(bm, bp, ang)
    expect = 0.1 * np.abs(np.sin(bm.grid.theta)) / 2.0
    assert np.max(np.abs(np.linalg.norm(bd, axis=1) - expect)) < 1e-13

    # spectral differentiation path agrees with the analytic gradient
    spectral = CreaseAngle(value=ang.value, surface_gradient=None)
    assert np.max(np.abs(beta_delta(bm, bp, spectral) - bd)) < 1e-12


def test_beta_delta_grid_mismatch(miao_pair):
    _, bm, _ = miao_pair
    tc = trivial_crease(2.0)
    other = bartnik_from_data(tc.plus, 2.0, order=16)
    with pytest.raises(BartnikError):
        beta_delta(bm, other, 0.0)


def test_crease_margin_identical_data():
    tc = trivial_crease(1.5)
    rep = crease_report_for(tc, order=12)
    assert np.max(np.abs(rep.margin)) < 1e-13
    assert rep.dec_creased


def test_miao_corner_margin_closed_form(miao_pair):
    mc, _, _ = miao_pair
    rep = crease_report_for(mc, order=16)
    assert rep.min_margin == pytest.approx(MIAO_MARGIN, abs=1e-9)
    assert np.max(np.abs(rep.margin - MIAO_MARGIN)) < 1e-12  # constant over the sphere
    assert rep.dec_creased


def test_negative_mass_corner_fails():
    rep = crease_report_for(miao_corner(-0.2, 4.0), order=12)
    assert rep.min_margin < 0.0
    assert not rep.dec_creased


def test_margin_gauge_invariance(miao_pair):
    _, bm, bp = miao_pair
    ang = CreaseAngle.cos_theta(0.2)
    f = ang.value(bm.grid.nodes)
    rep1 = crease_margin(bm, bp, ang)
    rep2 = crease_margin(rotate_bartnik(bm, 0.35), bp, f - 0.35)
    assert np.max(np.abs(rep1.margin - rep2.margin)) < 1e-11


def test_flat_corner_margin_is_mean_curvature_jump(miao_pair):
    mc, bm, bp = miao_pair
    rep = crease_margin(bm, bp, 0.0)
    assert np.allclose(rep.margin, bm.H - bp.H, atol=1e-13)


def test_spacelike_form_agreement(miao_pair):
    mc, _, _ = miao_pair
    rep = crease_report_for(mc, order=16)
    cond = spacelike_form_check(rep)
    assert np.all(cond)
    rep_neg = crease_report_for(miao_corner(-0.2, 4.0), order=12)
    cond_neg = spacelike_form_check(rep_neg)
    assert not np.all(cond_neg)


def test_formulation_equivalence_random_triples():
    rng = np.random.default_rng(42)
    nu, tau, bd = rng.normal(size=(3, 1000))
    bd = np.abs(bd)
    margin = nu - np.sqrt(tau**2 + bd**2)
    cond = (nu >= np.abs(tau)) & (nu**2 - tau**2 >= bd**2)
    assert np.array_equal(margin >= 0.0, cond)


def test_boundary_case_equality():
    # nu = |tau|, beta-delta = 0: both formulations mark the equality case
    nu, tau, bd = 0.7, -0.7, 0.0
    margin = nu - math.sqrt(tau**2 + bd**2)
    cond = (nu >= abs(tau)) and (nu**2 - tau**2 >= bd**2)
    assert margin == 0.0 and cond


def test_equivalence_angle_roundtrip(miao_pair):
    _, bm, _ = miao_pair
    assert np.max(np.abs(equivalence_angle(bm, bm))) < 1e-12

    ang = CreaseAngle.cos_theta(0.3)
    rotated = rotate_bartnik(bm, ang)
    f = equivalence_angle(bm, rotated)
    assert f is not None
    assert np.max(np.abs(f - ang.value(bm.grid.nodes))) < 1e-10


def test_equivalence_angle_obstruction(miao_pair):
    import dataclasses

    _, bm, _ = miao_pair
    rotated = rotate_bartnik(bm, 0.3)
    bad = dataclasses.replace(rotated, H=rotated.H * 1.01)
    assert equivalence_angle(bm, bad) is None


def test_equivalence_angle_null_error(miao_pair):
    import dataclasses

    _, bm, _ = miao_pair
    null = dataclasses.replace(bm, trk=bm.H.copy())  # H^2 - trk^2 = 0
    with pytest.raises(BartnikError):
        equivalence_angle(null, null)


def test_beta_delta_side_swap_antisymmetry(miao_pair):
    _, bm, bp = miao_pair
    ang = CreaseAngle.cos_theta(0.15)
    f = ang.value(bm.grid.nodes)
    forward = beta_delta(bm, bp, f)
    backward = beta_delta(bp, bm, -f)
    assert np.max(np.abs(forward + backward)) < 1e-12
