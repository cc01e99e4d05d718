import numpy as np
import pytest

from creaselab.bartnik import crease_report_for
from creaselab.catalog import miao_corner, rotated_crease, trivial_crease
from creaselab.cliffords import build_rep
from creaselab.geometry import CreaseAngle
from creaselab.integrals import (
    TransmissionPreconditionError,
    crease_boundary_terms,
)
from creaselab.spheregrid import unit_vectors

REP = build_rep(3)


def random_trace_closure(rng, scale=0.3):
    """Random degree-1 angular polynomial trace in the adapted sphere gauge."""
    a0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    a1 = scale * (rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4)))

    def psi(theta, phi):
        om = unit_vectors(np.asarray(theta), np.asarray(phi))
        return a0[None, :] + om @ a1

    return psi


def test_trivial_crease_terms_vanish():
    tc = trivial_crease(2.0)
    rng = np.random.default_rng(0)
    res = crease_boundary_terms(tc, REP, random_trace_closure(rng), order=12)
    assert res.direct == pytest.approx(0.0, abs=1e-12)
    assert res.formula == pytest.approx(0.0, abs=1e-12)
    assert res.transmission_defect < 1e-14


def test_miao_corner_identity_random_pairs():
    mc = miao_corner(1.0, 4.0)
    report = crease_report_for(mc, order=16)
    assert report.min_margin > 0.0
    rng = np.random.default_rng(1)
    for _ in range(10):
        res = crease_boundary_terms(mc, REP, random_trace_closure(rng), order=16)
        assert res.mismatch <= 1e-8 * (abs(res.formula) + 1e-12)
        assert res.direct <= res.bound + 1e-10
        assert res.bound <= 1e-12  # margin > 0 forces a nonpositive bound
        assert res.direct <= 1e-10


def test_rotated_crease_identity_nonconstant_angle():
    rc = rotated_crease(miao_corner(1.0, 4.0), CreaseAngle.cos_theta(0.2))
    assert crease_report_for(rc, order=16).min_margin > 0.0
    rng = np.random.default_rng(2)
    for _ in range(10):
        res = crease_boundary_terms(rc, REP, random_trace_closure(rng), order=16)
        assert res.mismatch <= 1e-8 * (abs(res.formula) + 1e-12)
        assert res.direct <= res.bound + 1e-10
        assert res.direct <= 1e-10


def test_transmission_precondition_fires():
    mc = miao_corner(1.0, 4.0)
    rng = np.random.default_rng(3)
    psi_plus = random_trace_closure(rng)

    def psi_minus_bad(theta, phi):
        return psi_plus(theta, phi) + 1e-6

    with pytest.raises(TransmissionPreconditionError) as err:
        crease_boundary_terms(mc, REP, psi_plus, order=12, psi_minus=psi_minus_bad)
    assert err.value.defect > 1e-10


def test_explicit_matching_minus_trace_accepted():
    mc = rotated_crease(miao_corner(1.0, 4.0), CreaseAngle.from_constant(0.4))
    rng = np.random.default_rng(4)
    psi_plus = random_trace_closure(rng)
    from creaselab.integrals import transmission_matrix_nodes

    def psi_minus(theta, phi):
        f = mc.angle.value(unit_vectors(np.asarray(theta), np.asarray(phi)))
        rot = transmission_matrix_nodes(REP, f)
        return np.einsum("mIK,mK->mI", rot, np.asarray(psi_plus(theta, phi), dtype=complex))

    res = crease_boundary_terms(mc, REP, psi_plus, order=12, psi_minus=psi_minus)
    assert res.transmission_defect < 1e-12
    assert res.mismatch <= 1e-8 * (abs(res.formula) + 1e-12)


def test_negative_margin_allows_positive_bound():
    neg = miao_corner(-0.2, 4.0)
    rng = np.random.default_rng(5)
    res = crease_boundary_terms(neg, REP, random_trace_closure(rng), order=12)
    # identity still holds; only the sign guarantee is lost
    assert res.mismatch <= 1e-8 * (abs(res.formula) + 1e-12)
    assert res.bound > 0.0
