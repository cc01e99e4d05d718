import math

import numpy as np
import pytest

from creaselab.catalog import (
    graph_slice,
    miao_corner,
    minkowski_slice,
    schwarzschild_isotropic,
)
from creaselab.cliffords import build_rep
from creaselab.geometry import Chart, InitialData, bulk_frame
from creaselab.integrals import (
    IntegralsError,
    adm_energy_momentum,
    bulk_spin_coefficients,
    dirac_witten_apply,
    flux_fit_energy_momentum,
    flux_mass_pairing,
    lsw_residual,
    sen_derivative,
    sen_derivatives,
    sphere_integral,
    volume_quadrature,
    witten_flux,
)
from creaselab.spheregrid import sphere_grid
from creaselab.spinorfields import (
    SpinorField,
    constant_spinor_field,
    radial_bump_field,
    random_polynomial_field,
    rotation_between_frames,
    spin_lift,
    spin_lift_any,
)

REP = build_rep(3)


# ---------------------------------------------------------------------------
# sphere quadrature


def test_sphere_integral_area():
    val = sphere_integral(lambda x: np.ones(len(x)), 2.0, 8)
    assert val == pytest.approx(16.0 * math.pi, abs=1e-12)


def test_sphere_integral_odd_symmetry():
    val = sphere_integral(lambda x: x[:, 2] / 2.0, 2.0, 8)
    assert abs(val) < 1e-12


def test_sphere_integral_moment():
    val = sphere_integral(lambda x: x[:, 2] ** 2, 1.0, 12)
    assert val == pytest.approx(4.0 * math.pi / 3.0, abs=1e-10)


def test_sphere_integral_rejects_nonfinite():
    with pytest.raises(IntegralsError):
        sphere_integral(lambda x: np.full(len(x), np.nan), 1.0, 8)


# ---------------------------------------------------------------------------
# spin lift


def test_spin_lift_intertwines_random_rotations():
    from scipy.linalg import expm

    rng = np.random.default_rng(0)
    for _ in range(15):
        w = rng.normal(size=3)
        W = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
        O = expm(W)
        for lift in (spin_lift, spin_lift_any):
            if lift is spin_lift and np.trace(O) < -0.6:
                continue
            sigma = lift(REP, O[None])[0]
            assert np.max(np.abs(sigma @ sigma.conj().T - np.eye(4))) < 1e-13
            for j in range(3):
                lhs = sigma @ REP.gamma[j] @ sigma.conj().T
                rhs = np.einsum("i,ikl->kl", O[:, j], REP.gamma)
                assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_spin_lift_any_handles_half_turns():
    O = np.diag([1.0, -1.0, -1.0])  # half turn about x
    sigma = spin_lift_any(REP, O[None])[0]
    for j in range(3):
        lhs = sigma @ REP.gamma[j] @ sigma.conj().T
        rhs = np.einsum("i,ikl->kl", O[:, j], REP.gamma)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


# ---------------------------------------------------------------------------
# ADM energy-momentum


def test_adm_minkowski_zero():
    rep = adm_energy_momentum(minkowski_slice(), [10.0, 20.0, 40.0], order=8)
    assert rep.E == 0.0
    assert np.all(rep.P == 0.0)
    assert rep.m == 0.0


def test_adm_schwarzschild_isotropic():
    rep = adm_energy_momentum(schwarzschild_isotropic(1.0), [50.0, 100.0, 200.0], order=24)
    assert 0.999 <= rep.E <= 1.001
    assert np.max(np.abs(rep.P)) < 1e-6
    assert rep.m == pytest.approx(rep.E, abs=1e-9)


def test_adm_miao_corner_exterior():
    mc = miao_corner(1.0, 4.0)
    rep = adm_energy_momentum(mc.plus, [50.0, 100.0, 200.0], order=24)
    assert 0.99 <= rep.E <= 1.01
    assert np.max(np.abs(rep.P)) < 1e-6


def test_adm_rotation_invariance():
    base = schwarzschild_isotropic(1.0)
    # rigid rotation of the data: g_R(x) = R^T g(Rx) R, likewise k and the derivatives
    th = 0.7
    R = np.array(
        [
            [math.cos(th), -math.sin(th), 0.0],
            [math.sin(th), math.cos(th), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )

    def rot_metric(x):
        return np.einsum("ia,mab,jb->mij", R.T, base.g(x @ R.T), R.T)

    def rot_dg(x):
        d = base.dg(x @ R.T)
        return np.einsum("ia,jb,lc,mabc->mijl", R.T, R.T, R.T, d)

    rotated = InitialData(
        n=3, chart=base.chart, g=rot_metric, k=base.k, dg=rot_dg, dk=base.dk,
        kind=base.kind, q=base.q, label="rotated",
    )
    r1 = adm_energy_momentum(base, [50.0, 100.0, 200.0], order=24)
    r2 = adm_energy_momentum(rotated, [50.0, 100.0, 200.0], order=24)
    assert abs(r1.E - r2.E) <= 1e-3 * abs(r1.E)
    assert np.max(np.abs(r1.P - r2.P)) <= 1e-3 * (abs(r1.E) + 1.0)


def test_adm_radii_validation():
    with pytest.raises(IntegralsError):
        adm_energy_momentum(minkowski_slice(), [20.0, 10.0], order=8)


# ---------------------------------------------------------------------------
# Sen connection and Dirac-Witten operator


def test_spin_coefficients_antisymmetric():
    data = schwarzschild_isotropic(1.0)
    pts = np.array([[2.0, 1.0, -0.5], [4.0, 0.2, 0.9]])
    W = bulk_spin_coefficients(data, pts)
    assert np.max(np.abs(W + np.swapaxes(W, 2, 3))) < 1e-9


def test_sen_constant_on_flat():
    flat = minkowski_slice()
    fld = constant_spinor_field(REP, np.array([1.0, 0.5j, -0.25, 0.125]))
    pts = np.array([[1.0, 2.0, 0.5], [0.3, -0.2, 4.0]])
    assert np.max(np.abs(sen_derivatives(flat, REP, fld, pts))) == 0.0
    assert np.max(np.abs(dirac_witten_apply(flat, REP, fld, pts))) == 0.0


def test_sen_reduces_to_spin_derivative_when_k_zero():
    data = schwarzschild_isotropic(1.0)
    rng = np.random.default_rng(5)
    fld = random_polynomial_field(REP, rng, degree=2, scale=0.2)
    pts = np.array([[3.0, 1.0, 0.5]])
    sen = sen_derivatives(data, REP, fld, pts)
    # re-assemble the pure spin derivative: k = 0 means no tau coupling
    frame = bulk_frame(data, pts)
    dc = fld.frame_derivatives(data, pts, frame=frame)
    W = bulk_spin_coefficients(data, pts)
    gg = np.einsum("jIK,lKL->jlIL", REP.gamma, REP.gamma)
    spin = 0.25 * np.einsum("majl,jlIK,mK->mIa", W, gg, fld.evaluate(pts))
    assert np.max(np.abs(sen - (dc + spin))) < 1e-14


def test_sen_step_halving_oracle():
    data = graph_slice()
    rng = np.random.default_rng(11)
    analytic = random_polynomial_field(REP, rng, degree=2, scale=0.2)
    fd_half = SpinorField(rep=REP, values=analytic.values, cartesian_gradient=None, fd_step=5e-7)
    pts = np.array([[4.0, 1.0, 1.5], [3.5, -2.0, 0.7], [5.0, 0.1, -0.4]])
    a = sen_derivatives(data, REP, analytic, pts)
    b = sen_derivatives(data, REP, fd_half, pts)
    assert np.max(np.abs(a - b)) < 1e-6


def test_sen_single_direction_accessor():
    data = graph_slice()
    rng = np.random.default_rng(2)
    fld = random_polynomial_field(REP, rng, degree=1, scale=0.3)
    pts = np.array([[4.0, 0.5, 1.0]])
    allof = sen_derivatives(data, REP, fld, pts)
    for i in (1, 2, 3):
        assert np.allclose(sen_derivative(data, REP, fld, pts, i), allof[..., i - 1])
    with pytest.raises(IntegralsError):
        sen_derivative(data, REP, fld, pts, 4)


def test_dirac_witten_linearity():
    data = graph_slice()
    rng = np.random.default_rng(7)
    f1 = random_polynomial_field(REP, rng, degree=2, scale=0.2)
    f2 = random_polynomial_field(REP, rng, degree=2, scale=0.2)
    a, b = 1.3 - 0.2j, -0.7j
    combo = SpinorField(
        rep=REP,
        values=lambda x: a * f1.values(x) + b * f2.values(x),
        cartesian_gradient=lambda x: a * f1.cartesian_gradient(x) + b * f2.cartesian_gradient(x),
    )
    pts = np.array([[4.0, 1.0, 0.3], [2.0, -1.0, 2.0]])
    lhs = dirac_witten_apply(data, REP, combo, pts)
    rhs = a * dirac_witten_apply(data, REP, f1, pts) + b * dirac_witten_apply(data, REP, f2, pts)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_dirac_witten_formal_self_adjointness():
    flat = minkowski_slice()
    psi = radial_bump_field(REP, np.array([1.0, 0.3j, -0.2, 0.5]), 0.5, 2.0)
    phi = radial_bump_field(REP, np.array([0.2, 1.0, 0.4j, -0.3]), 0.5, 2.0)
    pts, w = volume_quadrature(("ball", 2.0), 32, 12)
    dwp = dirac_witten_apply(flat, REP, psi, pts)
    dwq = dirac_witten_apply(flat, REP, phi, pts)
    lhs = np.sum(w * np.einsum("mI,mI->m", np.conj(dwp), phi.evaluate(pts)))
    rhs = np.sum(w * np.einsum("mI,mI->m", np.conj(psi.evaluate(pts)), dwq))
    assert abs(lhs - rhs) < 1e-10


def test_dirac_witten_green_identity_with_boundary():
    flat = minkowski_slice()
    rng = np.random.default_rng(3)
    f1 = random_polynomial_field(REP, rng, degree=2, scale=0.3)
    f2 = random_polynomial_field(REP, rng, degree=2, scale=0.3)
    pts, w = volume_quadrature(("ball", 2.0), 32, 16)
    dw1 = dirac_witten_apply(flat, REP, f1, pts)
    dw2 = dirac_witten_apply(flat, REP, f2, pts)
    vol = np.sum(
        w
        * (
            np.einsum("mI,mI->m", np.conj(dw1), f2.evaluate(pts))
            - np.einsum("mI,mI->m", np.conj(f1.evaluate(pts)), dw2)
        )
    )
    grid = sphere_grid(16)
    xb = 2.0 * grid.nodes
    nu_psi = np.einsum("mi,iIK,mK->mI", grid.nodes, REP.gamma, f1.evaluate(xb))
    bnd = 4.0 * grid.integrate(np.einsum("mI,mI->m", np.conj(nu_psi), f2.evaluate(xb)))
    assert abs(vol - bnd) < 1e-10 * (1.0 + abs(vol))


# ---------------------------------------------------------------------------
# Witten flux


def test_witten_flux_flat_vanishes():
    flat = minkowski_slice()
    wf = witten_flux(flat, REP, np.array([1.0, 0.5j, -0.25, 0.125]), 10.0, order=12)
    assert abs(wf.value) < 1e-10
    assert abs(wf.imag_part) < 1e-12


def test_witten_flux_schwarzschild_limit():
    data = schwarzschild_isotropic(1.0)
    psi = np.array([1.0, 0.0, 0.0, 0.0])
    wf = witten_flux(data, REP, psi, 200.0, order=16)
    target = flux_mass_pairing(REP, 1.0, np.zeros(3), psi)
    assert target == pytest.approx(4.0 * math.pi, rel=1e-12)
    assert abs(wf.value - target) <= 0.02 * target


def test_witten_flux_decay_rate():
    data = schwarzschild_isotropic(1.0)
    psi = np.array([1.0, 0.0, 0.0, 0.0])
    errs = [abs(witten_flux(data, REP, psi, r, order=16).value - 4.0 * math.pi)
            for r in (50.0, 100.0, 200.0, 400.0)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    rate = math.log2(errs[0] / errs[-1]) / 3.0
    assert rate > 0.8  # q' > 0, empirically ~ 1


def test_flux_fit_matches_adm():
    data = schwarzschild_isotropic(1.0)
    adm = adm_energy_momentum(data, [50.0, 100.0, 200.0], order=24)
    E_fit, P_fit = flux_fit_energy_momentum(data, REP, 200.0, order=12)
    assert abs(E_fit - adm.E) <= 0.02 * abs(adm.E)
    assert np.max(np.abs(P_fit - adm.P)) <= 0.02 * (abs(adm.E) + 1.0)


# ---------------------------------------------------------------------------
# integrated Weitzenbock identity


def test_lsw_flat_constant():
    flat = minkowski_slice()
    fld = constant_spinor_field(REP, np.array([1.0, 0.5j, -0.25, 0.125]))
    res = lsw_residual(flat, REP, fld, ("ball", 2.0), order=12)
    assert res.bulk == 0.0
    assert abs(res.boundary) < 1e-10
    assert abs(res.residual) < 1e-10


@pytest.mark.parametrize("maker", [schwarzschild_isotropic, lambda m=None: graph_slice()])
def test_lsw_identity_annulus(maker):
    data = maker(1.0) if maker is schwarzschild_isotropic else maker()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(3):
        fld = random_polynomial_field(REP, rng, degree=2, scale=0.2)
        res = lsw_residual(data, REP, fld, ("annulus", 3.0, 6.0), order=16)
        worst = max(worst, abs(res.residual) / (abs(res.bulk) + 1.0))
    assert worst <= 1e-6


def test_lsw_identity_synthetic_full_terms():
    # flat metric with k = c x1 delta: mu and J are both nonzero, so every
    # term of the identity is exercised, including the J tau pairing sign
    flat = minkowski_slice()
    cc = 0.3

    def kfun(x):
        return cc * x[:, 0, None, None] * np.broadcast_to(np.eye(3), (x.shape[0], 3, 3))

    def dkfun(x):
        out = np.zeros((x.shape[0], 3, 3, 3))
        out[:, :, :, 0] = np.eye(3)[None] * cc
        return out

    synth = InitialData(
        n=3, chart=Chart("exterior", 0.0, math.inf), g=flat.g, dg=flat.dg,
        k=kfun, dk=dkfun, kind="asymptotically-flat-exterior", q=None, label="synthetic-k",
    )
    rng = np.random.default_rng(4)
    fld = random_polynomial_field(REP, rng, degree=2, scale=0.3)
    res = lsw_residual(synth, REP, fld, ("ball", 2.0), order=12)
    assert abs(res.residual) <= 1e-6 * (abs(res.bulk) + 1.0)


def test_lsw_quadrature_order_refinement():
    # the graph-slice bump under-resolves at low radial order, so the
    # residual there is pure quadrature error and must decay spectrally
    data = graph_slice()
    rng = np.random.default_rng(9)
    fld = random_polynomial_field(REP, rng, degree=2, scale=0.2)
    coarse = abs(lsw_residual(data, REP, fld, ("ball", 6.0), order=12, r_order=24).residual)
    fine = abs(lsw_residual(data, REP, fld, ("ball", 6.0), order=12, r_order=48).residual)
    assert coarse > 1e-6  # under-resolved on purpose
    assert fine < 1e-2 * coarse
