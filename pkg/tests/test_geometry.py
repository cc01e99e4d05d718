import math

import numpy as np
import pytest

from creaselab.catalog import (
    catalog,
    graph_slice,
    miao_corner,
    minkowski_slice,
    schwarzschild_exterior_area_radius,
    schwarzschild_isotropic,
    trivial_crease,
)
from creaselab.geometry import (
    GeometryError,
    bulk_frame,
    constraint_fields,
    fit_decay,
    hypersurface_geometry,
    sphere_frame,
    unit_sphere_volume,
    verify_crease_match,
)


def sample_points(rng, m, rlo, rhi):
    xs = rng.normal(size=(m, 3))
    xs /= np.linalg.norm(xs, axis=1)[:, None]
    return xs * rng.uniform(rlo, rhi, size=m)[:, None]


def test_unit_sphere_volume():
    assert unit_sphere_volume(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert unit_sphere_volume(4) == pytest.approx(2.0 * math.pi**2, rel=1e-15)


def test_catalog_dispatch_and_errors():
    assert catalog("minkowski_slice").label == "minkowski_slice"
    assert catalog("miao_corner", m=1.0, rho0=4.0).r0 == 4.0
    with pytest.raises(GeometryError):
        catalog("no_such_model")
    with pytest.raises(GeometryError):
        catalog("miao_corner", m=3.0, rho0=4.0)  # horizon inside gluing sphere
    with pytest.raises(GeometryError):
        catalog("graph_slice", amplitude=1.5)


def test_minkowski_constraints_zero():
    flat = minkowski_slice()
    rng = np.random.default_rng(1)
    pts = sample_points(rng, 25, 0.5, 10.0)
    c = constraint_fields(flat, pts)
    assert np.max(np.abs(c.mu)) == 0.0
    assert np.max(np.abs(c.J)) == 0.0


@pytest.mark.parametrize(
    "maker,rlo,rhi",
    [
        (lambda: schwarzschild_isotropic(1.0), 2.0, 12.0),
        (lambda: schwarzschild_exterior_area_radius(1.0), 3.0, 12.0),
        (lambda: graph_slice(), 1.0, 9.0),
    ],
)
def test_vacuum_constraint_residuals(maker, rlo, rhi):
    data = maker()
    rng = np.random.default_rng(7)
    pts = sample_points(rng, 100, rlo, rhi)
    c = constraint_fields(data, pts)
    assert np.max(np.abs(c.mu)) < 1e-6
    assert np.max(c.momentum_norm(data, pts)) < 1e-6
    # graph slices are vacuum Minkowski slices: mu >= |J| holds within noise
    assert np.all(c.mu >= c.momentum_norm(data, pts) - 1e-7)


def test_schwarzschild_isotropic_point_example():
    data = schwarzschild_isotropic(1.0)
    c = constraint_fields(data, np.array([3.0, 0.0, 0.0]))
    assert abs(c.mu) < 1e-7
    assert float(np.max(np.abs(c.J))) < 1e-7
    assert c.error_estimate < 1e-7


def test_constraints_out_of_domain():
    mc = miao_corner(1.0, 4.0)
    with pytest.raises(GeometryError):
        constraint_fields(mc.plus, np.array([4.0, 0.0, 0.0]))  # stencil leaves chart


def test_flat_sphere_mean_curvature():
    flat = minkowski_slice()
    hg = hypersurface_geometry(flat, 1.0, np.array([0.3, -0.5, 0.8]))
    assert hg.H == pytest.approx(2.0, abs=1e-12)
    hg2 = hypersurface_geometry(flat, 2.5, np.array([0.0, 1.0, 1.0]))
    assert hg2.H == pytest.approx(2.0 / 2.5, abs=1e-12)


def test_schwarzschild_area_radius_mean_curvature():
    data = schwarzschild_exterior_area_radius(1.0)
    hg = hypersurface_geometry(data, 4.0, np.array([0.2, 0.4, 0.6]))
    assert hg.H == pytest.approx(0.5 * math.sqrt(0.5), abs=1e-12)


def test_orientation_flip():
    data = graph_slice()
    omega = np.array([[0.3, 0.5, 0.8], [-0.2, 0.9, 0.1]])
    out = hypersurface_geometry(data, 4.5, omega, orientation="outward")
    inn = hypersurface_geometry(data, 4.5, omega, orientation="inward")
    assert np.allclose(out.H, -inn.H, atol=1e-12)
    assert np.allclose(out.beta, -inn.beta, atol=1e-12)
    assert np.allclose(out.trk, inn.trk, atol=1e-12)
    assert np.allclose(out.area_element, inn.area_element, atol=1e-12)


def test_graph_slice_beta_matches_direct_contraction():
    data = graph_slice()
    omega = np.array([[0.3, 0.5, 0.8], [0.6, -0.7, 0.2], [0.0, 0.6, 0.8]])
    omega /= np.linalg.norm(omega, axis=1)[:, None]
    r0 = 4.0
    hg = hypersurface_geometry(data, r0, omega)
    k = data.k(r0 * omega)
    direct = np.einsum("mi,mij,maj->ma", hg.nu, k, hg.tangent)
    assert np.max(np.abs(direct - hg.beta)) < 1e-12
    # spherically symmetric k has no nu-tangential mixing
    assert np.max(np.abs(hg.beta)) < 1e-12


def test_graph_slice_with_constant_slope_is_flat():
    # h' == 0 reduces the slice to the flat catalog entry
    data = graph_slice(amplitude=0.0)
    flat = minkowski_slice()
    pts = np.array([[1.0, 2.0, 2.0], [4.0, 0.0, 1.0]])
    assert np.allclose(data.g(pts), flat.g(pts))
    assert np.allclose(data.k(pts), flat.k(pts))
    assert np.allclose(data.dg(pts), flat.dg(pts))


def test_miao_corner_crease_match():
    mc = miao_corner(1.0, 4.0)
    assert verify_crease_match(mc, order=16) < 1e-12


def test_fit_decay_schwarzschild():
    fd = fit_decay(schwarzschild_isotropic(1.0), [20.0, 40.0, 80.0, 160.0])
    assert 0.95 <= fd.q_est <= 1.05
    assert not fd.exact_flat


def test_fit_decay_flat_sentinel():
    fd = fit_decay(minkowski_slice(), [20.0, 40.0, 80.0])
    assert fd.exact_flat
    assert fd.max_deviation == (0.0, 0.0, 0.0)


def test_fit_decay_miao_exterior():
    mc = miao_corner(1.0, 4.0)
    fd = fit_decay(mc.plus, [20.0, 40.0, 80.0])
    assert abs(fd.q_est - 1.0) < 0.1


def test_fit_decay_argument_errors():
    data = schwarzschild_isotropic(1.0)
    with pytest.raises(GeometryError):
        fit_decay(data, [10.0, 20.0])
    with pytest.raises(GeometryError):
        fit_decay(data, [20.0, 10.0, 40.0])


@pytest.mark.parametrize("maker", [schwarzschild_isotropic, schwarzschild_exterior_area_radius])
def test_frames_orthonormal(maker):
    data = maker(1.0)
    rng = np.random.default_rng(3)
    pts = sample_points(rng, 40, 3.0, 9.0)
    g = data.g(pts)
    fr = bulk_frame(data, pts)
    gram = np.einsum("mai,mij,mbj->mab", fr, g, fr)
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12

    sf = sphere_frame(data, pts)
    gram2 = np.einsum("mai,mij,mbj->mab", sf.frame, g, sf.frame)
    assert np.max(np.abs(gram2 - np.eye(3))) < 1e-12
    # positively oriented and normal-adapted
    assert np.all(np.linalg.det(sf.frame) > 0.0)
    radial = np.einsum("mi,mi->m", sf.normal_out, pts)
    assert np.all(radial > 0.0)


def test_shared_tangential_frame_across_crease():
    mc = miao_corner(1.0, 4.0)
    rng = np.random.default_rng(5)
    om = rng.normal(size=(30, 3))
    om /= np.linalg.norm(om, axis=1)[:, None]
    pts = 4.0 * om
    fm = sphere_frame(mc.minus, pts)
    fp = sphere_frame(mc.plus, pts)
    assert np.max(np.abs(fm.tangent - fp.tangent)) < 1e-10
