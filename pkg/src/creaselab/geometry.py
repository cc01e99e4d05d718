"""Charts, initial-data fields, frames, constraints, and induced boundary geometry.

An initial data set is a chart in Cartesian coordinates together with
vectorized closures for the metric g, the extrinsic curvature k, and their
first partial derivatives.  Point batches have shape (m, n); tensors append
index axes, with the derivative index last: dg[..., i, j, l] = d_l g_ij.

Conventions (fixed here, imported everywhere else):
  * k is taken with respect to the future timelike normal, signed so that
    the catalog's Minkowski graph slices satisfy the vacuum constraints.
  * Mean curvature of a round sphere with outward normal in flat space is
    positive, H = (n-1)/r.
  * Orthonormal frames come from Gram-Schmidt on the coordinate basis in
    fixed index order.  On coordinate spheres the frame is adapted: shared
    tangential vectors (Euclidean projections of the coordinate basis,
    orthonormalized in the induced metric) followed by e_n = outward unit
    normal, with the last tangential vector flipped if needed to keep the
    frame positively oriented.
  * Units G = c = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
from typing import Callable

import numpy as np

from .spheregrid import sphere_grid, theta_phi_tangents


class GeometryError(ValueError):
    """Invalid data, out-of-domain evaluation, or degenerate geometry."""


FD_STEP_SCALE = float(np.finfo(float).eps) ** (1.0 / 3.0)


def unit_sphere_volume(n: int) -> float:
    """Volume of the unit (n-1)-sphere, 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def as_points(x: np.ndarray, n: int) -> tuple[np.ndarray, bool]:
    """Promote a single point to a batch of one; report whether it was single."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != n:
            raise GeometryError(f"point has dimension {arr.shape[0]}, expected {n}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != n:
        raise GeometryError(f"points must have shape (m, {n})")
    return arr, False


# ---------------------------------------------------------------------------
# charts and data containers


@dataclass(frozen=True)
class Chart:
    """Radial domain descriptor: ball, exterior region, or annulus."""

    kind: str  # "ball" | "exterior" | "annulus"
    r_min: float
    r_max: float  # inf for exterior

    def contains(self, r: np.ndarray, margin: float = 0.0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (r >= self.r_min + margin) & (r <= self.r_max - margin)

    def require(self, r: np.ndarray, margin: float = 0.0, what: str = "point") -> None:
        ok = self.contains(r, margin)
        if not np.all(ok):
            bad = np.asarray(r)[~np.asarray(ok, dtype=bool)]
            raise GeometryError(
                f"{what} at r={float(np.atleast_1d(bad)[0]):.6g} outside chart "
                f"[{self.r_min:.6g}, {self.r_max:.6g}] (margin {margin:.3g})"
            )


@dataclass(frozen=True)
class RadialProfile:
    """Scale functions of a spherically symmetric datum.

    g = A(r)^2 dr^2 + (r B(r))^2 dOmega^2 written on the Cartesian chart as
    B^2 (delta - P) + A^2 P with P the radial projector, and k diagonal in
    the adapted frame with normal eigenvalue kappa_n and tangential
    eigenvalue kappa_t.
    """

    A: Callable[[np.ndarray], np.ndarray]
    B: Callable[[np.ndarray], np.ndarray]
    dA: Callable[[np.ndarray], np.ndarray]
    dB: Callable[[np.ndarray], np.ndarray]
    kappa_n: Callable[[np.ndarray], np.ndarray]
    kappa_t: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialData:
    """Metric/extrinsic-curvature fields with derivative access on a chart."""

    n: int
    chart: Chart
    g: Callable[[np.ndarray], np.ndarray]
    k: Callable[[np.ndarray], np.ndarray]
    dg: Callable[[np.ndarray], np.ndarray]
    dk: Callable[[np.ndarray], np.ndarray]
    kind: str  # "compact-interior" | "asymptotically-flat-exterior"
    q: float | None = None
    label: str = ""
    profile: RadialProfile | None = None

    def metric(self, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, self.n)
        out = self.g(pts)
        return out[0] if single else out

    def curvature(self, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, self.n)
        out = self.k(pts)
        return out[0] if single else out

    def metric_deriv(self, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, self.n)
        out = self.dg(pts)
        return out[0] if single else out

    def curvature_deriv(self, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, self.n)
        out = self.dk(pts)
        return out[0] if single else out


@dataclass(frozen=True)
class CreaseAngle:
    """Hyperbolic angle function on the crease sphere.

    `value` maps unit vectors (m, 3) to angles; `surface_gradient`, when
    available, is the analytic unit-sphere gradient in Cartesian components
    (divide by the coordinate radius for the covector on a sphere of radius
    r0).  Without it, consumers differentiate a spherical-harmonic fit.
    """

    value: Callable[[np.ndarray], np.ndarray]
    surface_gradient: Callable[[np.ndarray], np.ndarray] | None = None
    is_constant: bool = False
    constant: float = 0.0
    description: str = ""

    @staticmethod
    def from_constant(c: float) -> "CreaseAngle":
        c = float(c)
        return CreaseAngle(
            value=lambda omega: np.full(np.shape(omega)[0], c),
            surface_gradient=lambda omega: np.zeros_like(np.asarray(omega, dtype=float)),
            is_constant=True,
            constant=c,
            description=f"constant {c:g}",
        )

    @staticmethod
    def cos_theta(amplitude: float) -> "CreaseAngle":
        amp = float(amplitude)

        def value(omega):
            return amp * np.asarray(omega, dtype=float)[:, 2]

        def grad(omega):
            om = np.asarray(omega, dtype=float)
            # gradient of the degree-0 extension amp * x3/|x| on the unit sphere
            out = -om * om[:, 2:3]
            out[:, 2] += 1.0
            return amp * out

        return CreaseAngle(value=value, surface_gradient=grad, description=f"{amp:g}*cos(theta)")


@dataclass(frozen=True)
class CreasedData:
    """Two initial data sets glued across the coordinate sphere r = r0."""

    minus: InitialData
    plus: InitialData
    r0: float
    angle: CreaseAngle
    label: str = ""

    def with_angle(self, angle: CreaseAngle, label: str | None = None) -> "CreasedData":
        return replace(self, angle=angle, label=self.label if label is None else label)


# ---------------------------------------------------------------------------
# metric algebra


def inverse_metric(g: np.ndarray) -> np.ndarray:
    return np.linalg.inv(g)


def christoffel(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma[..., k, i, j] = 1/2 g^{kl} (dg_jl,i + dg_il,j - dg_ij,l)."""
    ginv = inverse_metric(g)
    term = np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)


def second_metric_derivative(data: InitialData, x: np.ndarray, step=None) -> np.ndarray:
    """d2g[..., i, j, l, m] = d_m d_l g_ij by central differences on dg."""
    pts, single = as_points(x, data.n)
    n = data.n
    if step is None:
        scale = np.maximum(1.0, np.linalg.norm(pts, axis=1))
        h = FD_STEP_SCALE * scale
    else:
        h = np.broadcast_to(np.asarray(step, dtype=float), pts.shape[:1]).copy()
    out = np.empty(pts.shape[:1] + (n, n, n, n))
    for m in range(n):
        dx = np.zeros_like(pts)
        dx[:, m] = h
        out[..., m] = (data.dg(pts + dx) - data.dg(pts - dx)) / (2.0 * h)[:, None, None, None]
    return out[0] if single else out


def scalar_curvature(data: InitialData, x: np.ndarray, step=None) -> np.ndarray:
    pts, single = as_points(x, data.n)
    g = data.g(pts)
    dg = data.dg(pts)
    d2g = second_metric_derivative(data, pts, step=step)
    ginv = inverse_metric(g)
    gamma = christoffel(g, dg)

    dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv)
    term = (
        np.einsum("...jlim->...lijm", d2g)
        + np.einsum("...iljm->...lijm", d2g)
        - np.einsum("...ijlm->...lijm", d2g)
    )
    dgamma = 0.5 * (
        np.einsum("...klm,...lij->...kijm", dginv, np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg))
        + np.einsum("...kl,...lijm->...kijm", ginv, term)
    )
    ric = (
        np.einsum("...kijk->...ij", dgamma)
        - np.einsum("...kkji->...ij", dgamma)
        + np.einsum("...kkm,...mij->...ij", gamma, gamma)
        - np.einsum("...kim,...mkj->...ij", gamma, gamma)
    )
    r = np.einsum("...ij,...ij->...", ginv, ric)
    return r[0] if single else r


@dataclass(frozen=True)
class ConstraintValues:
    mu: np.ndarray
    J: np.ndarray  # coordinate covector components, shape (..., n)
    error_estimate: np.ndarray

    def momentum_norm(self, data: InitialData, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, data.n)
        ginv = inverse_metric(data.g(pts))
        J = self.J if self.J.ndim == 2 else self.J[None, :]
        val = np.sqrt(np.einsum("...ij,...i,...j->...", ginv, J, J))
        return val[0] if single else val


def constraint_fields(data: InitialData, x: np.ndarray) -> ConstraintValues:
    """Energy and momentum densities of the constraint equations.

    mu = (R + (tr k)^2 - |k|^2)/2 and J = div(k - (tr k) g).  The momentum
    density is fully analytic given dg and dk; the scalar curvature needs
    one central-difference level on dg, and the returned error estimate is
    a Richardson difference of that step.
    """
    pts, single = as_points(x, data.n)
    r = np.linalg.norm(pts, axis=1)
    scale = np.maximum(1.0, r)
    h = FD_STEP_SCALE * scale
    data.chart.require(r - 2.0 * h, what="constraint stencil")
    if np.isfinite(data.chart.r_max):
        data.chart.require(r + 2.0 * h, what="constraint stencil")

    g = data.g(pts)
    dg = data.dg(pts)
    k = data.k(pts)
    dk = data.dk(pts)
    ginv = inverse_metric(g)
    gamma = christoffel(g, dg)

    trk = np.einsum("...ij,...ij->...", ginv, k)
    ksq = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, k, k)

    r_scal = scalar_curvature(data, pts)
    # Richardson step-doubling estimate of the finite-difference error in R.
    r_coarse = scalar_curvature(data, pts, step=2.0 * h)
    err = np.abs(r_scal - r_coarse) / 3.0 + 1e-14

    mu = 0.5 * (r_scal + trk**2 - ksq)

    # J_i = g^{jl} (d_l pi_ji - Gamma^m_{lj} pi_mi - Gamma^m_{li} pi_jm)
    pi = k - trk[..., None, None] * g
    dtrk = -np.einsum("...am,...mpl,...pb,...ab->...l", ginv, dg, ginv, k) + np.einsum(
        "...ab,...abl->...l", ginv, dk
    )
    dpi = dk - dtrk[..., None, None, :] * g[..., :, :, None] - trk[..., None, None, None] * dg
    J = np.einsum("...jl,...jil->...i", ginv, dpi)
    J -= np.einsum("...jl,...mlj,...mi->...i", ginv, gamma, pi)
    J -= np.einsum("...jl,...mli,...jm->...i", ginv, gamma, pi)

    if single:
        return ConstraintValues(mu=mu[0], J=J[0], error_estimate=err[0])
    return ConstraintValues(mu=mu, J=J, error_estimate=err)


# ---------------------------------------------------------------------------
# deterministic orthonormal frames


def bulk_frame(data: InitialData, x: np.ndarray) -> np.ndarray:
    """Gram-Schmidt frame on the coordinate basis; rows are e_1 .. e_n."""
    pts, single = as_points(x, data.n)
    g = data.g(pts)
    n = data.n
    frame = np.zeros(pts.shape[:1] + (n, n))
    for i in range(n):
        v = np.zeros(pts.shape[:1] + (n,))
        v[:, i] = 1.0
        for j in range(i):
            proj = np.einsum("...a,...ab,...b->...", frame[:, j], g, v)
            v = v - proj[:, None] * frame[:, j]
        nrm = np.sqrt(np.einsum("...a,...ab,...b->...", v, g, v))
        frame[:, i] = v / nrm[:, None]
    return frame[0] if single else frame


@dataclass(frozen=True)
class SphereFrame:
    """Adapted orthonormal frame on a coordinate sphere.

    Rows of `frame` are (t_1, ..., t_{n-1}, nu_out); the tangential block is
    shared between data sets inducing the same boundary metric, and the
    whole frame is positively oriented.
    """

    frame: np.ndarray  # (m, n, n)

    @property
    def tangent(self) -> np.ndarray:
        return self.frame[:, :-1, :]

    @property
    def normal_out(self) -> np.ndarray:
        return self.frame[:, -1, :]


def outward_unit_normal(data: InitialData, x: np.ndarray) -> np.ndarray:
    """g-unit normal of the coordinate sphere through x, pointing outward."""
    pts, single = as_points(x, data.n)
    r = np.linalg.norm(pts, axis=1)
    omega = pts / r[:, None]
    ginv = inverse_metric(data.g(pts))
    u = np.einsum("...ij,...j->...i", ginv, omega)
    s = np.einsum("...i,...i->...", omega, u)
    nu = u / np.sqrt(s)[:, None]
    return nu[0] if single else nu


def sphere_frame(data: InitialData, x: np.ndarray, skip_tol: float = 1e-8) -> SphereFrame:
    """Adapted frame at points of a coordinate sphere (vectorized).

    Tangential candidates are the Euclidean projections of the coordinate
    basis in fixed order, orthonormalized in the induced metric; candidates
    whose residual drops below `skip_tol` (relative) are skipped, which
    happens only on measure-zero degeneracy sets avoided by the grids.
    """
    pts, single = as_points(x, data.n)
    n = data.n
    m = pts.shape[0]
    r = np.linalg.norm(pts, axis=1)
    omega = pts / r[:, None]
    g = data.g(pts)

    accepted = np.zeros((m, n - 1, n))
    count = np.zeros(m, dtype=int)
    for i in range(n):
        cand = -omega * omega[:, i:i+1]
        cand[:, i] += 1.0
        ref = np.sqrt(np.einsum("...a,...ab,...b->...", cand, g, cand))
        for j in range(n - 1):
            sel = count > j  # points whose slot j is already filled
            proj = np.einsum("...a,...ab,...b->...", accepted[:, j], g, cand)
            cand = cand - np.where(sel, proj, 0.0)[:, None] * accepted[:, j]
        nrm = np.sqrt(np.einsum("...a,...ab,...b->...", cand, g, cand))
        ok = (nrm > skip_tol * np.maximum(ref, 1e-300)) & (count < n - 1)
        idx = np.nonzero(ok)[0]
        accepted[idx, count[idx]] = cand[idx] / nrm[idx, None]
        count[idx] += 1
    if np.any(count < n - 1):
        raise GeometryError("tangential frame construction degenerated at a node")

    nu = outward_unit_normal(data, pts)
    frame = np.concatenate([accepted, nu[:, None, :]], axis=1)
    # enforce positive orientation by flipping the last tangential vector
    neg = np.linalg.det(frame) < 0.0
    frame[neg, n - 2, :] *= -1.0
    return SphereFrame(frame=frame)


# ---------------------------------------------------------------------------
# induced hypersurface geometry


@dataclass(frozen=True)
class HypersurfaceGeometry:
    """Induced boundary data of a coordinate sphere at selected nodes."""

    x: np.ndarray
    nu: np.ndarray  # chosen unit normal (orientation applied)
    tangent: np.ndarray  # (m, n-1, n) shared tangential frame
    H: np.ndarray
    trk: np.ndarray  # trace of k over the tangential frame
    beta: np.ndarray  # (m, n-1), beta_alpha = k(nu, t_alpha)
    area_element: np.ndarray  # dA = area_element * dOmega
    orientation: str

    @property
    def induced_radius(self) -> np.ndarray:
        # valid for round induced metrics (every catalog crease)
        n = self.x.shape[-1]
        return self.area_element ** (1.0 / (n - 1))


def _normal_derivative(data: InitialData, pts: np.ndarray) -> np.ndarray:
    """dN[..., j, i] = d_i N^j for the outward unit normal field N."""
    r = np.linalg.norm(pts, axis=1)
    omega = pts / r[:, None]
    g = data.g(pts)
    dg = data.dg(pts)
    ginv = inverse_metric(g)
    u = np.einsum("...jl,...l->...j", ginv, omega)
    s = np.einsum("...l,...l->...", omega, u)
    domega = (np.eye(data.n)[None] - omega[:, :, None] * omega[:, None, :]) / r[:, None, None]
    dginv = -np.einsum("...ja,...abi,...bl->...jli", ginv, dg, ginv)
    du = np.einsum("...jli,...l->...ji", dginv, omega) + np.einsum("...jl,...li->...ji", ginv, domega)
    ds = np.einsum("...jli,...j,...l->...i", dginv, omega, omega) + 2.0 * np.einsum(
        "...l,...li->...i", u, domega
    )
    return du / np.sqrt(s)[:, None, None] - 0.5 * u[:, :, None] * (ds / s[:, None] ** 1.5)[:, None, :]


def hypersurface_geometry(
    data: InitialData,
    r0: float,
    omega: np.ndarray,
    orientation: str = "outward",
) -> HypersurfaceGeometry:
    """Bartnik-type boundary quantities of the sphere r = r0 at unit vectors omega."""
    om, single = as_points(omega, data.n)
    om = om / np.linalg.norm(om, axis=1)[:, None]
    pts = r0 * om
    data.chart.require(np.full(om.shape[0], r0), what="sphere")
    if orientation not in ("outward", "inward"):
        raise GeometryError(f"orientation must be outward or inward, got {orientation!r}")
    sign = 1.0 if orientation == "outward" else -1.0

    g = data.g(pts)
    k = data.k(pts)
    gamma = christoffel(g, data.dg(pts))
    sf = sphere_frame(data, pts)
    t = sf.tangent
    nu = sign * sf.normal_out

    dn = sign * _normal_derivative(data, pts)
    cov = dn + np.einsum("...jil,...l->...ji", gamma, nu)  # nabla_i nu^j
    # H = sum_alpha g(nabla_{t_alpha} nu, t_alpha)
    Hval = np.einsum("...ai,...ji,...jl,...al->...", t, cov, g, t)

    trk = np.einsum("...ai,...aj,...ij->...", t, t, k)
    beta = np.einsum("...i,...ij,...aj->...a", nu, k, t)

    # positive-definiteness and degeneracy guards
    eig_ok = np.all(np.linalg.eigvalsh(g) > 0.0)
    if not eig_ok:
        raise GeometryError("metric not positive definite on the sphere")

    theta = np.arccos(np.clip(om[:, 2], -1.0, 1.0))
    phi = np.arctan2(om[:, 1], om[:, 0])
    d_theta, d_phi = theta_phi_tangents(theta, phi)
    xt = r0 * d_theta
    xp = r0 * d_phi
    g_tt = np.einsum("...i,...ij,...j->...", xt, g, xt)
    g_tp = np.einsum("...i,...ij,...j->...", xt, g, xp)
    g_pp = np.einsum("...i,...ij,...j->...", xp, g, xp)
    det = g_tt * g_pp - g_tp**2
    if np.any(det <= 0.0):
        raise GeometryError("degenerate induced metric on the sphere")
    area_element = np.sqrt(det) / np.sin(theta)

    out = HypersurfaceGeometry(
        x=pts,
        nu=nu,
        tangent=t,
        H=Hval,
        trk=trk,
        beta=beta,
        area_element=area_element,
        orientation=orientation,
    )
    if single:
        return HypersurfaceGeometry(
            x=pts[0], nu=nu[0], tangent=t[0], H=Hval[0], trk=trk[0], beta=beta[0],
            area_element=area_element[0], orientation=orientation,
        )
    return out


# ---------------------------------------------------------------------------
# asymptotic decay fit


@dataclass(frozen=True)
class DecayFit:
    q_est: float
    c_est: float
    exact_flat: bool
    residual: float
    radii: tuple[float, ...]
    max_deviation: tuple[float, ...]


def fit_decay(data: InitialData, radii, order: int = 12) -> DecayFit:
    """Least-squares log-log fit of max |g - delta| against the radius."""
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise GeometryError("fit_decay needs at least 3 radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise GeometryError("radii must be strictly increasing")
    if data.kind != "asymptotically-flat-exterior":
        raise GeometryError("fit_decay applies to exterior data")
    grid = sphere_grid(order)
    devs = []
    eye = np.eye(data.n)
    for r in radii:
        g = data.g(r * grid.nodes)
        devs.append(float(np.max(np.abs(g - eye))))
    if max(devs) == 0.0:
        return DecayFit(q_est=math.inf, c_est=0.0, exact_flat=True, residual=0.0,
                        radii=tuple(radii), max_deviation=tuple(devs))
    lr = np.log(np.asarray(radii))
    ld = np.log(np.asarray(devs))
    coeffs, res = np.polyfit(lr, ld, 1, full=True)[:2]
    resid = float(res[0]) if len(res) else 0.0
    return DecayFit(
        q_est=float(-coeffs[0]),
        c_est=float(math.exp(coeffs[1])),
        exact_flat=False,
        residual=resid,
        radii=tuple(radii),
        max_deviation=tuple(devs),
    )


def verify_crease_match(cd: CreasedData, order: int = 12) -> float:
    """Max mismatch of the two induced sphere metrics at quadrature nodes."""
    grid = sphere_grid(order)
    pts = cd.r0 * grid.nodes
    theta, phi = grid.theta, grid.phi
    d_theta, d_phi = theta_phi_tangents(theta, phi)
    mism = 0.0
    gm = cd.minus.g(pts)
    gp = cd.plus.g(pts)
    for a in (d_theta, d_phi):
        for b in (d_theta, d_phi):
            va = np.einsum("...i,...ij,...j->...", cd.r0 * a, gm - gp, cd.r0 * b)
            mism = max(mism, float(np.max(np.abs(va))))
    return mism
