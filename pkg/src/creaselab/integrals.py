"""Surface and volume quadrature for mass integrals and spinor identities.

Implements the ADM energy-momentum integrals over coordinate spheres (flat
area element and Euclidean normal, the standard convention), the spinor
boundary integrand shared by the Witten flux and the integrated
Lichnerowicz-Schrodinger-Weitzenbock identity, the Sen connection and
Dirac-Witten operator in the deterministic bulk frame, and the crease
boundary-term identity with its Cauchy-Schwarz bound.

Boundary quantities are computed in the adapted sphere frame (shared
tangential vectors, normal last), where the interface identification of
the two sides' spinors is the identity matrix.  The generic outward-
convention integrand

    <psi, D psi - H/2 psi - 1/2[(tr k) nu - k(nu, t_a) t^a] tau psi>

covers every use: the minus-side crease term takes nu = outward, the
plus-side crease term takes nu = inward, and large coordinate spheres
take nu = outward.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable, Sequence

import numpy as np

from .bartnik import bartnik_from_data, beta_delta, rotated_components
from .cliffords import CliffordRep
from .geometry import (
    CreasedData,
    GeometryError,
    InitialData,
    bulk_frame,
    christoffel,
    constraint_fields,
    hypersurface_geometry,
    inverse_metric,
    sphere_frame,
    unit_sphere_volume,
)
from .spheregrid import SphereGrid, sphere_grid, unit_vectors
from .spinorfields import SpinorField, anchored_spin_lift, rotation_between_frames


class IntegralsError(GeometryError):
    pass


class TransmissionPreconditionError(IntegralsError):
    def __init__(self, defect: float, tol: float):
        super().__init__(
            f"spinor traces violate the transmission condition: max defect {defect:.3e} > {tol:.1e}"
        )
        self.defect = defect
        self.tol = tol


IMAG_TOL = 1e-9


def real_checked(value: complex, scale: float = 1.0, label: str = "integral") -> float:
    """Return the real part, asserting the imaginary part is quadrature noise."""
    value = complex(value)
    bound = IMAG_TOL * (abs(value.real) + abs(scale))
    if abs(value.imag) > bound:
        raise IntegralsError(f"{label} has non-negligible imaginary part {value.imag:.3e}")
    return value.real


# ---------------------------------------------------------------------------
# plain sphere quadrature


def sphere_integral(field: Callable[[np.ndarray], np.ndarray], r: float, order: int, n: int = 3):
    """Integral over the coordinate sphere |x| = r with the flat area element."""
    if n != 3:
        raise IntegralsError("sphere quadrature is implemented for n = 3")
    if order < 4:
        raise IntegralsError("quadrature order must be >= 4")
    grid = sphere_grid(order)
    vals = np.asarray(field(r * grid.nodes))
    if not np.all(np.isfinite(vals)):
        raise IntegralsError("non-finite field value in sphere_integral")
    return r ** (n - 1) * grid.integrate(vals)


# ---------------------------------------------------------------------------
# volume quadrature over radial regions


def radial_panels(region: Sequence, crease_at: float | None = None):
    kind = region[0]
    if kind == "ball":
        lo, hi = 0.0, float(region[1])
    elif kind == "annulus":
        lo, hi = float(region[1]), float(region[2])
    else:
        raise IntegralsError(f"unknown region kind {kind!r}")
    if not hi > lo >= 0.0:
        raise IntegralsError("region radii must satisfy 0 <= lo < hi")
    if crease_at is not None and lo < crease_at < hi:
        return [(lo, crease_at), (crease_at, hi)]
    return [(lo, hi)]


def volume_quadrature(region: Sequence, r_order: int, sph_order: int, crease_at: float | None = None):
    """Flat-measure nodes and weights: sum w f = int f r^2 dr dOmega."""
    grid = sphere_grid(sph_order)
    x_gl, w_gl = np.polynomial.legendre.leggauss(r_order)
    pts_list, w_list = [], []
    for lo, hi in radial_panels(region, crease_at):
        rr = 0.5 * (hi - lo) * x_gl + 0.5 * (hi + lo)
        wr = 0.5 * (hi - lo) * w_gl * rr**2
        pts = rr[:, None, None] * grid.nodes[None, :, :]
        w = wr[:, None] * grid.weights[None, :]
        pts_list.append(pts.reshape(-1, 3))
        w_list.append(w.reshape(-1))
    return np.concatenate(pts_list), np.concatenate(w_list)


# ---------------------------------------------------------------------------
# ADM energy-momentum


@dataclass(frozen=True)
class MassReport:
    E: float
    P: np.ndarray
    m: float
    radii: tuple[float, ...]
    E_by_radius: tuple[float, ...]
    P_by_radius: np.ndarray  # (nradii, 3)
    decay_exponent: float | None
    extrapolation_residual: float
    monotone: bool
    warning: str = ""

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "P": self.P.tolist(),
            "m": self.m,
            "radii": list(self.radii),
            "E_by_radius": list(self.E_by_radius),
            "P_by_radius": self.P_by_radius.tolist(),
            "decay_exponent": self.decay_exponent,
            "extrapolation_residual": self.extrapolation_residual,
            "monotone": self.monotone,
            "warning": self.warning,
        }


def _extrapolate_sequence(radii: np.ndarray, vals: np.ndarray, fallback_p: float | None):
    """Limit of vals = V + c r^-p from the last three entries."""
    if len(vals) < 3:
        return float(vals[-1]), None, 0.0
    r1, r2, r3 = radii[-3:]
    v1, v2, v3 = vals[-3:]
    d1, d2 = v1 - v2, v2 - v3
    scale = max(abs(v1), abs(v2), abs(v3), 1e-30)
    if abs(d2) < 1e-13 * scale or d1 * d2 <= 0.0:
        return float(v3), None, float(abs(d2))

    def ratio_of(p):
        return (r1**-p - r2**-p) / (r2**-p - r3**-p)

    target = d1 / d2
    p_lo, p_hi = 0.05, 8.0
    f_lo, f_hi = ratio_of(p_lo) - target, ratio_of(p_hi) - target
    if f_lo * f_hi < 0.0:
        from scipy.optimize import brentq

        p = float(brentq(lambda q: ratio_of(q) - target, p_lo, p_hi))
    elif fallback_p is not None and np.isfinite(fallback_p):
        p = float(fallback_p)
    else:
        return float(v3), None, float(abs(d2))
    c = d2 / (r2**-p - r3**-p)
    limit = v3 - c * r3**-p
    return float(limit), p, float(abs(c * r3**-p))


def adm_energy_momentum(data: InitialData, radii: Sequence[float], order: int = 24) -> MassReport:
    """ADM energy and linear momentum from coordinate-sphere flux integrals.

    E picks up the (d_i g_ij - d_j g_ii) nu^j integrand with normalization
    1/(2 (n-1) omega_{n-1}); P_i the (k_ij - (tr k) g_ij) nu^j integrand
    with 1/((n-1) omega_{n-1}); both against the Euclidean area element and
    outward coordinate normal, then extrapolated in the radius.
    """
    radii = np.asarray([float(r) for r in radii])
    if len(radii) < 1 or np.any(np.diff(radii) <= 0.0):
        raise IntegralsError("radii must be strictly increasing")
    data.chart.require(radii, what="ADM sphere")
    n = data.n
    grid = sphere_grid(order)
    norm_e = 1.0 / (2.0 * (n - 1) * unit_sphere_volume(n))
    norm_p = 1.0 / ((n - 1) * unit_sphere_volume(n))

    e_vals, p_vals = [], []
    for r in radii:
        pts = r * grid.nodes
        dg = data.dg(pts)
        g = data.g(pts)
        k = data.k(pts)
        ginv = inverse_metric(g)
        trk = np.einsum("mij,mij->m", ginv, k)
        t1 = np.einsum("miji->mj", dg)
        t2 = np.einsum("miij->mj", dg)
        e_int = np.einsum("mj,mj->m", t1 - t2, grid.nodes)
        p_int = np.einsum("mij,mj->mi", k - trk[:, None, None] * g, grid.nodes)
        e_vals.append(r ** (n - 1) * grid.integrate(e_int) * norm_e)
        p_vals.append(r ** (n - 1) * np.einsum("m,mi->i", grid.weights, p_int) * norm_p)
    e_vals = np.asarray(e_vals)
    p_vals = np.asarray(p_vals)

    E, p_exp, resid = _extrapolate_sequence(radii, e_vals, data.q)
    P = np.empty(n)
    for i in range(n):
        P[i], _, _ = _extrapolate_sequence(radii, p_vals[:, i], data.q)

    diffs = np.abs(np.diff(e_vals))
    monotone = bool(np.all(np.diff(diffs) <= 1e-12 + 0.0)) if len(diffs) >= 2 else True
    warning = "" if monotone else "per-radius energies do not converge monotonically"
    m = math.sqrt(max(E**2 - float(P @ P), 0.0))
    return MassReport(
        E=float(E), P=P, m=m, radii=tuple(radii), E_by_radius=tuple(e_vals),
        P_by_radius=p_vals, decay_exponent=p_exp, extrapolation_residual=resid,
        monotone=monotone, warning=warning,
    )


# ---------------------------------------------------------------------------
# spin coefficients and the Dirac-Witten operator in the bulk frame


def bulk_spin_coefficients(data: InitialData, x: np.ndarray, step: float | None = None) -> np.ndarray:
    """W[m, a, j, l] = g(nabla_{e_a} e_j, e_l) for the deterministic bulk frame."""
    pts, single = np.atleast_2d(np.asarray(x, dtype=float)), np.asarray(x).ndim == 1
    n = data.n
    if step is None:
        h = float(np.finfo(float).eps) ** (1.0 / 3.0)
    else:
        h = float(step)
    frame = bulk_frame(data, pts)
    g = data.g(pts)
    gamma = christoffel(g, data.dg(pts))
    dframe = np.empty(pts.shape[:1] + (n, n, n))
    for i in range(n):
        dx = np.zeros_like(pts)
        dx[:, i] = h
        dframe[..., i] = (bulk_frame(data, pts + dx) - bulk_frame(data, pts - dx)) / (2.0 * h)
    cov = dframe + np.einsum("mpiq,mjq->mjpi", gamma, frame)
    W = np.einsum("mai,mjpi,mpq,mlq->majl", frame, cov, g, frame)
    return W[0] if single else W


def _pair_products(rep: CliffordRep):
    gg = np.einsum("jIK,lKL->jlIL", rep.gamma, rep.gamma)
    gt = np.einsum("jIK,KL->jIL", rep.gamma, rep.tau)
    return gg, gt


def sen_derivatives(data: InitialData, rep: CliffordRep, field: SpinorField, x: np.ndarray) -> np.ndarray:
    """Spacetime-connection derivatives in all frame directions; (m, I, n).

    nabla-bar_a psi = e_a(c) + 1/4 W_{jl}(e_a) Gamma^j Gamma^l c
                      + 1/2 k(e_a, e_j) Gamma^j tau c.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    frame = bulk_frame(data, pts)
    c = field.evaluate(pts)
    dc = field.frame_derivatives(data, pts, frame=frame)
    W = bulk_spin_coefficients(data, pts)
    kf = np.einsum("mai,mij,mbj->mab", frame, data.k(pts), frame)
    gg, gt = _pair_products(rep)
    spin = 0.25 * np.einsum("majl,jlIK,mK->mIa", W, gg, c)
    kterm = 0.5 * np.einsum("maj,jIK,mK->mIa", kf, gt, c)
    out = dc + spin + kterm
    return out[0] if single else out


def sen_derivative(data: InitialData, rep: CliffordRep, field: SpinorField, x: np.ndarray, direction: int) -> np.ndarray:
    """Single frame direction (1-based) of the spacetime connection."""
    if not 1 <= direction <= data.n:
        raise IntegralsError(f"frame direction {direction} outside 1..{data.n}")
    return sen_derivatives(data, rep, field, x)[..., direction - 1]


def dirac_witten_apply(data: InitialData, rep: CliffordRep, field: SpinorField, x: np.ndarray) -> np.ndarray:
    """Frame-contracted spacetime connection, e^a nabla-bar_a psi."""
    sen = sen_derivatives(data, rep, field, x)
    return np.einsum("aIK,...Ka->...I", rep.gamma, sen)


# ---------------------------------------------------------------------------
# boundary integrand on coordinate spheres (adapted sphere gauge)


ANGLE_STEP = 3e-4  # tuned for the 4th-order angular stencil (truncation vs roundoff)


def _fd4(values: Sequence[np.ndarray], step) -> np.ndarray:
    """4th-order first derivative from values at (-2h, -h, +h, +2h)."""
    m2, m1, p1, p2 = values
    num = m2 - 8.0 * m1 + 8.0 * p1 - p2
    s = np.asarray(step, dtype=float)
    return num / (12.0 * s.reshape(s.shape + (1,) * (num.ndim - s.ndim)))


def sphere_gauge_closure(data: InitialData, rep: CliffordRep, field: SpinorField, r0: float, grid: SphereGrid):
    """Adapter: bulk-frame spinor components -> adapted sphere-frame components.

    The bulk-to-sphere rotation sweeps through every angle over the sphere,
    so the spin lift is anchored at the grid nodes; the returned closure
    accepts angle arrays congruent to the grid (the grid itself and small
    angular displacements of it).
    """

    def bulk_to_sphere_rotation(pts):
        g = data.g(pts)
        F_s = sphere_frame(data, pts).frame
        F_b = bulk_frame(data, pts)
        return rotation_between_frames(g, frame_from=F_s, frame_to=F_b)

    O_anchor = bulk_to_sphere_rotation(r0 * grid.nodes)

    def psi(theta, phi):
        theta = np.asarray(theta)
        if theta.shape[0] != grid.size:
            raise IntegralsError("sphere-gauge closure evaluated off its anchor grid")
        pts = r0 * unit_vectors(theta, np.asarray(phi))
        sigma = anchored_spin_lift(rep, O_anchor, bulk_to_sphere_rotation(pts))
        c_b = field.evaluate(pts)
        return np.einsum("mji,mj->mi", np.conj(sigma), c_b)

    return psi


def boundary_term_density(
    data: InitialData,
    rep: CliffordRep,
    r0: float,
    grid: SphereGrid,
    psi_sphere: Callable[[np.ndarray, np.ndarray], np.ndarray],
    nu_sign: int = 1,
    step: float = ANGLE_STEP,
):
    """Per-node boundary integrand and induced-area weights on |x| = r0.

    psi_sphere(theta, phi) returns adapted sphere-frame components.  With
    nu = nu_sign * outward unit normal, the density is the outward-
    convention combination <psi, D psi - H/2 psi - 1/2[(tr k) nu -
    k(nu,t_a) t^a] tau psi>; H, k(nu,.) and the boundary Dirac operator
    all use the signed normal.
    """
    n = data.n
    if n != 3:
        raise IntegralsError("boundary quadrature is implemented for n = 3")
    theta, phi = grid.theta, grid.phi
    om = grid.nodes
    pts = r0 * om

    sf = sphere_frame(data, pts)
    t = sf.tangent  # (m, 2, 3)
    g = data.g(pts)
    gamma_chr = christoffel(g, data.dg(pts))
    hg = hypersurface_geometry(data, r0, om, orientation="outward")
    H = nu_sign * hg.H
    trk = hg.trk
    beta = nu_sign * hg.beta

    c0 = np.asarray(psi_sphere(theta, phi), dtype=complex)

    # tangential derivatives of the frame and of psi via 4th-order angle stencils
    def snap(th, ph):
        o = unit_vectors(th, ph)
        p = r0 * o
        return sphere_frame(data, p).tangent, np.asarray(psi_sphere(th, ph), dtype=complex)

    # phi variation slows like sin(theta) near the poles; widen the step there
    step_phi = step / np.maximum(np.sin(theta), 0.05)
    t_th, c_th = zip(*(snap(theta + d * step, phi) for d in (-2.0, -1.0, 1.0, 2.0)))
    t_ph, c_ph = zip(*(snap(theta, phi + d * step_phi) for d in (-2.0, -1.0, 1.0, 2.0)))
    dt_dtheta = _fd4(t_th, step)
    dt_dphi = _fd4(t_ph, step_phi)
    dc_dtheta = _fd4(c_th, step)
    dc_dphi = _fd4(c_ph, step_phi)

    # coordinates of t_alpha in the (theta, phi) parameter basis
    from .spheregrid import theta_phi_tangents

    e_th, e_ph_raw = theta_phi_tangents(theta, phi)
    sin2 = np.sin(theta) ** 2
    a_co = np.einsum("mai,mi->ma", t, e_th) / r0
    b_co = np.einsum("mai,mi->ma", t, e_ph_raw) / (r0 * sin2[:, None])

    # D_{t_alpha} of tangent-frame components and spinor components
    Dt = a_co[:, :, None, None] * dt_dtheta[:, None, :, :] + b_co[:, :, None, None] * dt_dphi[:, None, :, :]
    Dc = a_co[:, :, None] * dc_dtheta[:, None, :] + b_co[:, :, None] * dc_dphi[:, None, :]
    # Dt[m, alpha, beta, i]: derivative along t_alpha of component i of t_beta

    cov = Dt + np.einsum("mai,mpiq,mbq->mabp", t, gamma_chr, t)
    omega_sigma = np.einsum("mabp,mpq,mcq->mabc", cov, g, t)  # w_{bc}(t_a), tangential

    gg, gt = _pair_products(rep)
    spin = 0.25 * np.einsum("mabc,bcIK,mK->maI", omega_sigma, gg[: n - 1, : n - 1], c0)
    nabla_sigma = Dc + spin  # (m, alpha, I)

    # D psi = nu . e^alpha nabla^Sigma_alpha psi
    contracted = np.einsum("aIK,maK->mI", rep.gamma[: n - 1], nabla_sigma)
    dirac_b = nu_sign * np.einsum("IK,mK->mI", rep.gamma[n - 1], contracted)

    gt_n = rep.gamma[n - 1] @ rep.tau
    tau_part = nu_sign * trk[:, None] * np.einsum("IK,mK->mI", gt_n, c0) - np.einsum(
        "ma,aIK,mK->mI", beta, gt[: n - 1], c0
    )
    # The boundary Dirac term is symmetrized pointwise: its anti-Hermitian
    # part is an exact tangential divergence with vanishing surface
    # integral, so Re<psi, D psi> integrates to the same value while the
    # remaining (algebraic, Hermitian) terms keep the imaginary-part
    # sanity check meaningful.
    dirac_density = np.einsum("mI,mI->m", np.conj(c0), dirac_b).real
    algebraic_vec = -0.5 * H[:, None] * c0 - 0.5 * tau_part
    density = dirac_density + np.einsum("mI,mI->m", np.conj(c0), algebraic_vec)
    weights = hg.area_element * grid.weights
    return density, weights


def boundary_flux(data, rep, r0, order, psi_sphere, nu_sign=1):
    grid = sphere_grid(order)
    density, weights = boundary_term_density(data, rep, r0, grid, psi_sphere, nu_sign=nu_sign)
    return complex(np.sum(density * weights))


# ---------------------------------------------------------------------------
# Witten flux


@dataclass(frozen=True)
class WittenFlux:
    value: float
    imag_part: float
    radius: float
    order: int


def witten_flux(data: InitialData, rep: CliffordRep, psi_inf: np.ndarray, r: float, order: int = 24) -> WittenFlux:
    """Boundary spinor flux of an asymptotically constant spinor at radius r.

    In the limit of large r this converges to
    (n-1) omega_{n-1} / 2 * (E |psi_inf|^2 - <psi_inf, P_i e^i tau psi_inf>).
    """
    from .spinorfields import constant_spinor_field

    data.chart.require(np.asarray([r]), what="flux sphere")
    field = constant_spinor_field(rep, psi_inf)
    grid = sphere_grid(order)
    psi = sphere_gauge_closure(data, rep, field, r, grid)
    val = boundary_flux(data, rep, r, order, psi, nu_sign=1)
    scale = float(np.vdot(psi_inf, psi_inf).real)
    return WittenFlux(
        value=real_checked(val, scale=scale, label="witten flux"),
        imag_part=float(val.imag),
        radius=float(r),
        order=order,
    )


def flux_mass_pairing(rep: CliffordRep, E: float, P: np.ndarray, psi_inf: np.ndarray, n: int = 3) -> float:
    """(n-1) omega_{n-1}/2 (E |psi|^2 - <psi, P_i e^i tau psi>) for constant psi."""
    psi = np.asarray(psi_inf, dtype=complex)
    pmat = np.einsum("i,iIK->IK", np.asarray(P, dtype=float), rep.gamma) @ rep.tau
    val = E * np.vdot(psi, psi) - np.vdot(psi, pmat @ psi)
    return float((n - 1) * unit_sphere_volume(n) / 2.0 * real_checked(val, label="flux pairing"))


def flux_fit_energy_momentum(data: InitialData, rep: CliffordRep, r: float, order: int = 16):
    """Reconstruct (E, P) from Witten fluxes of a spinor basis by polarization.

    The flux of a constant spinor tends to C (E |psi|^2 - <psi, M psi>)
    with C = (n-1) omega_{n-1}/2 and M = P_i Gamma^i tau Hermitian and
    traceless; basis and pairwise fluxes determine E and M, and P_i is
    recovered by projecting M onto the Clifford directions.
    """
    n = data.n
    C = (n - 1) * unit_sphere_volume(n) / 2.0
    dim = rep.dim
    basis = np.eye(dim, dtype=complex)

    def F(psi):
        return witten_flux(data, rep, psi, r, order=order).value / C

    diag = np.array([F(basis[l]) for l in range(dim)])
    E_fit = float(np.mean(diag))
    M = np.zeros((dim, dim), dtype=complex)
    for l in range(dim):
        M[l, l] = E_fit - diag[l]
    for l in range(dim):
        for mdx in range(l + 1, dim):
            f_re = F(basis[l] + basis[mdx])
            f_im = F(basis[l] + 1j * basis[mdx])
            # F(u) = E|u|^2 - <u, M u>: the two pairings isolate Re and Im of M_lm
            re_lm = 0.5 * (diag[l] + diag[mdx] - f_re)
            im_lm = 0.5 * (diag[l] + diag[mdx] - f_im)
            M[l, mdx] = re_lm - 1j * im_lm
            M[mdx, l] = np.conj(M[l, mdx])
    P_fit = np.empty(n)
    for i in range(n):
        direction = rep.gamma[i] @ rep.tau
        P_fit[i] = float(np.real(np.trace(M @ direction.conj().T)) / dim)
    return E_fit, P_fit


# ---------------------------------------------------------------------------
# integrated Lichnerowicz-Schrodinger-Weitzenbock identity


@dataclass(frozen=True)
class LswResult:
    bulk: float
    boundary: float
    residual: float
    dirichlet: float
    dirac_sq: float
    matter: float


def lsw_residual(
    data: InitialData,
    rep: CliffordRep,
    field: SpinorField,
    region: Sequence,
    order: int = 16,
    r_order: int | None = None,
) -> LswResult:
    """Bulk minus boundary of the integrated Weitzenbock identity.

    bulk = int (|nabla-bar psi|^2 - |D_W psi|^2 + 1/2 <psi, (mu + J tau) psi>) dV
    boundary = outward-convention spinor flux over the region boundary.
    The residual vanishes for any smooth spinor; the achievable size is set
    by the finite-difference and quadrature budget.
    """
    if r_order is None:
        r_order = max(24, order)
    pts, w_flat = volume_quadrature(region, r_order, order)
    g = data.g(pts)
    dV = np.sqrt(np.linalg.det(g)) * w_flat

    sen = sen_derivatives(data, rep, field, pts)
    dw = np.einsum("aIK,mKa->mI", rep.gamma, sen)
    c = field.evaluate(pts)
    cons = constraint_fields(data, pts)
    frame = bulk_frame(data, pts)
    j_frame = np.einsum("mi,mai->ma", cons.J, frame)
    _, gt = _pair_products(rep)
    jtau = np.einsum("ma,aIK,mK->mI", j_frame, gt, c)

    dir_term = np.einsum("mIa,mIa->m", np.conj(sen), sen).real
    dw_term = np.einsum("mI,mI->m", np.conj(dw), dw).real
    matter = 0.5 * (cons.mu * np.einsum("mI,mI->m", np.conj(c), c).real
                    + np.einsum("mI,mI->m", np.conj(c), jtau).real)

    dirichlet = float(np.sum(dir_term * dV))
    dirac_sq = float(np.sum(dw_term * dV))
    matter_int = float(np.sum(matter * dV))
    bulk = dirichlet - dirac_sq + matter_int

    kind = region[0]
    r_hi = float(region[-1])
    grid = sphere_grid(order)
    psi_out = sphere_gauge_closure(data, rep, field, r_hi, grid)
    boundary = boundary_flux(data, rep, r_hi, order, psi_out, nu_sign=1)
    if kind == "annulus":
        r_lo = float(region[1])
        psi_in = sphere_gauge_closure(data, rep, field, r_lo, grid)
        boundary = boundary + boundary_flux(data, rep, r_lo, order, psi_in, nu_sign=-1)
    boundary_val = real_checked(boundary, scale=abs(bulk) + 1.0, label="LSW boundary")
    return LswResult(
        bulk=bulk,
        boundary=boundary_val,
        residual=bulk - boundary_val,
        dirichlet=dirichlet,
        dirac_sq=dirac_sq,
        matter=matter_int,
    )


# ---------------------------------------------------------------------------
# crease boundary terms


@dataclass(frozen=True)
class CreaseBoundaryResult:
    direct: float
    formula: float
    bound: float
    i_minus: float
    i_plus: float
    transmission_defect: float

    @property
    def mismatch(self) -> float:
        return abs(self.direct - self.formula)


def transmission_matrix_nodes(rep: CliffordRep, angle_values: np.ndarray) -> np.ndarray:
    """Nodal spinor rotation cosh(f/2) + sinh(f/2) eps_+ in the adapted gauge."""
    n = rep.n
    eps = rep.gamma[n - 1] @ rep.tau
    A = np.cosh(0.5 * angle_values)
    B = np.sinh(0.5 * angle_values)
    eye = np.eye(rep.dim, dtype=complex)
    return A[:, None, None] * eye + B[:, None, None] * eps


def crease_boundary_terms(
    cd: CreasedData,
    rep: CliffordRep,
    psi_plus: Callable[[np.ndarray, np.ndarray], np.ndarray],
    order: int = 16,
    psi_minus: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    defect_tol: float = 1e-10,
) -> CreaseBoundaryResult:
    """Crease boundary terms: direct one-sided integrals vs the jump formula.

    `psi_plus` (and `psi_minus`, defaulting to the transmission image of
    psi_plus) give adapted-frame components on the crease sphere.  The
    traces must satisfy the transmission condition; the contract is
    |direct - formula| small, direct <= bound, and bound <= 0 whenever the
    crease margin is nonnegative.
    """
    grid = sphere_grid(order)
    r0 = cd.r0

    def angle_at(th, ph):
        return np.asarray(cd.angle.value(unit_vectors(th, ph)), dtype=float)

    def psi_minus_default(th, ph):
        rot = transmission_matrix_nodes(rep, angle_at(th, ph))
        return np.einsum("mIK,mK->mI", rot, np.asarray(psi_plus(th, ph), dtype=complex))

    pm = psi_minus if psi_minus is not None else psi_minus_default

    c_plus = np.asarray(psi_plus(grid.theta, grid.phi), dtype=complex)
    c_minus = np.asarray(pm(grid.theta, grid.phi), dtype=complex)
    rot = transmission_matrix_nodes(rep, angle_at(grid.theta, grid.phi))
    defect = float(np.max(np.abs(c_minus - np.einsum("mIK,mK->mI", rot, c_plus))))
    if defect > defect_tol:
        raise TransmissionPreconditionError(defect, defect_tol)

    i_minus = boundary_flux(cd.minus, rep, r0, order, pm, nu_sign=1)
    i_plus = boundary_flux(cd.plus, rep, r0, order, psi_plus, nu_sign=-1)

    bm = bartnik_from_data(cd.minus, r0, order=order, side="minus")
    bp = bartnik_from_data(cd.plus, r0, order=order, side="plus")
    nu_rot, tau_rot = rotated_components(bm, cd.angle)
    bd = beta_delta(bm, bp, cd.angle)
    jump_nu = bp.H - nu_rot  # <H_+ - F(H_-), nu_+>
    jump_tau = bp.trk - tau_rot
    bd_norm = np.linalg.norm(bd, axis=-1)

    gt_n = rep.gamma[rep.n - 1] @ rep.tau
    _, gt = _pair_products(rep)
    psi_sq = np.einsum("mI,mI->m", np.conj(c_plus), c_plus).real
    vec = jump_tau[:, None] * np.einsum("IK,mK->mI", gt_n, c_plus) - np.einsum(
        "ma,aIK,mK->mI", bd, gt[: rep.n - 1], c_plus
    )
    formula_density = 0.5 * (psi_sq * jump_nu + np.einsum("mI,mI->m", np.conj(c_plus), vec))
    dA = bp.area_element * grid.weights
    formula = real_checked(np.sum(formula_density * dA), scale=1.0, label="crease formula")

    bound_density = 0.5 * psi_sq * (jump_nu + np.sqrt(jump_tau**2 + bd_norm**2))
    bound = float(np.sum(bound_density * dA))

    direct = real_checked(i_minus + i_plus, scale=abs(formula) + 1.0, label="crease direct term")
    return CreaseBoundaryResult(
        direct=direct,
        formula=formula,
        bound=bound,
        i_minus=real_checked(i_minus, scale=1.0, label="I_minus"),
        i_plus=real_checked(i_plus, scale=1.0, label="I_plus"),
        transmission_defect=defect,
    )
