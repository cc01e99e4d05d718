"""Bartnik boundary data, hyperbolic gauge algebra, and the DEC-crease margin.

Boundary data live on a Gauss-Legendre sphere grid.  The mean-curvature
vector has components (H, tr_gamma k) in the (nu, tau) frame of the normal
bundle; hyperbolic gauge rotations mix them as an SO+(1,1) action, and the
connection 1-form beta = k(nu, .) shifts by df.  Tangential covectors are
stored by their components in the shared orthonormal tangential frame, so
their induced-metric norms are plain Euclidean norms of components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CreaseAngle,
    CreasedData,
    GeometryError,
    InitialData,
    hypersurface_geometry,
)
from .spheregrid import SphereGrid, SphericalHarmonicFit, sphere_grid


class BartnikError(GeometryError):
    pass


@dataclass(frozen=True)
class BartnikData:
    """Induced boundary data sampled on a sphere grid."""

    grid: SphereGrid
    r0: float
    H: np.ndarray  # (N,)
    trk: np.ndarray  # (N,)
    beta: np.ndarray  # (N, n-1), frame components of k(nu, .)
    tangent: np.ndarray  # (N, n-1, n) shared tangential frame vectors
    area_element: np.ndarray  # (N,), dA = area_element dOmega
    side: str = ""

    @property
    def size(self) -> int:
        return self.H.shape[0]

    @property
    def induced_radius(self) -> np.ndarray:
        n = self.tangent.shape[-1]
        return self.area_element ** (1.0 / (n - 1))

    def causal_length_squared(self) -> np.ndarray:
        """H^2 - trk^2, invariant under hyperbolic rotations."""
        return self.H**2 - self.trk**2


def bartnik_from_data(
    data: InitialData, r0: float, order: int = 16, side: str = "", orientation: str = "outward"
) -> BartnikData:
    """Sample the induced Bartnik data of the sphere r = r0 on a quadrature grid."""
    grid = sphere_grid(order)
    hg = hypersurface_geometry(data, r0, grid.nodes, orientation=orientation)
    return BartnikData(
        grid=grid, r0=float(r0), H=hg.H, trk=hg.trk, beta=hg.beta,
        tangent=hg.tangent, area_element=hg.area_element, side=side,
    )


def _check_same_grid(a: BartnikData, b: BartnikData) -> None:
    if a.grid.size != b.grid.size or a.r0 != b.r0:
        raise BartnikError("Bartnik data live on different grids")
    if not np.allclose(a.grid.nodes, b.grid.nodes):
        raise BartnikError("Bartnik data live on different grids")


def _angle_values(angle, grid: SphereGrid) -> np.ndarray:
    if isinstance(angle, CreaseAngle):
        return np.asarray(angle.value(grid.nodes), dtype=float)
    arr = np.asarray(angle, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.size, float(arr))
    if arr.shape != (grid.size,):
        raise BartnikError("angle array does not match the grid")
    return arr


def angle_gradient_frame(
    angle, B: BartnikData, lmax: int | None = None
) -> np.ndarray:
    """Components df(t_alpha) of the angle differential on the crease sphere.

    Uses the analytic unit-sphere gradient when the angle provides one,
    otherwise exact differentiation of a truncated spherical-harmonic fit
    of the nodal values.  The homogeneous degree-0 extension of the angle
    gives the Cartesian covector (1/r0) * surface gradient.
    """
    grid = B.grid
    if isinstance(angle, CreaseAngle) and angle.surface_gradient is not None:
        grad = np.asarray(angle.surface_gradient(grid.nodes), dtype=float)
    else:
        values = _angle_values(angle, grid)
        if np.ptp(values) == 0.0:
            return np.zeros((grid.size, B.tangent.shape[1]))
        fit = SphericalHarmonicFit(grid, values, lmax=lmax)
        grad = fit.surface_gradient(grid.theta, grid.phi)
    cart = grad / B.r0
    return np.einsum("...i,...ai->...a", cart, B.tangent)


def rotated_components(B_minus: BartnikData, angle) -> tuple[np.ndarray, np.ndarray]:
    """Components of the rotated mean-curvature vector in the plus frame.

    nu-component = cosh(f) H + sinh(f) trk; tau-component = sinh(f) H +
    cosh(f) trk.  Hyperbolic rotations preserve H^2 - trk^2.
    """
    f = _angle_values(angle, B_minus.grid)
    if not np.all(np.isfinite(f)):
        raise BartnikError("hyperbolic angle must be finite at all nodes")
    ch, sh = np.cosh(f), np.sinh(f)
    return ch * B_minus.H + sh * B_minus.trk, sh * B_minus.H + ch * B_minus.trk


def rotate_bartnik(B: BartnikData, angle, side: str | None = None) -> BartnikData:
    """Equivalent Bartnik data after the gauge rotation by `angle` (beta -> beta + df)."""
    nu_c, tau_c = rotated_components(B, angle)
    df = angle_gradient_frame(angle, B)
    return BartnikData(
        grid=B.grid, r0=B.r0, H=nu_c, trk=tau_c, beta=B.beta + df,
        tangent=B.tangent, area_element=B.area_element,
        side=B.side if side is None else side,
    )


def beta_delta(B_minus: BartnikData, B_plus: BartnikData, angle) -> np.ndarray:
    """Connection difference beta_plus - beta_minus - df in frame components."""
    _check_same_grid(B_minus, B_plus)
    df = angle_gradient_frame(angle, B_minus)
    return B_plus.beta - B_minus.beta - df


@dataclass(frozen=True)
class CreaseReport:
    """Pointwise DEC-crease margin diagnostics on the crease sphere."""

    grid_order: int
    nodes: np.ndarray
    nu_component: np.ndarray  # <F(H_minus) - H_plus, nu_plus>
    tau_component: np.ndarray  # <F(H_minus) - H_plus, tau_plus>
    beta_delta_norm: np.ndarray
    margin: np.ndarray
    min_margin: float
    argmin_node: int
    dec_creased: bool
    tolerance: float
    area_element: np.ndarray

    def to_dict(self) -> dict:
        return {
            "grid_order": self.grid_order,
            "min_margin": self.min_margin,
            "argmin_node": self.argmin_node,
            "dec_creased": self.dec_creased,
            "tolerance": self.tolerance,
            "nu_component": self.nu_component.tolist(),
            "tau_component": self.tau_component.tolist(),
            "beta_delta_norm": self.beta_delta_norm.tolist(),
            "margin": self.margin.tolist(),
        }


def crease_margin(
    B_minus: BartnikData, B_plus: BartnikData, angle, tol: float = 1e-9
) -> CreaseReport:
    """DEC-crease margin: <F(H_-) - H_+, nu_+> - sqrt(<F(H_-) - H_+, tau_+>^2 + |beta^Delta|^2)."""
    _check_same_grid(B_minus, B_plus)
    nu_rot, tau_rot = rotated_components(B_minus, angle)
    nu_c = nu_rot - B_plus.H
    tau_c = tau_rot - B_plus.trk
    bd = beta_delta(B_minus, B_plus, angle)
    bd_norm = np.linalg.norm(bd, axis=-1)
    margin = nu_c - np.sqrt(tau_c**2 + bd_norm**2)
    imin = int(np.argmin(margin))
    return CreaseReport(
        grid_order=B_minus.grid.order,
        nodes=B_minus.grid.nodes,
        nu_component=nu_c,
        tau_component=tau_c,
        beta_delta_norm=bd_norm,
        margin=margin,
        min_margin=float(margin[imin]),
        argmin_node=imin,
        dec_creased=bool(margin[imin] >= -tol),
        tolerance=tol,
        area_element=B_minus.area_element,
    )


def crease_report_for(cd: CreasedData, order: int = 16, tol: float = 1e-9) -> CreaseReport:
    """Margin report of a creased datum, sampling both sides on one grid."""
    bm = bartnik_from_data(cd.minus, cd.r0, order=order, side="minus")
    bp = bartnik_from_data(cd.plus, cd.r0, order=order, side="plus")
    return crease_margin(bm, bp, cd.angle, tol=tol)


def spacelike_form_check(report: CreaseReport, tol: float = 1e-12) -> np.ndarray:
    """Equivalent form of the crease condition, checked node by node.

    The jump vector must be spacelike-or-null, point in the nu_+ direction,
    and have length at least |beta^Delta|.  The conjunction must agree with
    margin >= 0 wherever the margin is decisively nonzero; any disagreement
    beyond `tol` is an internal inconsistency.
    """
    nu, tau, bd = report.nu_component, report.tau_component, report.beta_delta_norm
    cond = (nu >= np.abs(tau)) & (nu**2 - tau**2 >= bd**2)
    margin_sign = report.margin >= 0.0
    decisive = np.abs(report.margin) > tol
    disagreement = decisive & (cond != margin_sign)
    if np.any(disagreement):
        idx = int(np.nonzero(disagreement)[0][0])
        raise BartnikError(
            "equivalent crease formulations disagree at node "
            f"{idx}: margin={report.margin[idx]:.3e}"
        )
    return cond


def equivalence_angle(
    B: BartnikData, B_prime: BartnikData, tol: float = 1e-8, null_tol: float = 1e-10
) -> np.ndarray | None:
    """Hyperbolic angle relating two Bartnik data sets, or None.

    Solves the rotation nodewise from the (nu, tau) component pair via
    atanh of the well-conditioned ratio; a mean-curvature vector that is
    null (to `null_tol`) anywhere makes the angle indeterminate.  Returns
    the nodal angle when both the rotation and beta' = beta + df hold
    within `tol`, otherwise None.
    """
    _check_same_grid(B, B_prime)
    H, trk = B.H, B.trk
    Hp, trkp = B_prime.H, B_prime.trk
    scale = np.maximum(H**2 + trk**2, 1e-300)
    causal = H**2 - trk**2
    if np.any(np.abs(causal) <= null_tol * scale):
        raise BartnikError("mean-curvature vector is null; hyperbolic angle indeterminate")
    # rotation invariant obstruction
    if np.max(np.abs(causal - (Hp**2 - trkp**2))) > tol * np.max(scale):
        return None
    ratio = (H * trkp - trk * Hp) / (H * Hp - trk * trkp)
    if np.any(np.abs(ratio) >= 1.0):
        return None
    f = np.arctanh(ratio)
    nu_c, tau_c = rotated_components(B, f)
    if max(np.max(np.abs(nu_c - Hp)), np.max(np.abs(tau_c - trkp))) > tol * (1.0 + np.max(np.abs(Hp))):
        return None
    df = angle_gradient_frame(f, B)
    if np.max(np.abs(B_prime.beta - B.beta - df)) > tol:
        return None
    return f
