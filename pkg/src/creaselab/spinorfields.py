"""Spinor-valued fields and spin-frame changes.

A spinor field is a closure for its component functions relative to the
deterministic bulk Gram-Schmidt frame, with an optional analytic Cartesian
gradient (central differences with a declared step otherwise).  Changing
between two orthonormal frames of the same metric lifts the relating
SO(3) rotation to the spinor representation; the lift is closed-form via
the axis-angle of the rotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cliffords import CliffordRep
from .geometry import GeometryError, InitialData, as_points, bulk_frame


class SpinGaugeError(GeometryError):
    pass


def rotation_between_frames(g: np.ndarray, frame_from: np.ndarray, frame_to: np.ndarray) -> np.ndarray:
    """SO(n) matrix O with (components in `frame_to`) = O (components in `frame_from`).

    Both arguments are batched orthonormal frames (rows are frame vectors)
    of the same metric g; O = F_to g F_from^T.
    """
    return np.einsum("...ai,...ij,...bj->...ab", frame_to, g, frame_from)


def _rotation_bivector(rep: CliffordRep, axis_scaled: np.ndarray) -> np.ndarray:
    """sum_k axis_k * (Gamma_i Gamma_j) over cyclic (i,j,k); batched over axis."""
    g = rep.gamma
    b23 = g[1] @ g[2]
    b31 = g[2] @ g[0]
    b12 = g[0] @ g[1]
    return (
        axis_scaled[..., 0, None, None] * b23
        + axis_scaled[..., 1, None, None] * b31
        + axis_scaled[..., 2, None, None] * b12
    )


def spin_lift(rep: CliffordRep, O: np.ndarray) -> np.ndarray:
    """Spinor rotation sigma with sigma Gamma_j sigma^{-1} = sum_i O_ij Gamma_i.

    Three-dimensional only, and smooth in O away from half turns; use
    `anchored_spin_lift` when rotations of arbitrary angle can occur.
    """
    if rep.n != 3:
        raise SpinGaugeError("spin_lift implemented for spatial dimension 3")
    O = np.asarray(O, dtype=float)
    c = np.clip((np.trace(O, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    if np.any(c < -0.9):
        raise SpinGaugeError("frame rotation too close to a half turn for a stable lift")
    skew = 0.5 * (O - np.swapaxes(O, -1, -2))
    v = np.stack([skew[..., 2, 1], skew[..., 0, 2], skew[..., 1, 0]], axis=-1)  # sin(theta) axis
    half_cos = np.sqrt((1.0 + c) / 2.0)
    axis_scaled = v / (2.0 * half_cos[..., None])  # sin(theta/2) axis, smooth in O
    eye = np.eye(rep.dim, dtype=complex)
    sigma = half_cos[..., None, None] * eye + _rotation_bivector(rep, axis_scaled)
    return sigma


def spin_lift_any(rep: CliffordRep, O: np.ndarray) -> np.ndarray:
    """Pointwise lift valid for every rotation angle.

    The sign/axis choices are deterministic but not continuous in O; use
    only as a per-node anchor, never inside a difference stencil.
    """
    if rep.n != 3:
        raise SpinGaugeError("spin_lift_any implemented for spatial dimension 3")
    O = np.asarray(O, dtype=float)
    if O.shape[-2:] != (3, 3):
        raise SpinGaugeError("rotation batch must have shape (..., 3, 3)")
    flat = O.reshape(-1, 3, 3)
    c = np.clip((np.trace(flat, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    sigma = np.empty((flat.shape[0], rep.dim, rep.dim), dtype=complex)
    far = c >= -0.8
    if np.any(far):
        sigma[far] = spin_lift(rep, flat[far])
    near = ~far
    if np.any(near):
        cn = c[near]
        theta = np.arccos(cn)
        M = ((flat[near] + np.swapaxes(flat[near], -1, -2)) / 2.0 - cn[:, None, None] * np.eye(3)) / (
            1.0 - cn[:, None, None]
        )  # = axis axis^T
        col = np.argmax(np.einsum("kii->ki", M), axis=-1)
        picked = np.take_along_axis(M, col[:, None, None], axis=-1)[..., 0]
        picked = picked / np.linalg.norm(picked, axis=-1)[:, None]
        # deterministic sign: make the largest-magnitude component positive
        lead = np.take_along_axis(picked, np.argmax(np.abs(picked), axis=-1)[:, None], axis=-1)[:, 0]
        picked = picked * np.where(lead < 0.0, -1.0, 1.0)[:, None]
        # align the axis with the skew part when the rotation is not an exact half turn
        skew = 0.5 * (flat[near] - np.swapaxes(flat[near], -1, -2))
        v = np.stack([skew[..., 2, 1], skew[..., 0, 2], skew[..., 1, 0]], axis=-1)
        dots = np.einsum("ki,ki->k", picked, v)
        picked = picked * np.where(dots < 0.0, -1.0, 1.0)[:, None]
        eye = np.eye(rep.dim, dtype=complex)
        sigma[near] = np.cos(theta / 2.0)[:, None, None] * eye + _rotation_bivector(
            rep, np.sin(theta / 2.0)[:, None] * picked
        )
    return sigma.reshape(O.shape[:-2] + (rep.dim, rep.dim))


def anchored_spin_lift(rep: CliffordRep, O_anchor: np.ndarray, O: np.ndarray) -> np.ndarray:
    """Lift of O, smooth for O near the per-node anchor rotations.

    sigma(O) = sigma_any(O_anchor) * sigma_smooth(O_anchor^T O); the
    relative rotation stays near the identity inside difference stencils,
    so the result is smooth there regardless of the anchor's angle.
    """
    sigma0 = spin_lift_any(rep, O_anchor)
    rel = np.einsum("...ji,...jk->...ik", O_anchor, O)
    return sigma0 @ spin_lift(rep, rel)


def check_spin_lift(rep: CliffordRep, O: np.ndarray, sigma: np.ndarray) -> float:
    """Max defect of the defining intertwining relation (diagnostic)."""
    worst = 0.0
    sig_inv = np.conj(np.swapaxes(sigma, -1, -2))
    for j in range(3):
        lhs = sigma @ rep.gamma[j] @ sig_inv
        rhs = np.einsum("...i,ikl->...kl", O[..., :, j], rep.gamma)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@dataclass
class SpinorField:
    """Spinor components in the deterministic bulk frame, with derivatives.

    `values` maps points (m, n) to components (m, I); `cartesian_gradient`,
    when given, maps points to (m, I, n) partials d_i c.  Directional frame
    derivatives fall back to central differences with `fd_step`.
    """

    rep: CliffordRep
    values: Callable[[np.ndarray], np.ndarray]
    cartesian_gradient: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-6
    label: str = ""

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        pts, single = as_points(x, self.rep.n)
        out = np.asarray(self.values(pts), dtype=complex)
        return out[0] if single else out

    def frame_derivatives(self, data: InitialData, x: np.ndarray, frame: np.ndarray | None = None) -> np.ndarray:
        """e_a(c) for all frame directions; shape (m, I, n)."""
        pts, single = as_points(x, self.rep.n)
        if frame is None:
            frame = bulk_frame(data, pts)
        if self.cartesian_gradient is not None:
            grad = np.asarray(self.cartesian_gradient(pts), dtype=complex)
            out = np.einsum("mIi,mai->mIa", grad, frame)
        else:
            h = self.fd_step
            cols = []
            for a in range(self.rep.n):
                v = frame[:, a, :]
                cols.append((self.values(pts + h * v) - self.values(pts - h * v)) / (2.0 * h))
            out = np.stack(cols, axis=-1)
        return out[0] if single else out

    def derivative(self, data: InitialData, x: np.ndarray, direction: int) -> np.ndarray:
        """Directional derivative along the 1-based frame direction e_direction."""
        if not 1 <= direction <= self.rep.n:
            raise GeometryError(f"frame direction {direction} outside 1..{self.rep.n}")
        allof = self.frame_derivatives(data, x)
        return allof[..., direction - 1]


def constant_spinor_field(rep: CliffordRep, components: np.ndarray, label: str = "constant") -> SpinorField:
    comp = np.asarray(components, dtype=complex)
    if comp.shape != (rep.dim,):
        raise GeometryError(f"constant spinor needs {rep.dim} components")

    def values(x):
        return np.broadcast_to(comp, (np.shape(x)[0], rep.dim)).copy()

    def gradient(x):
        return np.zeros((np.shape(x)[0], rep.dim, rep.n), dtype=complex)

    return SpinorField(rep=rep, values=values, cartesian_gradient=gradient, label=label)


def polynomial_spinor_field(
    rep: CliffordRep, coeffs: np.ndarray, exponents: np.ndarray, label: str = "polynomial"
) -> SpinorField:
    """Components c_I(x) = sum_t coeffs[I, t] * prod_i x_i^exponents[t, i]."""
    coeffs = np.asarray(coeffs, dtype=complex)
    exponents = np.asarray(exponents, dtype=int)
    nterms = exponents.shape[0]
    if coeffs.shape != (rep.dim, nterms):
        raise GeometryError("coefficient array must have shape (I, nterms)")

    def monomials(x):
        return np.prod(x[:, None, :] ** exponents[None, :, :], axis=-1)  # (m, t)

    def values(x):
        return np.einsum("It,mt->mI", coeffs, monomials(x))

    def gradient(x):
        m = x.shape[0]
        out = np.zeros((m, rep.dim, rep.n), dtype=complex)
        for i in range(rep.n):
            e = exponents.copy()
            mask = e[:, i] > 0
            if not np.any(mask):
                continue
            e2 = e[mask].copy()
            fac = e2[:, i].astype(float)
            e2[:, i] -= 1
            mono = np.prod(x[:, None, :] ** e2[None, :, :], axis=-1)
            out[..., i] = np.einsum("It,mt->mI", coeffs[:, mask] * fac[None, :], mono)
        return out

    return SpinorField(rep=rep, values=values, cartesian_gradient=gradient, label=label)


def random_polynomial_field(
    rep: CliffordRep, rng: np.random.Generator, degree: int = 2, scale: float = 0.1, label: str = "random-poly"
) -> SpinorField:
    """Random low-degree polynomial spinor, scaled so values stay order one."""
    exps = []
    for total in range(degree + 1):
        for a in range(total + 1):
            for b in range(total - a + 1):
                exps.append((a, b, total - a - b))
    exponents = np.asarray(exps, dtype=int)
    damp = scale ** np.sum(exponents, axis=1)
    coeffs = (rng.normal(size=(rep.dim, len(exps))) + 1j * rng.normal(size=(rep.dim, len(exps)))) * damp
    return polynomial_spinor_field(rep, coeffs, exponents, label=label)


def radial_bump_field(
    rep: CliffordRep, components: np.ndarray, r_lo: float, r_hi: float, label: str = "bump"
) -> SpinorField:
    """Constant spinor windowed by a Gaussian in radius, supported well inside [r_lo, r_hi]."""
    comp = np.asarray(components, dtype=complex)
    center = 0.5 * (r_lo + r_hi)
    width = (r_hi - r_lo) / 7.0

    def window(r):
        return np.exp(-(((r - center) / width) ** 2))

    def values(x):
        r = np.linalg.norm(x, axis=-1)
        return window(r)[:, None] * comp[None, :]

    def gradient(x):
        r = np.linalg.norm(x, axis=-1)
        dwin = window(r) * (-2.0 * (r - center) / width**2)
        om = x / r[:, None]
        return dwin[:, None, None] * comp[None, :, None] * om[:, None, :]

    return SpinorField(rep=rep, values=values, cartesian_gradient=gradient, label=label)
