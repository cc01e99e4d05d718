"""Closed-form initial data models and creased gluings.

Every model ships analytic first derivatives and, when spherically
symmetric, the radial profile used by the transmission solver.  All
closures are vectorized over point batches (m, 3); the catalog is
three-dimensional.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .geometry import (
    Chart,
    CreaseAngle,
    CreasedData,
    GeometryError,
    InitialData,
    RadialProfile,
    sphere_grid,
)


def _radii(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=-1)


def _radial_tensor(x, u, v):
    """u(r) delta_ij + v(r) omega_i omega_j at each point."""
    r = _radii(x)
    om = x / r[:, None]
    eye = np.eye(3)
    return u[:, None, None] * eye[None] + v[:, None, None] * (om[:, :, None] * om[:, None, :])


def _radial_tensor_deriv(x, u, du, v, dv):
    """d_l of the radial tensor; index order [..., i, j, l]."""
    r = _radii(x)
    om = x / r[:, None]
    eye = np.eye(3)
    P = om[:, :, None] * om[:, None, :]
    dP = (
        (eye[None, :, None, :] - om[:, :, None, None] * om[:, None, None, :]) * om[:, None, :, None]
        + (eye[None, None, :, :] - om[:, None, :, None] * om[:, None, None, :]) * om[:, :, None, None]
    ) / r[:, None, None, None]
    out = du[:, None, None, None] * eye[None, :, :, None] * om[:, None, None, :]
    out = out + dv[:, None, None, None] * P[..., None] * om[:, None, None, :]
    out = out + v[:, None, None, None] * dP
    return out


def _zero_tensor(x):
    m = np.shape(x)[0]
    return np.zeros((m, 3, 3))


def _zero_tensor_deriv(x):
    m = np.shape(x)[0]
    return np.zeros((m, 3, 3, 3))


def _radial_data(
    chart: Chart,
    kind: str,
    label: str,
    q: float | None,
    metric_uv,  # r -> (u, du, v, dv) for g = u delta + v P
    curv_uv=None,  # r -> (u, du, v, dv) for k, or None for k = 0
    profile: RadialProfile | None = None,
) -> InitialData:
    def g(x):
        u, du, v, dv = metric_uv(_radii(x))
        return _radial_tensor(x, u, v)

    def dg(x):
        u, du, v, dv = metric_uv(_radii(x))
        return _radial_tensor_deriv(x, u, du, v, dv)

    if curv_uv is None:
        k, dk = _zero_tensor, _zero_tensor_deriv
    else:
        def k(x):
            u, du, v, dv = curv_uv(_radii(x))
            return _radial_tensor(x, u, v)

        def dk(x):
            u, du, v, dv = curv_uv(_radii(x))
            return _radial_tensor_deriv(x, u, du, v, dv)

    return InitialData(n=3, chart=chart, g=g, k=k, dg=dg, dk=dk, kind=kind, q=q,
                       label=label, profile=profile)


def _validate_positive_definite(data: InitialData, radii) -> None:
    grid = sphere_grid(6)
    for r in radii:
        if not data.chart.contains(r):
            continue
        g = data.g(r * grid.nodes[::7])
        if not np.all(np.linalg.eigvalsh(g) > 0.0):
            raise GeometryError(f"{data.label}: metric not positive definite at r={r:g}")


# ---------------------------------------------------------------------------
# individual models


def minkowski_slice() -> InitialData:
    ones = lambda r: (np.ones_like(r), np.zeros_like(r), np.zeros_like(r), np.zeros_like(r))
    profile = RadialProfile(
        A=lambda r: np.ones_like(r), B=lambda r: np.ones_like(r),
        dA=lambda r: np.zeros_like(r), dB=lambda r: np.zeros_like(r),
        kappa_n=lambda r: np.zeros_like(r), kappa_t=lambda r: np.zeros_like(r),
    )
    return _radial_data(
        chart=Chart("exterior", 0.0, math.inf),
        kind="asymptotically-flat-exterior",
        label="minkowski_slice",
        q=math.inf,
        metric_uv=ones,
        profile=profile,
    )


def schwarzschild_isotropic(m: float) -> InitialData:
    m = float(m)
    r_min = 0.75 * abs(m) if m != 0.0 else 0.0

    def phi(r):
        return 1.0 + m / (2.0 * r)

    def metric_uv(r):
        p = phi(r)
        dp = -m / (2.0 * r**2)
        return p**4, 4.0 * p**3 * dp, np.zeros_like(r), np.zeros_like(r)

    profile = RadialProfile(
        A=lambda r: phi(r) ** 2,
        B=lambda r: phi(r) ** 2,
        dA=lambda r: 2.0 * phi(r) * (-m / (2.0 * r**2)),
        dB=lambda r: 2.0 * phi(r) * (-m / (2.0 * r**2)),
        kappa_n=lambda r: np.zeros_like(r),
        kappa_t=lambda r: np.zeros_like(r),
    )
    data = _radial_data(
        chart=Chart("exterior", r_min, math.inf),
        kind="asymptotically-flat-exterior",
        label=f"schwarzschild_isotropic(m={m:g})",
        q=1.0,
        metric_uv=metric_uv,
        profile=profile,
    )
    _validate_positive_definite(data, [max(r_min * 1.5, 1.0), 10.0, 100.0])
    return data


def schwarzschild_exterior_area_radius(m: float, r_min: float | None = None) -> InitialData:
    m = float(m)
    if r_min is None:
        r_min = 2.5 * m if m > 0 else 0.05 * max(abs(m), 1.0)

    def metric_uv(r):
        alpha = 2.0 * m / (r - 2.0 * m)
        dalpha = -2.0 * m / (r - 2.0 * m) ** 2
        return np.ones_like(r), np.zeros_like(r), alpha, dalpha

    def A(r):
        return 1.0 / np.sqrt(1.0 - 2.0 * m / r)

    profile = RadialProfile(
        A=A,
        B=lambda r: np.ones_like(r),
        dA=lambda r: -(m / r**2) * (1.0 - 2.0 * m / r) ** (-1.5),
        dB=lambda r: np.zeros_like(r),
        kappa_n=lambda r: np.zeros_like(r),
        kappa_t=lambda r: np.zeros_like(r),
    )
    data = _radial_data(
        chart=Chart("exterior", float(r_min), math.inf),
        kind="asymptotically-flat-exterior",
        label=f"schwarzschild_exterior_area_radius(m={m:g})",
        q=1.0,
        metric_uv=metric_uv,
        profile=profile,
    )
    _validate_positive_definite(data, [r_min * 1.2 + 0.1, 10.0, 100.0])
    return data


def flat_ball(r0: float) -> InitialData:
    data = minkowski_slice()
    return InitialData(
        n=3, chart=Chart("ball", 0.0, float(r0)), g=data.g, k=data.k, dg=data.dg, dk=data.dk,
        kind="compact-interior", q=None, label=f"flat_ball(r0={r0:g})", profile=data.profile,
    )


def miao_corner(m: float, rho0: float) -> CreasedData:
    """Flat interior glued to the Schwarzschild exterior in area-radius coordinates."""
    m, rho0 = float(m), float(rho0)
    if rho0 <= 0:
        raise GeometryError("miao_corner needs rho0 > 0")
    if 2.0 * m / rho0 >= 1.0:
        raise GeometryError(f"miao_corner: gluing sphere rho0={rho0:g} is inside the horizon 2m={2*m:g}")
    exterior = schwarzschild_exterior_area_radius(m)
    plus = InitialData(
        n=3, chart=Chart("exterior", rho0, math.inf), g=exterior.g, k=exterior.k,
        dg=exterior.dg, dk=exterior.dk, kind="asymptotically-flat-exterior", q=1.0,
        label=exterior.label + f"|r>={rho0:g}", profile=exterior.profile,
    )
    return CreasedData(
        minus=flat_ball(rho0),
        plus=plus,
        r0=rho0,
        angle=CreaseAngle.from_constant(0.0),
        label=f"miao_corner(m={m:g}, rho0={rho0:g})",
    )


def trivial_crease(r0: float = 1.0) -> CreasedData:
    """Flat data on both sides of r = r0 with zero hyperbolic angle."""
    flat = minkowski_slice()
    plus = InitialData(
        n=3, chart=Chart("exterior", float(r0), math.inf), g=flat.g, k=flat.k,
        dg=flat.dg, dk=flat.dk, kind="asymptotically-flat-exterior", q=math.inf,
        label="minkowski_slice", profile=flat.profile,
    )
    return CreasedData(
        minus=flat_ball(r0), plus=plus, r0=float(r0),
        angle=CreaseAngle.from_constant(0.0), label=f"trivial_crease(r0={r0:g})",
    )


def graph_slice(amplitude: float = 0.4, center: float = 4.5, width: float = 1.0) -> InitialData:
    """Slice t = h(|x|) of Minkowski with Gaussian-profile slope h'.

    h'(r) = amplitude * exp(-((r-center)/width)^2) keeps the slope below 1
    and makes the slice flat to all polynomial orders at infinity.
    """
    a, c, w = float(amplitude), float(center), float(width)
    if not abs(a) < 1.0:
        raise GeometryError("graph_slice amplitude must satisfy |amplitude| < 1")

    def h1(r):
        return a * np.exp(-(((r - c) / w) ** 2))

    def h2(r):
        s = (r - c) / w
        return a * np.exp(-(s**2)) * (-2.0 * s) / w

    def h3(r):
        s = (r - c) / w
        return a * np.exp(-(s**2)) * (4.0 * s**2 - 2.0) / w**2

    def metric_uv(r):
        hp = h1(r)
        return np.ones_like(r), np.zeros_like(r), -(hp**2), -2.0 * hp * h2(r)

    # k = Hess(h)/W w.r.t. the future timelike normal (convention pinned in
    # the README sheet); the slice is vacuum for either global k sign
    def curv_uv(r):
        hp, hpp, hppp = h1(r), h2(r), h3(r)
        W = np.sqrt(1.0 - hp**2)
        u = hp / (r * W)
        v = hpp / W - u
        du = hpp / (r * W) - hp / (r**2 * W) + hp**2 * hpp / (r * W**3)
        dvn = hppp / W + hp * hpp**2 / W**3
        return u, du, v, dvn - du

    profile = RadialProfile(
        A=lambda r: np.sqrt(1.0 - h1(r) ** 2),
        B=lambda r: np.ones_like(r),
        dA=lambda r: -h1(r) * h2(r) / np.sqrt(1.0 - h1(r) ** 2),
        dB=lambda r: np.zeros_like(r),
        kappa_n=lambda r: h2(r) / (1.0 - h1(r) ** 2) ** 1.5,
        kappa_t=lambda r: h1(r) / (r * np.sqrt(1.0 - h1(r) ** 2)),
    )
    return _radial_data(
        chart=Chart("exterior", 0.0, math.inf),
        kind="asymptotically-flat-exterior",
        label=f"graph_slice(a={a:g}, c={c:g}, w={w:g})",
        q=math.inf,
        metric_uv=metric_uv,
        curv_uv=curv_uv,
        profile=profile,
    )


def rotated_crease(base: CreasedData, angle: CreaseAngle) -> CreasedData:
    """Apply a hyperbolic gauge angle to an existing crease; bulks unchanged."""
    return base.with_angle(angle, label=f"rotated({base.label}; f={angle.description})")


# ---------------------------------------------------------------------------
# dispatch


def _angle_from_spec(spec) -> CreaseAngle:
    if isinstance(spec, CreaseAngle):
        return spec
    if isinstance(spec, (int, float)):
        return CreaseAngle.from_constant(float(spec))
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "constant":
            return CreaseAngle.from_constant(float(spec["value"]))
        if kind == "cos_theta":
            return CreaseAngle.cos_theta(float(spec["amplitude"]))
        raise GeometryError(f"unknown crease angle type {kind!r}")
    raise GeometryError(f"cannot interpret crease angle spec {spec!r}")


def catalog(name: str, **params):
    """Model lookup by name; returns InitialData or CreasedData."""
    try:
        if name == "minkowski_slice":
            return minkowski_slice()
        if name == "schwarzschild_isotropic":
            return schwarzschild_isotropic(params.pop("m"))
        if name == "schwarzschild_exterior_area_radius":
            return schwarzschild_exterior_area_radius(params.pop("m"))
        if name == "miao_corner":
            return miao_corner(params.pop("m"), params.pop("rho0"))
        if name == "trivial_crease":
            return trivial_crease(params.pop("r0", 1.0))
        if name == "graph_slice":
            return graph_slice(
                params.pop("amplitude", 0.4), params.pop("center", 4.5), params.pop("width", 1.0)
            )
        if name == "rotated_crease":
            base = params.pop("base")
            if isinstance(base, str):
                base_params = params.pop("base_params", {})
                base = catalog(base, **base_params)
            return rotated_crease(base, _angle_from_spec(params.pop("f")))
    except KeyError as exc:
        raise GeometryError(f"catalog model {name!r} is missing parameter {exc}") from exc
    raise GeometryError(f"unknown catalog model {name!r}")
