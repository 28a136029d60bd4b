"""Closed-form curve families and conformal maps used as ground truth.

Every curve is written once as a map of ``t`` that works on plain arrays and on
:class:`~confgeo.taylor.Taylor` objects, so point values and exact derivative
jets come from the same expression.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import taylor as tl
from .errors import BadParams, NullVelocity, PoleHit
from .taylor import Taylor

PARAM_TOL = 1e-12
POLE_TOL = 1e-12


def _dot(a, b):
    return (a * b).sum(axis=-1)


@dataclass(frozen=True)
class AnalyticCurve:
    """A curve t -> X(t) given by a Taylor-compatible expression."""

    fn: Callable
    dim: int
    name: str = "curve"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.fn(t[..., None]))

    def jet(self, t, order=4):
        """Coordinate derivatives, shape ``t.shape + (order + 1, dim)``."""
        t = np.asarray(t, dtype=float)
        tt = Taylor.variable(t, order)[..., None]
        out = self.fn(tt)
        d = out.derivatives() if isinstance(out, Taylor) else np.asarray(out)[None]
        d = np.broadcast_to(d, (order + 1,) + t.shape + (self.dim,))
        return np.moveaxis(d, 0, -2).copy()

    def then(self, mapping: Callable, name=None, dim=None):
        """Compose with a Taylor-compatible point map."""
        return AnalyticCurve(lambda t: mapping(self.fn(t)), dim or self.dim, name or self.name)


# ---------------------------------------------------------------------------
# circles


@dataclass(frozen=True)
class CircleParams:
    X0: np.ndarray
    U0: np.ndarray
    A0: np.ndarray

    def __post_init__(self):
        for k in ("X0", "U0", "A0"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))
        if abs(self.U0 @ self.U0 - 1) > PARAM_TOL:
            raise BadParams("circle requires a unit U0")
        if abs(self.U0 @ self.A0) > PARAM_TOL:
            raise BadParams("circle requires <U0, A0> = 0")


def circle_curve(params: CircleParams) -> AnalyticCurve:
    X0, U0, A0 = params.X0, params.U0, params.A0
    a2 = A0 @ A0

    def fn(t):
        return X0 + (t * U0 + t * t * A0) / (1 + t * t * a2)

    return AnalyticCurve(fn, len(X0), "circle")


def circle(params: CircleParams, t, order=0):
    """Projectively parametrised circle; with ``order > 0`` returns derivatives too."""
    c = circle_curve(params)
    return c(t) if order == 0 else c.jet(t, order)


# ---------------------------------------------------------------------------
# logarithmic spirals


@dataclass(frozen=True)
class SpiralParams:
    P0: np.ndarray
    Q0: np.ndarray
    R0: np.ndarray
    c: float

    def __post_init__(self):
        for k in ("P0", "Q0", "R0"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))
        scale = max(1.0, self.P0 @ self.P0)
        if abs(self.P0 @ self.Q0) > PARAM_TOL * scale or abs(self.P0 @ self.P0 - self.Q0 @ self.Q0) > PARAM_TOL * scale:
            raise BadParams("spiral requires <P0, Q0> = 0 and |P0| = |Q0|")
        if self.c == 0:
            raise BadParams("spiral pitch c must be nonzero")
        if self.P0 @ self.P0 == 0:
            raise BadParams("spiral requires P0 != 0")


def spiral_curve(params: SpiralParams) -> AnalyticCurve:
    P0, Q0, R0, c = params.P0, params.Q0, params.R0, float(params.c)

    def fn(t):
        e = tl.exp(t)
        return e * tl.cos(c * t) * P0 + e * tl.sin(c * t) * Q0 + R0

    return AnalyticCurve(fn, len(P0), "spiral")


def spiral(params: SpiralParams, t, order=0):
    c = spiral_curve(params)
    return c(t) if order == 0 else c.jet(t, order)


def spiral_polar(params: SpiralParams, t):
    """Polar coordinates (r, theta) about R0 in the (P0, Q0) plane, theta unwrapped."""
    X = spiral(params, t) - params.R0
    p = params.P0 / np.linalg.norm(params.P0)
    q = params.Q0 / np.linalg.norm(params.Q0)
    a, b = X @ p, X @ q
    return np.hypot(a, b), np.unwrap(np.arctan2(b, a))


def polar_law_residual(params: SpiralParams, t):
    """max | r - |P0| exp(theta / c) | / r along the sampled curve."""
    r, theta = spiral_polar(params, t)
    # unwrap fixes theta up to 2 pi k; anchor at the parameter value of the first sample
    theta = theta + 2 * np.pi * np.round((params.c * np.asarray(t)[0] - theta[0]) / (2 * np.pi))
    return np.max(np.abs(r - np.linalg.norm(params.P0) * np.exp(theta / params.c)) / r)


def spiral_initial_state(params: SpiralParams, t=0.0):
    """(x, U, A, J) of the spiral at ``t`` in flat coordinates."""
    j = spiral(params, np.array([t]), order=3)[0]
    return j[0], j[1], j[2], j[3]


# ---------------------------------------------------------------------------
# flat-space relations


def first_integral_C(U, A):
    """C built from (U, A) alone; constant along flat conformal geodesics."""
    U, A = np.asarray(U, dtype=float), np.asarray(A, dtype=float)
    U2, AA, AU = _dot(U, U), _dot(A, A), _dot(A, U)
    if np.any(np.abs(U2) < 1e-10):
        raise NullVelocity("|U|^2 vanishes")
    return (0.5 * AA / U2**2 - 2 * AU**2 / U2**3)[..., None] * U + (AU / U2**2)[..., None] * A


def flat_cg_residual(xjet):
    """Residual of dA/dt - 3<A,U>A/|U|^2 + 3|A|^2 U/(2|U|^2) from a coordinate jet."""
    U, A, Ad = xjet[..., 1, :], xjet[..., 2, :], xjet[..., 3, :]
    U2, AA, AU = _dot(U, U), _dot(A, A), _dot(A, U)
    return Ad - (3 * AU / U2)[..., None] * A + (1.5 * AA / U2)[..., None] * U


def zero_C_residual(xjet):
    """Residual of the C = 0 reduction dA/dt - 2<A,U>A/|U|^2 + |A|^2 U/|U|^2."""
    U, A, Ad = xjet[..., 1, :], xjet[..., 2, :], xjet[..., 3, :]
    U2, AA, AU = _dot(U, U), _dot(A, A), _dot(A, U)
    return Ad - (2 * AU / U2)[..., None] * A + (AA / U2)[..., None] * U


def arclength_reduction_residual(xjet, C=None, m=None):
    """Residuals of the arclength reduction u'' + (H^2 - 3H' + m) u - h' C = 0, <C,u> = -H'/h'.

    ``xjet`` needs order >= 4.  Here u = U/|U|, h' = |U| and H = h''/h'.
    The constant m is fitted from the first sample when not given.
    Returns (vector residual, scalar residual, m).
    """
    n = xjet.shape[-1]
    C = np.zeros(n) if C is None else np.asarray(C, dtype=float)
    U, A, Ad, Add = (xjet[..., k, :] for k in range(1, 5))
    s = np.sqrt(_dot(U, U))  # h'
    u = U / s[..., None]
    s1 = _dot(U, A) / s
    s2 = (_dot(A, A) + _dot(U, Ad)) / s - _dot(U, A) ** 2 / s**3
    H = s1 / s
    Hd = s2 / s - s1**2 / s**2
    # u'' from U = s u: A = s' u + s u', A' = s'' u + 2 s' u' + s u''
    ud = (A - s1[..., None] * u) / s[..., None]
    udd = (Ad - s2[..., None] * u - 2 * s1[..., None] * ud) / s[..., None]
    if m is None:
        base = udd + ((H**2 - 3 * Hd)[..., None]) * u - s[..., None] * C
        m = float(-np.ravel(_dot(base, u))[0])
    vec = udd + ((H**2 - 3 * Hd + m)[..., None]) * u - s[..., None] * C
    scal = _dot(C, u) + Hd / s
    return vec, scal, m


# ---------------------------------------------------------------------------
# conformal maps


def special_conformal(X, B):
    """Y = (X - |X|^2 B) / (1 - 2<X,B> + |B|^2 |X|^2); Taylor-compatible in X."""
    B = np.asarray(B, dtype=float)
    XX = (X * X).sum(axis=-1)
    den = 1 - 2 * (X * B).sum(axis=-1) + (B @ B) * XX
    if np.any(np.abs(tl.value(den)) < POLE_TOL):
        raise PoleHit("special conformal map hits its pole")
    return (X - XX[..., None] * B) / den[..., None]


def special_conformal_inverse(Y, B):
    return special_conformal(Y, -np.asarray(B, dtype=float))


def stereographic(x):
    """Plane point -> unit sphere S^n in R^{n+1}, projecting from the pole +e_{n+1}.

    Pulls the round metric back to (2 / (1 + |x|^2))^2 times the flat metric,
    i.e. the ``round-sphere-stereographic`` chart.
    """
    xx = (x * x).sum(axis=-1)
    den = 1 + xx
    return tl.concat_last([2 * x / den[..., None], ((xx - 1) / den)[..., None]])


def stereographic_inverse(y):
    """Sphere point in R^{n+1} -> plane (chart) point."""
    if isinstance(y, Taylor):
        last, head = y[..., -1], y[..., :-1]
    else:
        y = np.asarray(y, dtype=float)
        last, head = y[..., -1], y[..., :-1]
    den = 1 - last
    if np.any(np.abs(tl.value(den)) < POLE_TOL):
        raise PoleHit("point at the projection pole")
    return head / den[..., None]


def sphere_rotation_map(R):
    """Chart map induced by the rotation R of S^n (an isometry of the sphere chart)."""
    R = np.asarray(R, dtype=float)
    return lambda x: stereographic_inverse(tl.matvec(R, stereographic(x)))


def rotation(n, angle, i, j):
    """Rotation by ``angle`` in the (i, j) coordinate plane of R^n."""
    R = np.eye(n)
    c, s = np.cos(angle), np.sin(angle)
    R[i, i] = R[j, j] = c
    R[i, j], R[j, i] = -s, s
    return R


def loxodrome_curve(params: SpiralParams, R=None) -> AnalyticCurve:
    """Chart curve of the loxodrome obtained from a spiral centered at the origin.

    With ``R`` the sphere is first rotated by R so the curve is seen in a
    different stereographic chart.
    """
    curve = spiral_curve(params)
    if R is None:
        return AnalyticCurve(curve.fn, curve.dim, "loxodrome")
    return curve.then(sphere_rotation_map(R), name="loxodrome")


def meridian_angles(curve: AnalyticCurve, t, R=None):
    """Angle (radians) between the curve and the meridians through the poles.

    Measured on the embedded unit sphere; the poles are +-e_{n+1}, mapped by
    ``R`` when the curve lives in a rotated chart.
    """
    n = curve.dim
    pole = np.zeros(n + 1)
    pole[-1] = 1.0
    if R is not None:
        pole = np.asarray(R) @ pole
    t = np.asarray(t, dtype=float)
    emb = curve.then(stereographic, dim=n + 1)
    j = emb.jet(t, 1)
    p, T = j[..., 0, :], j[..., 1, :]
    m = pole - (p @ pole)[..., None] * p
    cos = _dot(T, m) / (np.linalg.norm(T, axis=-1) * np.linalg.norm(m, axis=-1))
    return np.arccos(np.clip(cos, -1, 1))


def serret_frenet_torsion(xjet):
    """Torsion of a space curve in R^3 from its coordinate jet (order >= 3)."""
    d1, d2, d3 = xjet[..., 1, :], xjet[..., 2, :], xjet[..., 3, :]
    cr = np.cross(d1, d2)
    return np.einsum("...i,...i->...", cr, d3) / np.einsum("...i,...i->...", cr, cr)


def planarity(points):
    """Smallest singular value of the centered point cloud (0 for planar curves)."""
    P = np.asarray(points) - np.mean(points, axis=0)
    return np.linalg.svd(P, compute_uv=False)[-1] if P.shape[1] >= 3 else 0.0


def circle_fit(points):
    """Least-squares circle through a planar point cloud: (center, radius, max relative deviation)."""
    P = np.asarray(points, dtype=float)
    mean = P.mean(axis=0)
    basis = np.linalg.svd(P - mean, full_matrices=False)[2][:2]
    q = (P - mean) @ basis.T
    # |q|^2 = 2 c.q + (r^2 - |c|^2) is linear in (c, r^2 - |c|^2)
    M = np.column_stack([2 * q, np.ones(len(q))])
    sol = np.linalg.lstsq(M, np.sum(q**2, axis=1), rcond=None)[0]
    c2 = sol[:2]
    radius = float(np.sqrt(sol[2] + c2 @ c2))
    dev = np.abs(np.linalg.norm(q - c2, axis=1) - radius) / radius
    return mean + c2 @ basis, radius, float(dev.max())


def curve_trajectory(curve: AnalyticCurve, t, metric_jet=None, metric="flat-euclidean", equation="custom"):
    """Sample an analytic curve into a :class:`~confgeo.trajectory.Trajectory` (covariant 3-jets)."""
    from .dynamics import state_from_coordinates
    from .geometry import flat_metric, _flat_jet
    from .trajectory import Trajectory

    t = np.asarray(t, dtype=float)
    xjet = curve.jet(t, 3)
    if metric_jet is None:
        metric_jet = _flat_jet(flat_metric(curve.dim), np.zeros(curve.dim))
    elif callable(metric_jet):
        metric_jet = metric_jet(xjet[..., 0, :])
    state, _ = state_from_coordinates(metric_jet, xjet)
    return Trajectory(t, state.x, state.U, state.A, state.J, metric, equation, {"oracle": curve.name})


def random_circle(rng, dim=3, accel=None) -> CircleParams:
    U0 = rng.normal(size=dim)
    U0 /= np.linalg.norm(U0)
    A0 = rng.normal(size=dim)
    A0 -= (A0 @ U0) * U0
    if accel is not None:
        A0 *= accel / np.linalg.norm(A0)
    return CircleParams(rng.normal(size=dim) * 0.3, U0, A0)


def random_spiral(rng, dim=3, c=None, scale=None, centered=False) -> SpiralParams:
    Q = np.linalg.qr(rng.normal(size=(dim, 2)))[0]
    r = scale if scale is not None else rng.uniform(0.3, 1.0)
    ang = rng.uniform(0, 2 * np.pi)
    P0 = r * (np.cos(ang) * Q[:, 0] + np.sin(ang) * Q[:, 1])
    Q0 = r * (-np.sin(ang) * Q[:, 0] + np.cos(ang) * Q[:, 1])
    cc = c if c is not None else rng.choice([-1, 1]) * rng.uniform(1.5, 3.0)
    R0 = np.zeros(dim) if centered else rng.normal(size=dim) * 0.3
    return SpiralParams(P0, Q0, R0, cc)


__all__ = [
    "AnalyticCurve",
    "circle_fit",
    "CircleParams",
    "SpiralParams",
    "circle",
    "circle_curve",
    "spiral",
    "spiral_curve",
    "spiral_polar",
    "polar_law_residual",
    "first_integral_C",
    "flat_cg_residual",
    "zero_C_residual",
    "arclength_reduction_residual",
    "special_conformal",
    "special_conformal_inverse",
    "stereographic",
    "stereographic_inverse",
    "sphere_rotation_map",
    "rotation",
    "spiral_initial_state",
    "loxodrome_curve",
    "meridian_angles",
    "serret_frenet_torsion",
    "planarity",
    "curve_trajectory",
    "random_circle",
    "random_spiral",
]
