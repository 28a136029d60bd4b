"""Conformally invariant curve quantities and the third/fourth order flows.

All pointwise functions accept batched states (leading axes) and are written
with plain arithmetic and ``einsum`` so they remain valid for complex input;
the fourth-order flow relies on that for complex-step Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ode
from .errors import NullVelocity, SingularLinearSystem
from .geometry import GeometryJet, MetricSpec, _flat_jet, gamma_contract, geometry_jet, inner
from .trajectory import Trajectory

NULL_GUARD = 1e-10
_CSTEP = 1e-30


@dataclass(frozen=True)
class CurveState:
    """Covariant 2-jet (x, U, A) or 3-jet (x, U, A, J) of a curve."""

    x: np.ndarray
    U: np.ndarray
    A: np.ndarray
    J: Optional[np.ndarray] = None

    @classmethod
    def of(cls, x, U, A, J=None):
        f = lambda v: None if v is None else np.asarray(v, dtype=float)  # noqa: E731
        return cls(f(x), f(U), f(A), f(J))

    def with_jerk(self, J):
        return CurveState(self.x, self.U, self.A, np.asarray(J))

    @property
    def dim(self):
        return np.shape(self.x)[-1]


def check_velocity(jet: GeometryJet, U):
    U2 = inner(jet.g, U, U)
    if np.any(np.abs(U2) < NULL_GUARD):
        raise NullVelocity(f"|U|^2 = {np.min(np.abs(U2)):.3g} below the null guard {NULL_GUARD:g}")
    return U2


def _require_jerk(state):
    if state.J is None:
        raise ValueError("this operation needs a 3-jet (state.J)")


# ---------------------------------------------------------------------------
# pointwise algebra on raw arrays (complex safe)


def _E(g, ginv, P, U, A, J):
    U2 = inner(g, U, U)
    UA = inner(g, U, A)
    AA = inner(g, A, A)
    PU = np.einsum("...ab,...b->...a", ginv, np.einsum("...ab,...b->...a", P, U))
    PUU = inner(P, U, U)
    return (
        J
        - (3 * UA / U2)[..., None] * A
        + (1.5 * AA / U2)[..., None] * U
        - U2[..., None] * PU
        + (2 * PUU)[..., None] * U
    )


def _F(g, ginv, P, U, A, J):
    """(E - 2 L U) / |U|^2, the quantity differentiated by the adjoint operator."""
    E = _E(g, ginv, P, U, A, J)
    U2 = inner(g, U, U)
    L = inner(g, U, E) / U2
    return (E - (2 * L)[..., None] * U) / U2[..., None]


def _adjoint_zero_order(g, U, A, F):
    U2 = inner(g, U, U)
    return (inner(g, U, F)[..., None] * A - inner(g, A, F)[..., None] * U - inner(g, A, U)[..., None] * F) / U2[..., None]


# ---------------------------------------------------------------------------
# public pointwise operations


def E_vector(jet: GeometryJet, state: CurveState):
    """Left-hand side of the conformal geodesic equations."""
    _require_jerk(state)
    check_velocity(jet, state.U)
    return _E(jet.g, jet.ginv, jet.schouten, state.U, state.A, state.J)


def lagrangian_L(jet: GeometryJet, state: CurveState):
    """The conformally invariant third-order Lagrangian <U, E> / |U|^2."""
    E = E_vector(jet, state)
    return inner(jet.g, state.U, E) / inner(jet.g, state.U, state.U)


def lagrangian_L1(jet: GeometryJet, state: CurveState):
    """Second-order part: 1/2 |A|^2/|U|^2 - <U,A>^2/|U|^4 + P(U,U)."""
    U2 = check_velocity(jet, state.U)
    UA = inner(jet.g, state.U, state.A)
    return 0.5 * inner(jet.g, state.A, state.A) / U2 - UA**2 / U2**2 + inner(jet.schouten, state.U, state.U)


def K_vector(jet: GeometryJet, state: CurveState, cotton_coefficient=2.0):
    """Weyl/Cotton forcing term of the first variation.

    K^e = g^{ec} (W^d_{bca} U^a U^b A_d + k |U|^2 nabla_[c P_a]b U^a U^b) with
    k = ``cotton_coefficient``.  The default k = 2 is the value for which the
    first-variation formula matches direct differentiation of the functional
    on generic (non conformally flat) metrics; k = -2 is the opposite sign
    convention, kept selectable so that mismatch can be demonstrated.
    """
    if jet.flat:
        return np.zeros(np.broadcast_shapes(np.shape(state.U), jet.g.shape[:-1]))
    if jet.nabla_schouten is None:
        raise ValueError("K needs a geometry jet computed with derivatives=True")
    U, A = state.U, state.A
    U2 = inner(jet.g, U, U)
    A_low = np.einsum("...de,...e->...d", jet.g, A)
    weyl_term = np.einsum("...dbca,...a,...b,...d->...c", jet.weyl, U, U, A_low)
    nP = jet.nabla_schouten
    cotton = 0.5 * (nP - np.swapaxes(nP, -3, -2))  # [c, a, b] -> nabla_[c P_a]b
    cotton_term = np.einsum("...cab,...a,...b->...c", cotton, U, U)
    return np.einsum("...ec,...c->...e", jet.ginv, weyl_term + cotton_coefficient * U2[..., None] * cotton_term)


def covariant_derivative(jet: GeometryJet, U, V, Vdot):
    """nabla_U V from the coordinate derivative of V's components."""
    return Vdot + gamma_contract(jet.christoffel, U, V)


def D_op(jet: GeometryJet, state: CurveState, V, DV):
    """Conformally invariant derivative along the curve; ``DV`` is nabla_U V."""
    U2 = check_velocity(jet, state.U)
    U, A = state.U, state.A
    g = jet.g
    return DV + (inner(g, A, V)[..., None] * U - inner(g, U, V)[..., None] * A - inner(g, A, U)[..., None] * V) / U2[..., None]


def D_adjoint(jet: GeometryJet, state: CurveState, F, nabla_F):
    """L^2 adjoint of D applied to F, given nabla_U F."""
    check_velocity(jet, state.U)
    return -nabla_F + _adjoint_zero_order(jet.g, state.U, state.A, F)


def D_squared(jet: GeometryJet, state: CurveState, V, V1, V2):
    """D(D(V)) from V, V1 = nabla_U V and V2 = nabla_U nabla_U V."""
    _require_jerk(state)
    U2 = check_velocity(jet, state.U)
    g = jet.g
    U, A, J = state.U, state.A, state.J
    s = 1.0 / U2
    ds = -2 * inner(g, U, A) / U2**2

    def ip(a, b):
        return inner(g, a, b)[..., None]

    bracket = ip(A, V) * U - ip(U, V) * A - ip(A, U) * V
    d_bracket = (
        (ip(J, V) + ip(A, V1)) * U
        + ip(A, V) * A
        - (ip(A, V) + ip(U, V1)) * A
        - ip(U, V) * J
        - (ip(J, U) + ip(A, A)) * V
        - ip(A, U) * V1
    )
    W = V1 + s[..., None] * bracket
    nabla_W = V2 + ds[..., None] * bracket + s[..., None] * d_bracket
    return D_op(jet, state, W, nabla_W)


# ---------------------------------------------------------------------------
# flows


def cg3_jerk(jet: GeometryJet, state: CurveState):
    """nabla_U A solved from E = 0."""
    U2 = check_velocity(jet, state.U)
    g, U, A = jet.g, state.U, state.A
    UA = inner(g, U, A)
    AA = inner(g, A, A)
    PU = np.einsum("...ab,...b->...a", jet.schouten_sharp, U)
    PUU = inner(jet.schouten, U, U)
    return (
        (3 * UA / U2)[..., None] * A
        - (1.5 * AA / U2)[..., None] * U
        + U2[..., None] * PU
        - (2 * PUU)[..., None] * U
    )


def cg3_rhs(jet: GeometryJet, state: CurveState):
    """Coordinate derivatives (dx, dU, dA) of the conformal geodesic flow."""
    gam = jet.christoffel
    U, A = state.U, state.A
    dU = A - gamma_contract(gam, U, U)
    dA = cg3_jerk(jet, state) - gamma_contract(gam, U, A)
    return U, dU, dA


def mercator_C(state: CurveState, g=None):
    """First integral C of the flat fourth-order flow, from a 3-jet."""
    _require_jerk(state)
    U, A, J = state.U, state.A, state.J
    if g is None:
        g = np.eye(np.shape(U)[-1])
    U2 = inner(g, U, U)
    if np.any(np.abs(U2) < NULL_GUARD):
        raise NullVelocity("|U|^2 vanishes")
    AA, AU, JU = inner(g, A, A), inner(g, A, U), inner(g, J, U)
    c = (
        J
        - (AA / U2)[..., None] * U
        - (2 * AU / U2)[..., None] * A
        + (4 * AU**2 / U2**2)[..., None] * U
        - (2 * JU / U2)[..., None] * U
    )
    return c / U2[..., None]


def flat_mercator_jerk(U, A, C, g=None):
    """dA/dt of the flat fourth-order flow written with its first integral C."""
    if g is None:
        g = np.eye(np.shape(U)[-1])
    U2 = inner(g, U, U)
    if np.any(np.abs(U2) < NULL_GUARD):
        raise NullVelocity("|U|^2 vanishes")
    AA, AU, CU = inner(g, A, A), inner(g, A, U), inner(g, C, U)
    return -(AA / U2)[..., None] * U + (2 * AU / U2)[..., None] * A - (2 * CU)[..., None] * U + U2[..., None] * C


def _F_time_derivative_parts(jet: GeometryJet, state: CurveState):
    """F and the part of dF/dt that does not involve dJ/dt (complex step)."""
    if jet.dschouten is None and not jet.flat:
        raise ValueError("the fourth-order flow needs a geometry jet computed with derivatives=True")
    g, ginv, P = jet.g, jet.ginv, jet.schouten
    U, A, J = state.U, state.A, state.J
    n = np.shape(U)[-1]
    batch = np.broadcast_shapes(np.shape(U)[:-1], g.shape[:-2])
    gam = jet.christoffel
    Udot = A - gamma_contract(gam, U, U)
    Adot = J - gamma_contract(gam, U, A)
    F = _F(g, ginv, P, U, A, J)

    nd = 2 * n if jet.flat else 3 * n
    pad = (1,) * len(batch)
    eye = np.eye(n)
    dU = np.zeros((nd,) + pad + (n,))
    dA = np.zeros((nd,) + pad + (n,))
    dU[:n] = eye.reshape((n,) + pad + (n,))
    dA[n : 2 * n] = eye.reshape((n,) + pad + (n,))
    gc = np.broadcast_to(g, batch + (n, n)).astype(complex)[None].repeat(nd, axis=0)
    Pc = np.broadcast_to(P, batch + (n, n)).astype(complex)[None].repeat(nd, axis=0)
    if not jet.flat:
        b = len(batch)
        gc[2 * n :] += 1j * _CSTEP * np.moveaxis(np.broadcast_to(_dg_from_jet(jet), batch + (n, n, n)), b, 0)
        Pc[2 * n :] += 1j * _CSTEP * np.moveaxis(np.broadcast_to(jet.dschouten, batch + (n, n, n)), b, 0)
    ginvc = np.linalg.inv(gc)
    Fc = _F(gc, ginvc, Pc, U + 1j * _CSTEP * dU, A + 1j * _CSTEP * dA, J + 0j)
    jac = Fc.imag / _CSTEP  # (nd, *batch, n)
    partial = np.einsum("k...a,...k->...a", jac[:n], Udot) + np.einsum("k...a,...k->...a", jac[n : 2 * n], Adot)
    if not jet.flat:
        partial = partial + np.einsum("k...a,...k->...a", jac[2 * n :], U)
    return F, partial


def _dg_from_jet(jet: GeometryJet):
    """partial_c g_ab recovered from the Christoffel symbols (metric compatibility)."""
    low = np.einsum("...ad,...dbc->...abc", jet.g, jet.christoffel)  # Gamma_abc = g_ad Gamma^d_bc
    # partial_c g_ab = Gamma_abc + Gamma_bac
    return np.einsum("...abc->...cab", low) + np.einsum("...bac->...cab", low)


def mercator4_residual(jet: GeometryJet, state: CurveState, Jdot):
    """D*(F) - K/|U|^2 for a curve whose J components change at rate ``Jdot``."""
    _require_jerk(state)
    U2 = check_velocity(jet, state.U)
    F, partial = _F_time_derivative_parts(jet, state)
    U = state.U
    dF_dJ = (Jdot - (2 * inner(jet.g, U, Jdot) / U2)[..., None] * U) / U2[..., None]
    nabla_F = partial + dF_dJ + gamma_contract(jet.christoffel, U, F)
    return D_adjoint(jet, state, F, nabla_F) - K_vector(jet, state) / U2[..., None]


def mercator4_jerk_rate(jet: GeometryJet, state: CurveState):
    """Coordinate rate dJ/dt solved from the fourth-order equation."""
    _require_jerk(state)
    U2 = check_velocity(jet, state.U)
    g, U = jet.g, state.U
    F, partial = _F_time_derivative_parts(jet, state)
    target = (
        _adjoint_zero_order(g, U, state.A, F)
        - K_vector(jet, state) / U2[..., None]
        - gamma_contract(jet.christoffel, U, F)
        - partial
    )
    # dF/dJ = (Id - 2 U U^flat / |U|^2) / |U|^2 is |U|^-2 times an involution
    Jdot = U2[..., None] * (target - (2 * inner(g, U, target) / U2)[..., None] * U)
    if not np.all(np.isfinite(Jdot)):
        raise SingularLinearSystem("non-finite solution for dJ/dt")
    return Jdot


def mercator4_rhs(jet: GeometryJet, state: CurveState):
    """Coordinate derivatives (dx, dU, dA, dJ) of the conformal Mercator flow."""
    gam = jet.christoffel
    U, A, J = state.U, state.A, state.J
    return U, A - gamma_contract(gam, U, U), J - gamma_contract(gam, U, A), mercator4_jerk_rate(jet, state)


# ---------------------------------------------------------------------------
# coordinate jets <-> covariant states


def state_from_coordinates(jet: GeometryJet, xjet):
    """CurveState from coordinate derivatives ``xjet[..., k, :] = d^k x/dt^k``.

    Returns ``(state, Jdot)``; ``J`` needs k >= 3 and ``Jdot`` (the coordinate
    rate of J's components) needs k >= 4, otherwise they are ``None``.
    """
    xjet = np.asarray(xjet, dtype=float)
    K = xjet.shape[-2] - 1
    x, xd, xdd = xjet[..., 0, :], xjet[..., 1, :], xjet[..., 2, :]
    gam, dgam = jet.christoffel, jet.dchristoffel
    U = xd
    A = xdd + gamma_contract(gam, xd, xd)
    J = Jdot = None
    if K >= 3:
        x3 = xjet[..., 3, :]
        dU_gam = np.einsum("...eabc,...e->...abc", dgam, xd)  # partial_U Gamma
        Adot = x3 + gamma_contract(dU_gam, xd, xd) + 2 * gamma_contract(gam, xdd, xd)
        J = Adot + gamma_contract(gam, U, A)
    if K >= 4:
        if jet.ddchristoffel is None:
            raise ValueError("dJ/dt needs a geometry jet computed with derivatives=True")
        x4 = xjet[..., 4, :]
        ddgam = jet.ddchristoffel
        Addot = (
            x4
            + np.einsum("...feabc,...f,...e,...b,...c->...a", ddgam, xd, xd, xd, xd)
            + gamma_contract(np.einsum("...eabc,...e->...abc", dgam, xdd), xd, xd)
            + 4 * gamma_contract(dU_gam, xdd, xd)
            + 2 * gamma_contract(gam, x3, xd)
            + 2 * gamma_contract(gam, xdd, xdd)
        )
        Jdot = Addot + gamma_contract(dU_gam, U, A) + gamma_contract(gam, xdd, A) + gamma_contract(gam, U, Adot)
    return CurveState(x, U, A, J), Jdot


def coordinates_from_state(jet: GeometryJet, state: CurveState):
    """Inverse of :func:`state_from_coordinates` up to third order."""
    gam = jet.christoffel
    U = state.U
    xdd = state.A - gamma_contract(gam, U, U)
    out = [state.x, U, xdd]
    if state.J is not None:
        Adot = state.J - gamma_contract(gam, U, state.A)
        dU_gam = np.einsum("...eabc,...e->...abc", jet.dchristoffel, U)
        out.append(Adot - gamma_contract(dU_gam, U, U) - 2 * gamma_contract(gam, xdd, U))
    return np.stack(out, axis=-2)


def variation_derivatives(jet: GeometryJet, xjet, vjet):
    """(V, nabla_U V, nabla_U nabla_U V) from coordinate jets of the curve and of V."""
    xd, xdd = xjet[..., 1, :], xjet[..., 2, :]
    V, Vd = vjet[..., 0, :], vjet[..., 1, :]
    gam = jet.christoffel
    V1 = Vd + gamma_contract(gam, xd, V)
    if vjet.shape[-2] < 3:
        return V, V1, None
    Vdd = vjet[..., 2, :]
    dU_gam = np.einsum("...eabc,...e->...abc", jet.dchristoffel, xd)
    V1dot = Vdd + gamma_contract(dU_gam, xd, V) + gamma_contract(gam, xdd, V) + gamma_contract(gam, xd, Vd)
    V2 = V1dot + gamma_contract(gam, xd, V1)
    return V, V1, V2


# ---------------------------------------------------------------------------
# flows and integration


class Flow:
    """First-order form of a curve equation on stacked vector slots."""

    equation = "custom"
    slots = 3
    needs_derivatives = False

    def __init__(self, metric: MetricSpec):
        self.metric = metric
        self.dim = metric.dim
        self._flat = _flat_jet(metric, np.zeros(metric.dim)) if metric.kind == "flat" else None

    def jet(self, x):
        if self._flat is not None:
            return self._flat
        return geometry_jet(self.metric, x, derivatives=self.needs_derivatives)

    def pack(self, state: CurveState):
        parts = [state.x, state.U, state.A, state.J][: self.slots]
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def unpack(self, y):
        y = np.asarray(y).reshape(self.slots, self.dim)
        return CurveState(*y)

    def derivative(self, jet, state):
        raise NotImplementedError

    def __call__(self, t, y):
        state = self.unpack(y)
        return np.concatenate(self.derivative(self.jet(state.x), state))

    def complete(self, states: CurveState) -> CurveState:
        """Attach J to integrated states when the flow determines it."""
        return states


class ConformalGeodesicFlow(Flow):
    equation = "cg3"
    slots = 3

    def derivative(self, jet, state):
        return cg3_rhs(jet, state)

    def complete(self, states):
        jet = self.jet(states.x) if self._flat is None else self._flat
        return states.with_jerk(cg3_jerk(jet, states))


class MercatorFlow(Flow):
    equation = "mercator4"
    slots = 4
    needs_derivatives = True

    def derivative(self, jet, state):
        return mercator4_rhs(jet, state)


class FlatMercatorFlow(Flow):
    """Flat fourth-order flow in third-order form with a fixed first integral C."""

    equation = "mercator4"
    slots = 3

    def __init__(self, metric: MetricSpec, C):
        if metric.kind != "flat":
            raise ValueError("the C-form of the fourth-order flow is only valid for flat metrics")
        super().__init__(metric)
        self.C = np.asarray(C, dtype=float)
        self.g = self._flat.g

    def derivative(self, jet, state):
        return state.U, state.A, flat_mercator_jerk(state.U, state.A, self.C, self.g)

    def complete(self, states):
        return states.with_jerk(flat_mercator_jerk(states.U, states.A, self.C, self.g))


class GeodesicFlow(Flow):
    equation = "geodesic"
    slots = 2

    def pack(self, state):
        return np.concatenate([state.x, state.U])

    def unpack(self, y):
        x, U = np.asarray(y).reshape(2, self.dim)
        return CurveState(x, U, np.zeros(self.dim))

    def derivative(self, jet, state):
        return state.U, -gamma_contract(jet.christoffel, state.U, state.U)

    def complete(self, states):
        return states


def integrate(flow: Flow, state0: CurveState, t0, t1, method="rkf45", tol=1e-10, samples=None, t_eval=None, h=None):
    """Integrate ``flow`` from ``state0`` and return a :class:`Trajectory`.

    ``samples`` requests that many equally spaced output times (ignored when
    ``t_eval`` is given); ``tol`` is used as both absolute and relative
    tolerance for ``rkf45`` and ``h`` is the fixed step for ``rk4``.
    """
    if t_eval is None and samples is not None:
        t_eval = np.linspace(t0, t1, int(samples))
    sol = ode.solve(flow, t0, t1, flow.pack(state0), method=method, rtol=tol, atol=tol, t_eval=t_eval, h=h)
    states = flow.unpack_many(sol.y) if hasattr(flow, "unpack_many") else _unpack_rows(flow, sol.y)
    states = flow.complete(states)
    return Trajectory(
        t=sol.t,
        x=states.x,
        U=states.U,
        A=states.A,
        J=states.J,
        metric=flow.metric.name,
        equation=flow.equation,
        meta={
            "method": method,
            "tol": tol if method == "rkf45" else None,
            "h": h,
            "accepted_steps": sol.accepted,
            "rejected_steps": sol.rejected,
            "rhs_evaluations": sol.nfev,
        },
    )


def _unpack_rows(flow, Y):
    rows = [flow.unpack(y) for y in Y]
    J = None if rows[0].J is None else np.array([r.J for r in rows])
    return CurveState(np.array([r.x for r in rows]), np.array([r.U for r in rows]), np.array([r.A for r in rows]), J)
