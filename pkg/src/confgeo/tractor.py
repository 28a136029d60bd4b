"""Standard tractor calculus along curves in a fixed metric representative.

A tractor is stored by its components (sigma, mu, rho) in the splitting
determined by the chosen metric g.  Density weights are not tracked as
separate objects; when comparing two metrics g and Omega^2 g the weights enter
through the explicit factors in :func:`tractor_transform`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CurveState, check_velocity
from .geometry import GeometryJet, gamma_contract, inner
from .errors import NullVelocity


@dataclass(frozen=True)
class Tractor:
    sigma: np.ndarray
    mu: np.ndarray
    rho: np.ndarray

    def __add__(self, other):
        return Tractor(self.sigma + other.sigma, self.mu + other.mu, self.rho + other.rho)

    def __sub__(self, other):
        return Tractor(self.sigma - other.sigma, self.mu - other.mu, self.rho - other.rho)

    def stack(self):
        """Components as one array (..., n + 2): sigma, mu^1..mu^n, rho."""
        return np.concatenate([np.asarray(self.sigma)[..., None], self.mu, np.asarray(self.rho)[..., None]], axis=-1)

    @classmethod
    def unstack(cls, arr):
        arr = np.asarray(arr)
        return cls(arr[..., 0], arr[..., 1:-1], arr[..., -1])


def tractor_inner(jet: GeometryJet, X: Tractor, Y: Tractor):
    """<X, Y>_T = <mu_X, mu_Y> + sigma_X rho_Y + rho_X sigma_Y."""
    return inner(jet.g, X.mu, Y.mu) + X.sigma * Y.rho + X.rho * Y.sigma


def tractor_norm(jet: GeometryJet, T: Tractor):
    """<T, T>_T = |mu|^2 + 2 sigma rho."""
    return tractor_inner(jet, T, T)


def tractor_transform(T: Tractor, upsilon, jet: GeometryJet, omega=None):
    """Components of T in the splitting of Omega^2 g, given Upsilon = dOmega / Omega.

    Without ``omega`` the law is applied as is:
    (sigma, mu + Upsilon# sigma, rho - Upsilon(mu) - 1/2 |Upsilon|^2 sigma).
    With ``omega`` the conformal weights (1, -1, -1) of the three slots are
    included, which is what is needed to compare with quantities computed
    directly in the metric Omega^2 g.
    """
    upsilon = np.asarray(upsilon, dtype=float)
    up_sharp = np.einsum("...ab,...b->...a", jet.ginv, upsilon)
    up2 = inner(jet.ginv, upsilon, upsilon)
    sigma = T.sigma
    mu = T.mu + up_sharp * np.asarray(sigma)[..., None]
    rho = T.rho - np.einsum("...a,...a->...", upsilon, T.mu) - 0.5 * up2 * sigma
    if omega is None:
        return Tractor(sigma, mu, rho)
    omega = np.asarray(omega, dtype=float)
    return Tractor(omega * sigma, mu / omega[..., None], rho / omega)


def tractor_connection_derivative(jet: GeometryJet, U, T: Tractor, T_dot: Tractor):
    """U^a D_a T from the coordinate time derivatives ``T_dot`` of T's components."""
    sigma, mu, rho = T.sigma, T.mu, T.rho
    U_low = np.einsum("...ab,...b->...a", jet.g, U)
    top = T_dot.sigma - np.einsum("...a,...a->...", U_low, mu)
    middle = (
        T_dot.mu
        + gamma_contract(jet.christoffel, U, mu)
        + np.einsum("...ab,...b->...a", jet.schouten_sharp, U) * np.asarray(sigma)[..., None]
        + U * np.asarray(rho)[..., None]
    )
    bottom = T_dot.rho - inner(jet.schouten, U, mu)
    return Tractor(top, middle, bottom)


def _speed(jet, U):
    U2 = check_velocity(jet, U)
    if np.any(U2 <= 0):
        raise NullVelocity("tractor velocity needs |U|^2 > 0")
    return U2, np.sqrt(U2)


def velocity_tractor(jet: GeometryJet, state: CurveState) -> Tractor:
    """(0, U/|U|, -<U, A>/|U|^3)."""
    U2, s = _speed(jet, state.U)
    UA = inner(jet.g, state.U, state.A)
    return Tractor(np.zeros_like(s), state.U / s[..., None], -UA / s**3)


def acceleration_tractor(jet: GeometryJet, state: CurveState) -> Tractor:
    """U^a D_a of the velocity tractor, in closed form from the 3-jet."""
    if state.J is None:
        raise ValueError("the acceleration tractor needs a 3-jet")
    g, U, A, J = jet.g, state.U, state.A, state.J
    U2, s = _speed(jet, U)
    UA = inner(g, U, A)
    sigma = -s
    mu = A / s[..., None] - (2 * UA / s**3)[..., None] * U
    rho = -(inner(g, A, A) + inner(g, U, J)) / s**3 + 3 * UA**2 / s**5 - inner(jet.schouten, U, U) / s
    return Tractor(sigma, mu, rho)


def velocity_tractor_rate(jet: GeometryJet, state: CurveState) -> Tractor:
    """Coordinate time derivative of the velocity tractor's components (needs J)."""
    g, U, A, J = jet.g, state.U, state.A, state.J
    U2, s = _speed(jet, U)
    UA = inner(g, U, A)
    s_dot = UA / s
    # coordinate rates of U and of the components of A
    U_dot = A - gamma_contract(jet.christoffel, U, U)
    d_UA = inner(g, A, A) + inner(g, U, J)
    mu_dot = U_dot / s[..., None] - (s_dot / s**2)[..., None] * U
    rho_dot = -d_UA / s**3 + 3 * UA * s_dot / s**4
    return Tractor(np.zeros_like(s), mu_dot, rho_dot)


def tractor_kinetic_energy(jet: GeometryJet, state: CurveState):
    """1/2 <A, A>_T for the acceleration tractor A."""
    return 0.5 * tractor_norm(jet, acceleration_tractor(jet, state))


def acceleration_tractor_rate(jets: GeometryJet, states: CurveState, t, width=7) -> Tractor:
    """Tractor derivative dA/dt of the acceleration tractor along a sampled curve.

    The coordinate derivatives of A's components are taken with ``width``-point
    finite-difference stencils on the uniform grid ``t``; the connection terms
    are then added pointwise.
    """
    from .variational import sampled_jet

    A = acceleration_tractor(jets, states)
    comp = A.stack()
    rates = sampled_jet(t, comp, order=1, width=width)[:, 1]
    return tractor_connection_derivative(jets, states.U, A, Tractor.unstack(rates))


def tractor_norm_rate_identity(jets: GeometryJet, states: CurveState, t, T: Tractor, T_dot: Tractor, width=7):
    """Residual of d/dt <T,T>_T = 2 <D_U T, T>_T along sampled curves.

    ``T_dot`` are the coordinate rates of T's components; d/dt of the norm is
    taken by finite differences on the grid ``t``.
    """
    from .variational import sampled_jet

    norm = tractor_norm(jets, T)
    lhs = sampled_jet(t, norm[:, None], order=1, width=width)[:, 1, 0]
    rhs = 2 * tractor_inner(jets, tractor_connection_derivative(jets, states.U, T, T_dot), T)
    return lhs - rhs
