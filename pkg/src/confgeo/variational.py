"""The functional I = int L dt, its first variation, and two-point shooting.

The first-variation formula is checked against an independent route: the
functional is re-evaluated on the perturbed curves X +- sV and differenced in
s.  The two routes share only the Lagrangian evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import simpson

from . import ode
from . import taylor as tl
from .dynamics import (
    CurveState,
    D_op,
    D_squared,
    E_vector,
    K_vector,
    MercatorFlow,
    FlatMercatorFlow,
    integrate,
    mercator_C,
    state_from_coordinates,
    variation_derivatives,
)
from .errors import InputError, NoConvergence, PatchExit
from .geometry import MetricSpec, geometry_jet, inner, take_jet
from .oracles import AnalyticCurve
from .taylor import Taylor
from .trajectory import Trajectory

DEFAULT_SAMPLES = 2001


class Quadrature(NamedTuple):
    value: float
    error: float


class VariationFD(NamedTuple):
    value: float  # Richardson-extrapolated central difference
    raw: float  # central difference with step s
    raw_half: float  # central difference with step s/2
    s: float


# ---------------------------------------------------------------------------
# variation fields


def VariationField(fn: Callable, dim: int, name="V") -> AnalyticCurve:
    """A vector field along a curve given by a Taylor-compatible map of t."""
    return AnalyticCurve(fn, dim, name)


def _window(t, a, b):
    """Mask that zeroes a Taylor object (or array) outside (a, b)."""
    tv = tl.value(t)
    return ((tv > a) & (tv < b)).astype(float)


def bump_field(a, b, direction, power=4, modulation=None):
    """V(t) = ((t - a)(b - t))^power * w(t) on (a, b), zero elsewhere.

    ``w`` is the constant ``direction`` or, if given, ``modulation(t)``.
    With power >= 3, V, its first and second derivatives vanish at a and b.
    """
    direction = np.asarray(direction, dtype=float)

    def fn(t):
        base = ((t - a) * (b - t)) ** power
        w = modulation(t) if modulation is not None else direction
        v = base * w
        mask = _window(t, a, b)
        if isinstance(v, Taylor):
            return Taylor(v.c * mask)
        return v * mask

    return VariationField(fn, len(direction), "bump")


def polynomial_field(coeffs):
    """V(t) = sum_k coeffs[k] t^k with vector coefficients, shape (K, n)."""
    coeffs = np.asarray(coeffs, dtype=float)

    def fn(t):
        out = 0 * t + coeffs[-1]
        for c in coeffs[-2::-1]:
            out = out * t + c
        return out

    return VariationField(fn, coeffs.shape[-1], "polynomial")


def trig_field(amplitudes, frequencies, phases):
    """V^a(t) = amplitudes[a] sin(frequencies[a] t + phases[a])."""
    amp, freq, ph = (np.asarray(v, dtype=float) for v in (amplitudes, frequencies, phases))
    return VariationField(lambda t: amp * tl.sin(freq * t + ph), len(amp), "trig")


# ---------------------------------------------------------------------------
# quadrature helpers


def _simpson_with_error(y, t):
    """Composite Simpson on the grid and an error estimate from the half grid."""
    full = simpson(y, x=t)
    if len(t) >= 5 and (len(t) - 1) % 2 == 0:
        half = simpson(y[::2], x=t[::2])
        err = abs(full - half) / 15
    else:
        err = float("nan")
    return Quadrature(float(full), float(err))


def _grid(t0, t1, samples):
    if t1 == t0:
        raise InputError("t1 must differ from t0")
    samples = int(samples)
    if samples < 5:
        raise InputError("need at least 5 samples")
    if samples % 2 == 0:
        samples += 1  # Simpson wants an even number of intervals
    return np.linspace(t0, t1, samples)


def _check_patch(metric: MetricSpec, x):
    if not metric.in_patch(x):
        raise PatchExit(f"curve leaves the coordinate patch of {metric.name}")


def curve_states(metric: MetricSpec, curve: AnalyticCurve, t, derivatives=False):
    """Geometry jets and covariant 3-jets of ``curve`` at times ``t``."""
    xjet = curve.jet(t, 3)
    _check_patch(metric, xjet[..., 0, :])
    jet = geometry_jet(metric, xjet[..., 0, :], derivatives=derivatives)
    state, _ = state_from_coordinates(jet, xjet)
    return jet, state, xjet


# ---------------------------------------------------------------------------
# functional


def lagrangian_along(metric: MetricSpec, curve: AnalyticCurve, t):
    jet, state, _ = curve_states(metric, curve, t)
    E = E_vector(jet, state)
    return inner(jet.g, state.U, E) / inner(jet.g, state.U, state.U)


def functional_I(metric: MetricSpec, source, t0=None, t1=None, samples=DEFAULT_SAMPLES) -> Quadrature:
    """I = int L dt by composite Simpson, with an error estimate.

    ``source`` is a :class:`Trajectory` carrying 3-jets (its sample grid is
    used) or an :class:`AnalyticCurve` sampled on ``samples`` points of
    [t0, t1].
    """
    if isinstance(source, Trajectory):
        if source.J is None:
            raise InputError("functional_I needs a trajectory with jerk samples")
        _check_patch(metric, source.x)
        jet = geometry_jet(metric, source.x, derivatives=False)
        state = source.states()
        L = inner(jet.g, state.U, E_vector(jet, state)) / inner(jet.g, state.U, state.U)
        return _simpson_with_error(L, source.t)
    t = _grid(t0, t1, samples)
    return _simpson_with_error(lagrangian_along(metric, source, t), t)


# ---------------------------------------------------------------------------
# first variation: formula


@dataclass
class VariationTerms:
    t: np.ndarray
    jet: object
    state: CurveState
    E: np.ndarray
    L: np.ndarray
    K: np.ndarray
    V: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    DV: np.ndarray

    def weight(self):
        return 1.0 / inner(self.jet.g, self.state.U, self.state.U)


def _variation_terms(metric, curve, V, t):
    if V.dim != curve.dim:
        raise InputError("variation field and curve dimensions differ")
    jet, state, xjet = curve_states(metric, curve, t, derivatives=True)
    E = E_vector(jet, state)
    U2 = inner(jet.g, state.U, state.U)
    L = inner(jet.g, state.U, E) / U2
    K = K_vector(jet, state)
    v, v1, v2 = variation_derivatives(jet, xjet, V.jet(t, 2))
    DV = D_op(jet, state, v, v1)
    return VariationTerms(t, jet, state, E, L, K, v, v1, v2, DV)


def boundary_B(terms: VariationTerms, idx=slice(None)):
    """B(V) = |U|^-2 (<U, D^2 V> - <E - 2 L U, V>) at the selected samples."""
    st = terms.state
    pick = lambda a: None if a is None else a[idx]  # noqa: E731
    sub_state = CurveState(pick(st.x), pick(st.U), pick(st.A), pick(st.J))
    sub = take_jet(terms.jet, idx)
    D2 = D_squared(sub, sub_state, terms.V[idx], terms.V1[idx], terms.V2[idx])
    U2 = inner(sub.g, sub_state.U, sub_state.U)
    F = terms.E[idx] - 2 * terms.L[idx][..., None] * sub_state.U
    return (inner(sub.g, sub_state.U, D2) - inner(sub.g, F, terms.V[idx])) / U2


def first_variation_formula(metric: MetricSpec, curve: AnalyticCurve, V: AnalyticCurve, t0, t1,
                            samples=DEFAULT_SAMPLES):
    """(integral term, boundary term) of the first variation of I along ``curve``.

    integral = int |U|^-2 (<K, V> - <E - 2 L U, D(V)>) dt,
    boundary = B(V)(t1) - B(V)(t0).
    """
    t = _grid(t0, t1, samples)
    terms = _variation_terms(metric, curve, V, t)
    g, U = terms.jet.g, terms.state.U
    F = terms.E - 2 * terms.L[..., None] * U
    integrand = terms.weight() * (inner(g, terms.K, terms.V) - inner(g, F, terms.DV))
    integral = simpson(integrand, x=t)
    B = boundary_B(terms, [0, -1])
    return float(integral), float(B[1] - B[0])


def weyl_pairing(metric: MetricSpec, curve: AnalyticCurve, V: AnalyticCurve, t0, t1, samples=DEFAULT_SAMPLES):
    """int |U|^-2 <K, V> dt (vanishes on conformally flat metrics)."""
    t = _grid(t0, t1, samples)
    terms = _variation_terms(metric, curve, V, t)
    return float(simpson(terms.weight() * inner(terms.jet.g, terms.K, terms.V), x=t))


# ---------------------------------------------------------------------------
# first variation: finite differences


def fornberg_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative at 0 on the given offsets."""
    x = np.asarray(offsets, dtype=float)
    m = len(x)
    c = np.zeros((m, order + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def sampled_jet(t, X, order=3, width=7):
    """Derivatives of uniformly sampled X up to ``order`` by ``width``-point stencils.

    Stencils are centered in the interior and shifted inwards near the ends.
    Returns shape ``(len(t), order + 1, n)``.
    """
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    m = len(t)
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
        raise InputError("sampled_jet needs a uniform grid")
    half = width // 2
    out = np.empty((m, order + 1) + X.shape[1:])
    out[:, 0] = X
    cache = {}
    for i in range(m):
        start = min(max(i - half, 0), m - width)
        off = tuple(range(start - i, start - i + width))
        if off not in cache:
            cache[off] = [fornberg_weights(off, k) for k in range(1, order + 1)]
        block = X[start : start + width]
        for k, w in enumerate(cache[off], start=1):
            out[i, k] = np.tensordot(w, block, axes=(0, 0)) / h**k
    return out


def _perturbed_functional(metric, curve, V, s, t, jets):
    if jets == "exact":
        pert = AnalyticCurve(lambda tt: curve.fn(tt) + s * V.fn(tt), curve.dim, "perturbed")
        return simpson(lagrangian_along(metric, pert, t), x=t)
    X = curve(t) + s * V(t)
    _check_patch(metric, X)
    xjet = sampled_jet(t, X, order=3)
    jet = geometry_jet(metric, X, derivatives=False)
    state, _ = state_from_coordinates(jet, xjet)
    L = inner(jet.g, state.U, E_vector(jet, state)) / inner(jet.g, state.U, state.U)
    return simpson(L, x=t)


def auto_s_step(curve: AnalyticCurve, V: AnalyticCurve, t, base=1e-2):
    """Perturbation size keeping s V and its t-derivatives small against the curve's speed.

    L depends on the jet up to third order, so the largest of |V|, |V'|, |V''|
    and |V'''| is compared with the slowest speed of the curve: a step with
    s|V^(k)| comparable to |U| makes the perturbed Lagrangian strongly
    nonlinear in s.
    """
    speed = np.min(np.linalg.norm(curve.jet(t, 1)[:, 1], axis=-1))
    size = max(float(np.max(np.linalg.norm(V.jet(t, 3), axis=-1))), 1e-300)
    return float(min(base, base * speed / size))


def first_variation_fd(metric: MetricSpec, curve: AnalyticCurve, V: AnalyticCurve, t0, t1, s_step=None,
                       samples=DEFAULT_SAMPLES, jets="exact") -> VariationFD:
    """dI/ds at s = 0 along X + sV by central differences with Richardson extrapolation.

    ``jets="exact"`` differentiates the perturbed curves exactly in t (Taylor
    arithmetic); ``jets="stencil"`` samples them and uses 7-point stencils.
    Without ``s_step`` the step comes from :func:`auto_s_step`.
    """
    if jets not in ("exact", "stencil"):
        raise InputError("jets must be 'exact' or 'stencil'")
    t = _grid(t0, t1, samples)
    if s_step is None:
        s_step = auto_s_step(curve, V, t)

    def central(s):
        return (_perturbed_functional(metric, curve, V, s, t, jets)
                - _perturbed_functional(metric, curve, V, -s, t, jets)) / (2 * s)

    d1, d2 = central(s_step), central(s_step / 2)
    return VariationFD(float((4 * d2 - d1) / 3), float(d1), float(d2), s_step)


def first_variation_check(metric, curve, V, t0, t1, samples=DEFAULT_SAMPLES, s_step=None, jets="exact"):
    """Compare the first-variation formula with the finite-difference derivative."""
    integral, boundary = first_variation_formula(metric, curve, V, t0, t1, samples)
    fd = first_variation_fd(metric, curve, V, t0, t1, s_step, samples, jets)
    formula = integral + boundary
    scale = max(abs(fd.value), abs(formula), 1e-300)
    return {
        "integral": integral,
        "boundary": boundary,
        "formula": formula,
        "fd": fd.value,
        "abs_error": abs(formula - fd.value),
        "rel_error": abs(formula - fd.value) / scale,
    }


# ---------------------------------------------------------------------------
# stationarity


def variation_panel(dim, t0, t1, count=6, seed=0):
    """Compactly supported fields on all of (t0, t1) with V = DV = D^2 V = 0 at both ends.

    The fields have unit peak and span the whole interval, so the perturbed
    Lagrangians stay resolved on the default quadrature grid.
    """
    rng = np.random.default_rng(seed)
    span = t1 - t0
    panel = []
    for k in range(count):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction) * (0.5 * span) ** 8
        if k % 2 == 0:
            panel.append(bump_field(t0, t1, direction))
        else:
            freq = rng.uniform(0.5, 1.5, size=dim) / span
            ph = rng.uniform(0, 2 * np.pi, size=dim)
            panel.append(bump_field(t0, t1, direction, modulation=lambda tt, d=direction, f=freq, p=ph: d * tl.sin(f * tt + p)))
    return panel


def _smoothstep(s):
    """C^4 step on [0, 1]: the normalized integral of s^4 (1 - s)^4."""
    return s**5 * (126 + s * (-420 + s * (540 + s * (-315 + 70 * s))))


def step_field(a, b, coeffs, center, rising=True):
    """V = phi(t) sum_k coeffs[k] (t - center)^k with phi a C^4 step.

    phi goes from 0 (t <= a) to 1 (t >= b), or the reverse when ``rising`` is
    false, so V vanishes to fourth order at one end of the interval.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    def fn(t):
        tv = tl.value(t)
        inside = ((tv > a) & (tv < b)).astype(float)
        outside = (tv >= b).astype(float) if rising else (tv <= a).astype(float)
        s = (t - a) / (b - a)
        phi = _smoothstep(s) if rising else 1 - _smoothstep(s)
        if isinstance(phi, Taylor):
            const = np.zeros_like(phi.c)
            const[0] = outside
            phi = Taylor(phi.c * inside + const)
        else:
            phi = phi * inside + outside
        poly = 0 * t + coeffs[-1]
        for c in coeffs[-2::-1]:
            poly = poly * (t - center) + c
        return phi * poly

    return VariationField(fn, coeffs.shape[-1], "step")


def _class_defect(metric, curve, V, t0, t1, samples):
    """B(V)|_{t0}^{t1} + K(V): zero exactly for members of the admissible class."""
    _, boundary, kv = first_variation_formula_parts(metric, curve, V, t0, t1, samples)
    return boundary + kv


def balanced_step_panel(metric: MetricSpec, curve: AnalyticCurve, t0, t1, samples=DEFAULT_SAMPLES):
    """Fields V = phi (W0 + kappa/2 (t - t_end)^2 W2) with B(V)|_{t0}^{t1} = -K(V).

    phi steps up across [t0 + 0.1 span, t0 + 0.9 span], so V vanishes near one end and
    equals a quadratic near t_end.  For each basis vector W0 the coefficient
    kappa of the quadratic correction is solved from the class condition
    (linear in kappa): the correction has zero value and first derivative at
    t_end but a free second derivative, which is what lets B be balanced.
    Both orientations (t_end = t1 and t_end = t0) are included.
    """
    n = curve.dim
    span = t1 - t0
    a, b = t0 + 0.1 * span, t0 + 0.9 * span
    panel = []
    for rising, t_end in ((True, t1), (False, t0)):
        zeros = np.zeros(n)
        corr = [_class_defect(metric, curve, step_field(a, b, [zeros, zeros, 0.5 * e], t_end, rising), t0, t1, samples)
                for e in np.eye(n)]
        j = int(np.argmax(np.abs(corr)))
        if abs(corr[j]) == 0:
            continue
        for W0 in np.eye(n):
            base = _class_defect(metric, curve, step_field(a, b, [W0], t_end, rising), t0, t1, samples)
            kappa = -base / corr[j]
            panel.append(step_field(a, b, [W0, zeros, 0.5 * kappa * np.eye(n)[j]], t_end, rising))
    return panel


def first_variation_formula_parts(metric, curve, V, t0, t1, samples=DEFAULT_SAMPLES):
    """(integral of -<E - 2LU, D(V)>/|U|^2, boundary term, K(V)) separately."""
    t = _grid(t0, t1, samples)
    terms = _variation_terms(metric, curve, V, t)
    g, U = terms.jet.g, terms.state.U
    F = terms.E - 2 * terms.L[..., None] * U
    w = terms.weight()
    B = boundary_B(terms, [0, -1])
    return (float(simpson(-w * inner(g, F, terms.DV), x=t)), float(B[1] - B[0]),
            float(simpson(w * inner(g, terms.K, terms.V), x=t)))


def stationarity_check(metric: MetricSpec, curve: AnalyticCurve, t0, t1, tolerance=1e-7, panel=None,
                       samples=DEFAULT_SAMPLES, s_step=None):
    """Evaluate delta I on a panel of variations with B(V)|_{t0}^{t1} = -K(V).

    The default panel holds compactly supported bumps (V, D(V), D^2(V) vanish
    at the ends; this satisfies the condition when K = 0) and boundary-balanced
    step fields from :func:`balanced_step_panel`.  A curve solving the fourth
    order equation but not the conformal geodesic equation is stationary for
    the bumps and is exposed by the step fields.
    """
    if panel is None:
        panel = variation_panel(curve.dim, t0, t1) + balanced_step_panel(metric, curve, t0, t1, samples)
    rows = []
    for V in panel:
        integral, boundary, kv = first_variation_formula_parts(metric, curve, V, t0, t1, samples)
        fd = first_variation_fd(metric, curve, V, t0, t1, s_step, samples)
        rows.append({"field": V.name, "formula": integral + boundary + kv, "fd": fd.value,
                     "boundary_plus_K": boundary + kv})
    worst = max(abs(r["fd"]) for r in rows)
    return {
        "stationary": bool(worst <= tolerance),
        "max_abs_delta_I": worst,
        "tolerance": tolerance,
        "variations": rows,
    }


# ---------------------------------------------------------------------------
# two-point boundary value problem


@dataclass
class BvpProblem:
    metric: MetricSpec
    x0: np.ndarray
    U0: np.ndarray
    x1: np.ndarray
    U1: np.ndarray
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        for k in ("x0", "U0", "x1", "U1"):
            setattr(self, k, np.asarray(getattr(self, k), dtype=float))
        if self.t1 == self.t0:
            raise InputError("t1 must differ from t0")
        if np.allclose(self.x0, self.x1):
            raise InputError("endpoints must be distinct")
        if np.linalg.norm(self.U0) == 0 or np.linalg.norm(self.U1) == 0:
            raise InputError("end tangents must be nonzero")


@dataclass
class BvpResult:
    trajectory: Trajectory
    A0: np.ndarray
    J0: np.ndarray
    residual: float
    iterations: int
    trace: list = field(default_factory=list)


def _shoot_flow(problem: BvpProblem, Z):
    """Flow and stacked initial states for a batch of unknowns Z (rows (A0, J0))."""
    n = problem.metric.dim
    Z = np.atleast_2d(Z)
    A0, J0 = Z[:, :n], Z[:, n:]
    x0 = np.broadcast_to(problem.x0, A0.shape)
    U0 = np.broadcast_to(problem.U0, A0.shape)
    if problem.metric.kind == "flat":
        # the first integral turns the flat equation into a third-order flow
        eta = np.diag(problem.metric.signature).astype(float)
        flow = FlatMercatorFlow(problem.metric, mercator_C(CurveState(x0, U0, A0, J0), eta))
        return flow, CurveState(x0, U0, A0)
    return MercatorFlow(problem.metric), CurveState(x0, U0, A0, J0)


class _BatchedFlow:
    """Runs one flow on m initial states at once, sharing the step sequence."""

    def __init__(self, flow, m):
        self.flow, self.m = flow, m

    def __call__(self, t, y):
        rows = np.asarray(y).reshape(self.m, self.flow.slots, self.flow.dim)
        state = CurveState(*(rows[:, k] for k in range(self.flow.slots)), *([None] * (4 - self.flow.slots)))
        d = self.flow.derivative(self.flow.jet(state.x), state)
        return np.stack(d, axis=1).ravel()


def _shoot_batch(problem: BvpProblem, Z, tol):
    """Endpoint residuals (x(t1) - x1, U(t1) - U1) for every row of Z."""
    flow, state0 = _shoot_flow(problem, Z)
    m = len(state0.x)
    parts = [state0.x, state0.U, state0.A, state0.J][: flow.slots]
    y0 = np.stack(parts, axis=1).ravel()
    sol = ode.solve(_BatchedFlow(flow, m), problem.t0, problem.t1, y0, rtol=tol, atol=tol)
    end = sol.y[-1].reshape(m, flow.slots, flow.dim)
    return np.concatenate([end[:, 0] - problem.x1, end[:, 1] - problem.U1], axis=1)


def _shoot(problem: BvpProblem, z, tol, samples=None):
    flow, state0 = _shoot_flow(problem, z)
    state0 = CurveState(*(None if v is None else v[0] for v in (state0.x, state0.U, state0.A, state0.J)))
    if isinstance(flow, FlatMercatorFlow):
        flow.C = flow.C[0]
    tr = integrate(flow, state0, problem.t0, problem.t1, tol=tol, samples=samples)
    res = np.concatenate([tr.x[-1] - problem.x1, tr.U[-1] - problem.U1])
    return res, tr


def bvp_shoot(problem: BvpProblem, guess=None, tol=1e-12, max_iter=100, damping=1e-3, fd_step=1e-6,
              converge=1e-8, samples=None) -> BvpResult:
    """Levenberg-Marquardt shooting on (A0, J0) for the fourth-order equation."""
    n = problem.metric.dim
    z = np.zeros(2 * n) if guess is None else np.asarray(guess, dtype=float).copy()
    if z.shape != (2 * n,):
        raise InputError(f"guess must have {2 * n} entries (A0, J0)")
    lam = damping
    r, _ = _shoot(problem, z, tol)
    cost = 0.5 * r @ r
    trace = [{"iteration": 0, "residual": float(np.sqrt(2 * cost)), "damping": lam}]
    best = (np.sqrt(2 * cost), z.copy())
    it = 0
    while np.sqrt(2 * cost) >= converge:
        if it >= max_iter:
            raise NoConvergence(f"no convergence after {it} iterations", iterations=it, best_residual=float(best[0]))
        it += 1
        # central differences, all 4n perturbed shots integrated as one batch
        steps = fd_step * np.maximum(1.0, np.abs(z))
        dZ = np.diag(steps)
        R = _shoot_batch(problem, np.concatenate([z + dZ, z - dZ]), tol)
        Jm = ((R[: 2 * n] - R[2 * n :]) / (2 * steps[:, None])).T
        JTJ, g = Jm.T @ Jm, Jm.T @ r
        accepted = False
        for _ in range(30):
            step = -np.linalg.solve(JTJ + lam * np.diag(np.maximum(np.diag(JTJ), 1e-12)), g)
            try:
                r_new, _ = _shoot(problem, z + step, tol)
            except Exception:  # integration blew up: treat as a failed trial step
                lam *= 10
                continue
            cost_new = 0.5 * r_new @ r_new
            predicted = -(g @ step + 0.5 * step @ JTJ @ step)
            rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
            if rho > 0:
                z, r, cost = z + step, r_new, cost_new
                lam *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
                accepted = True
                break
            lam *= 4
        trace.append({"iteration": it, "residual": float(np.sqrt(2 * cost)), "damping": lam, "accepted": accepted})
        if np.sqrt(2 * cost) < best[0]:
            best = (np.sqrt(2 * cost), z.copy())
        if not accepted:
            raise NoConvergence("Levenberg-Marquardt step could not reduce the residual", iterations=it,
                                best_residual=float(best[0]))
    _, tr = _shoot(problem, z, tol, samples=samples)
    tr.meta["bvp_iterations"] = it
    return BvpResult(tr, z[:n].copy(), z[n:].copy(), float(np.sqrt(2 * cost)), it, trace)


def trace_csv(trace):
    lines = ["iteration,residual,damping,accepted"]
    for row in trace:
        lines.append(f"{row['iteration']},{row['residual']:.17g},{row['damping']:.17g},{int(row.get('accepted', True))}")
    return "\n".join(lines) + "\n"

