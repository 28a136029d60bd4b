"""Metrics, conformal factors and the pointwise curvature hierarchy.

Array conventions (``...`` is an optional batch of points):

* ``g[..., a, b]``                      metric components
* ``dg[..., c, a, b]``                  partial_c g_ab
* ``d2g[..., c, d, a, b]``              partial_c partial_d g_ab
* ``d3g[..., c, d, e, a, b]``           third partials
* ``christoffel[..., a, b, c]``         Gamma^a_bc
* ``riemann[..., a, b, c, d]``          R^a_bcd with R(d_c, d_d) d_b = R^a_bcd d_a
* ``ricci[..., a, b]``                  r_ab = R^c_acb
* ``weyl[..., a, b, c, d]``             W^a_bcd, same slot layout as ``riemann``
* ``nabla_schouten[..., c, a, b]``      nabla_c P_ab

Derivatives of curvature (``partial P`` and ``partial partial Gamma``) are
obtained from the analytic third partials by complex-step differentiation of
the curvature pipeline, which is exact to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionTooSmall, SingularMetric, ZeroFactor

DEFAULT_FD_STEP = 1e-4
DET_THRESHOLD = 1e-12
_CSTEP = 1e-30

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# small tensor helpers (batch-aware, complex-safe)


def inner(g, u, v):
    return np.einsum("...ab,...a,...b->...", g, u, v)


def lower(g, v):
    return np.einsum("...ab,...b->...a", g, v)


def raise_index(ginv, w):
    return np.einsum("...ab,...b->...a", ginv, w)


def gamma_contract(christoffel, u, v):
    """Gamma^a_bc u^b v^c."""
    return np.einsum("...abc,...b,...c->...a", christoffel, u, v)


def central_difference(f: ArrayFn, x: np.ndarray, h: float) -> np.ndarray:
    """Derivative of ``f`` along every coordinate, new axis right after the batch."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for c in range(n):
        e = np.zeros(n)
        e[c] = h
        cols.append((f(x + e) - f(x - e)) / (2.0 * h))
    return np.stack(cols, axis=x.ndim - 1)


# ---------------------------------------------------------------------------
# conformal factors


@dataclass(frozen=True)
class ConformalFactor:
    """A nowhere-zero function Omega with (optional) analytic partials."""

    omega: ArrayFn
    grad: Optional[ArrayFn] = None
    hess: Optional[ArrayFn] = None
    third: Optional[ArrayFn] = None
    name: str = "custom"

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        w = np.asarray(self.omega(np.asarray(x, dtype=float)), dtype=float)
        if np.any(np.abs(w) == 0.0):
            raise ZeroFactor(f"conformal factor {self.name} vanishes at {x}")
        return w

    def gradient(self, x, h=DEFAULT_FD_STEP):
        if self.grad is not None:
            return np.asarray(self.grad(np.asarray(x, dtype=float)), dtype=float)
        return central_difference(self.value, x, h)

    def hessian(self, x, h=DEFAULT_FD_STEP):
        if self.hess is not None:
            return np.asarray(self.hess(np.asarray(x, dtype=float)), dtype=float)
        return central_difference(lambda y: self.gradient(y, h), x, h)

    def third_derivative(self, x, h=DEFAULT_FD_STEP):
        if self.third is not None:
            return np.asarray(self.third(np.asarray(x, dtype=float)), dtype=float)
        return central_difference(lambda y: self.hessian(y, h), x, h)

    @property
    def analytic_order(self):
        order = 0
        for fn in (self.grad, self.hess, self.third):
            if fn is None:
                break
            order += 1
        return order

    def upsilon(self, x):
        """The one-form Upsilon_a = Omega^-1 partial_a Omega."""
        return self.gradient(x) / self.value(x)[..., None]

    def d_upsilon(self, x):
        """partial_a Upsilon_b."""
        w = self.value(x)[..., None, None]
        dw = self.gradient(x)
        return self.hessian(x) / w - np.einsum("...a,...b->...ab", dw, dw) / w**2

    def inverse(self) -> "ConformalFactor":
        """The factor 1/Omega (analytic partials carried over when available)."""
        f = self

        def omega(x):
            return 1.0 / f.value(x)

        def grad(x):
            return -f.gradient(x) / f.value(x)[..., None] ** 2

        def hess(x):
            w = f.value(x)[..., None, None]
            dw = f.gradient(x)
            return -f.hessian(x) / w**2 + 2 * np.einsum("...a,...b->...ab", dw, dw) / w**3

        def third(x):
            w = f.value(x)[..., None, None, None]
            d1, d2, d3 = f.gradient(x), f.hessian(x), f.third_derivative(x)
            sym = (
                np.einsum("...ab,...c->...abc", d2, d1)
                + np.einsum("...ac,...b->...abc", d2, d1)
                + np.einsum("...bc,...a->...abc", d2, d1)
            )
            return -d3 / w**2 + 2 * sym / w**3 - 6 * np.einsum("...a,...b,...c->...abc", d1, d1, d1) / w**4

        k = self.analytic_order
        return ConformalFactor(
            omega,
            grad if k >= 1 else None,
            hess if k >= 2 else None,
            third if k >= 3 else None,
            name=f"1/({self.name})",
        )

    def __mul__(self, other: "ConformalFactor") -> "ConformalFactor":
        a, b = self, other
        k = min(a.analytic_order, b.analytic_order)

        def omega(x):
            return a.value(x) * b.value(x)

        def grad(x):
            return a.gradient(x) * b.value(x)[..., None] + a.value(x)[..., None] * b.gradient(x)

        def hess(x):
            va, vb = a.value(x)[..., None, None], b.value(x)[..., None, None]
            ga, gb = a.gradient(x), b.gradient(x)
            return (
                a.hessian(x) * vb
                + va * b.hessian(x)
                + np.einsum("...a,...b->...ab", ga, gb)
                + np.einsum("...a,...b->...ab", gb, ga)
            )

        def third(x):
            return _leibniz3(
                (a.value(x), a.gradient(x), a.hessian(x), a.third_derivative(x)),
                (b.value(x), b.gradient(x), b.hessian(x), b.third_derivative(x)),
            )

        return ConformalFactor(
            omega,
            grad if k >= 1 else None,
            hess if k >= 2 else None,
            third if k >= 3 else None,
            name=f"({a.name})*({b.name})",
        )

    # -- built-in factors ----------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "ConformalFactor":
        if c == 0:
            raise ZeroFactor("constant conformal factor must be nonzero")

        def omega(x):
            return np.full(np.shape(x)[:-1], float(c))

        def zeros(order):
            return lambda x: np.zeros(np.shape(x)[:-1] + (np.shape(x)[-1],) * order)

        return cls(omega, zeros(1), zeros(2), zeros(3), name=f"const({c:g})")

    @classmethod
    def sphere(cls, radius: float = 1.0) -> "ConformalFactor":
        """Omega = 2R / (1 + |x|^2): flat metric -> round sphere of radius R."""
        R = float(radius)

        def q(x):
            return 1.0 + np.einsum("...a,...a->...", x, x)

        def omega(x):
            return 2 * R / q(x)

        def grad(x):
            return -4 * R * x / q(x)[..., None] ** 2

        def hess(x):
            n = x.shape[-1]
            qq = q(x)[..., None, None]
            return R * (-4 * np.eye(n) / qq**2 + 16 * np.einsum("...a,...b->...ab", x, x) / qq**3)

        def third(x):
            n = x.shape[-1]
            qq = q(x)[..., None, None, None]
            d = np.eye(n)
            sym = (
                np.einsum("ab,...c->...abc", d, x)
                + np.einsum("ac,...b->...abc", d, x)
                + np.einsum("bc,...a->...abc", d, x)
            )
            return R * (16 * sym / qq**3 - 96 * np.einsum("...a,...b,...c->...abc", x, x, x) / qq**4)

        return cls(omega, grad, hess, third, name=f"sphere(R={R:g})")

    @classmethod
    def exponential(cls, k, amplitude: float = 1.0) -> "ConformalFactor":
        """Omega = amplitude * exp(<k, x>)."""
        k = np.asarray(k, dtype=float)
        amp = float(amplitude)

        def omega(x):
            return amp * np.exp(x @ k)

        def grad(x):
            return omega(x)[..., None] * k

        def hess(x):
            return omega(x)[..., None, None] * np.outer(k, k)

        def third(x):
            return omega(x)[..., None, None, None] * np.einsum("a,b,c->abc", k, k, k)

        return cls(omega, grad, hess, third, name=f"exp(k={k.tolist()})")

    @classmethod
    def from_expr(cls, expr: str, dim: int) -> "ConformalFactor":
        """Parse ``expr`` in the coordinates ``x0 .. x{dim-1}`` with sympy."""
        import sympy as sp

        xs = sp.symbols(f"x0:{dim}")
        try:
            w = sp.sympify(expr, locals={str(s): s for s in xs})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ConfigError(f"cannot parse conformal factor {expr!r}: {exc}") from exc
        extra = w.free_symbols - set(xs)
        if extra:
            raise ConfigError(f"unknown symbols in conformal factor: {sorted(map(str, extra))}")
        d1 = [sp.diff(w, a) for a in xs]
        d2 = [[sp.diff(f, b) for b in xs] for f in d1]
        d3 = [[[sp.diff(f, c) for c in xs] for f in row] for row in d2]
        return cls(
            _lambdify_array(xs, w),
            _lambdify_array(xs, d1),
            _lambdify_array(xs, d2),
            _lambdify_array(xs, d3),
            name=str(expr),
        )


def _lambdify_array(xs, exprs):
    """Vectorized numpy evaluator for a (nested list of) sympy expression(s)."""
    import sympy as sp

    arr = np.array(exprs, dtype=object)
    shape = arr.shape
    flat = [sp.sympify(e) for e in arr.ravel()]
    fns = [sp.lambdify(xs, e, modules="numpy") for e in flat]

    def fn(x):
        x = np.asarray(x, dtype=float)
        args = [x[..., i] for i in range(x.shape[-1])]
        batch = x.shape[:-1]
        vals = [np.broadcast_to(np.asarray(f(*args), dtype=float), batch) for f in fns]
        if not shape:
            return np.array(vals[0])
        return np.stack(vals, axis=-1).reshape(batch + shape)

    return fn


def _leibniz3(f, g):
    """Third derivative of a scalar product f*g from (value, grad, hess, third)."""
    f0, f1, f2, f3 = f
    g0, g1, g2, g3 = g
    e = np.einsum
    return (
        f3 * g0[..., None, None, None]
        + f0[..., None, None, None] * g3
        + e("...ab,...c->...abc", f2, g1)
        + e("...ac,...b->...abc", f2, g1)
        + e("...bc,...a->...abc", f2, g1)
        + e("...ab,...c->...abc", g2, f1)
        + e("...ac,...b->...abc", g2, f1)
        + e("...bc,...a->...abc", g2, f1)
    )


# ---------------------------------------------------------------------------
# metric specifications


@dataclass(frozen=True)
class MetricSpec:
    """A metric on a single coordinate patch.

    ``g`` maps points of shape ``(..., n)`` to ``(..., n, n)``.  The optional
    ``dg``, ``d2g`` and ``d3g`` give analytic partials; any that are missing
    are filled by central differences of the next lower available order.
    """

    dim: int
    signature: tuple
    g: ArrayFn
    dg: Optional[ArrayFn] = None
    d2g: Optional[ArrayFn] = None
    d3g: Optional[ArrayFn] = None
    kind: str = "general"
    factor: Optional[ConformalFactor] = None
    name: str = "custom"
    domain: Optional[Callable[[np.ndarray], bool]] = None
    params: dict = field(default_factory=dict)

    def metric(self, x):
        return np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)

    def in_patch(self, x) -> bool:
        if self.domain is None:
            return True
        return bool(np.all(self.domain(np.asarray(x, dtype=float))))

    def partials(self, x, h: float = DEFAULT_FD_STEP):
        """Return ``(g, dg, d2g, d3g)`` at ``x``, finite-differencing missing orders."""
        x = np.asarray(x, dtype=float)
        fns = [self.g, self.dg, self.d2g, self.d3g]
        out = [self.metric(x)]
        for k in range(1, 4):
            if fns[k] is not None:
                out.append(np.asarray(fns[k](x), dtype=float))
            else:
                lower_fn = self._order_fn(k - 1, h)
                out.append(central_difference(lower_fn, x, h))
        return tuple(out)

    def _order_fn(self, k, h):
        fns = [self.g, self.dg, self.d2g, self.d3g]
        if k == 0:
            return self.metric
        if fns[k] is not None:
            return fns[k]
        prev = self._order_fn(k - 1, h)
        return lambda y: central_difference(prev, y, h)

    @property
    def analytic(self) -> bool:
        return self.dg is not None and self.d2g is not None and self.d3g is not None

    def without_partials(self) -> "MetricSpec":
        """Same metric, curvature forced through finite differences."""
        return replace(self, dg=None, d2g=None, d3g=None, name=self.name + "[fd]")


def _eta(signature):
    return np.diag(np.asarray(signature, dtype=float))


def _check_signature(dim, signature):
    if signature is None:
        return (1,) * dim
    signature = tuple(int(s) for s in signature)
    if len(signature) != dim or any(s not in (-1, 1) for s in signature):
        raise ConfigError(f"signature must be {dim} entries of +-1, got {signature}")
    return signature


def flat_metric(dim: int, signature=None) -> MetricSpec:
    signature = _check_signature(dim, signature)
    eta = _eta(signature)

    def g(x):
        return np.broadcast_to(eta, np.shape(x)[:-1] + eta.shape).copy()

    def zeros(order):
        return lambda x: np.zeros(np.shape(x)[:-1] + (dim,) * (order + 2))

    name = "flat-euclidean" if all(s == 1 for s in signature) else "flat-minkowski"
    return MetricSpec(dim, signature, g, zeros(1), zeros(2), zeros(3), kind="flat", name=name)


def conformally_flat(factor: ConformalFactor, dim: int, signature=None, name=None) -> MetricSpec:
    """The metric Omega^2 eta with analytic partials from the factor's."""
    return rescale(flat_metric(dim, signature), factor, name=name)


def rescale(spec: MetricSpec, factor: ConformalFactor, name=None) -> MetricSpec:
    """The metric Omega^2 g, partials by the Leibniz rule where both are analytic."""

    def f_derivs(x):
        w, d1 = factor.value(x), factor.gradient(x)
        f0 = w * w
        f1 = 2 * w[..., None] * d1
        out = [f0, f1]
        if factor.analytic_order >= 2:
            d2 = factor.hessian(x)
            out.append(2 * (np.einsum("...a,...b->...ab", d1, d1) + w[..., None, None] * d2))
        if factor.analytic_order >= 3:
            jet = (w, d1, d2, factor.third_derivative(x))
            out.append(_leibniz3(jet, jet))
        return out

    def g(x):
        return factor.value(x)[..., None, None] ** 2 * spec.metric(x)

    def dg(x):
        f0, f1 = f_derivs(x)[:2]
        g0, g1 = spec.metric(x), spec.dg(x)
        return np.einsum("...c,...ab->...cab", f1, g0) + f0[..., None, None, None] * g1

    def d2g(x):
        f0, f1, f2 = f_derivs(x)[:3]
        g0, g1, g2 = spec.metric(x), spec.dg(x), spec.d2g(x)
        e = np.einsum
        return (
            e("...cd,...ab->...cdab", f2, g0)
            + e("...c,...dab->...cdab", f1, g1)
            + e("...d,...cab->...cdab", f1, g1)
            + f0[..., None, None, None, None] * g2
        )

    def d3g(x):
        f0, f1, f2, f3 = f_derivs(x)
        g0, g1, g2, g3 = spec.metric(x), spec.dg(x), spec.d2g(x), spec.d3g(x)
        e = np.einsum
        return (
            e("...cde,...ab->...cdeab", f3, g0)
            + e("...cd,...eab->...cdeab", f2, g1)
            + e("...ce,...dab->...cdeab", f2, g1)
            + e("...de,...cab->...cdeab", f2, g1)
            + e("...c,...deab->...cdeab", f1, g2)
            + e("...d,...ceab->...cdeab", f1, g2)
            + e("...e,...cdab->...cdeab", f1, g2)
            + f0[..., None, None, None, None, None] * g3
        )

    k = factor.analytic_order
    have1 = spec.dg is not None and k >= 1
    have2 = have1 and spec.d2g is not None and k >= 2
    have3 = have2 and spec.d3g is not None and k >= 3
    if spec.kind == "flat":
        kind, new_factor = "conformally-flat", factor
    elif spec.kind == "conformally-flat":
        kind = "conformally-flat"
        new_factor = factor * spec.factor if spec.factor is not None else None
    else:
        kind, new_factor = "general", None
    return MetricSpec(
        spec.dim,
        spec.signature,
        g,
        dg if have1 else None,
        d2g if have2 else None,
        d3g if have3 else None,
        kind=kind,
        factor=new_factor,
        name=name or f"({factor.name})^2*{spec.name}",
        domain=spec.domain,
        params=dict(spec.params),
    )


def from_expressions(components, dim: int, signature=None, name="general") -> MetricSpec:
    """Metric from sympy-parsable component expressions in ``x0 .. x{dim-1}``."""
    import sympy as sp

    xs = sp.symbols(f"x0:{dim}")
    loc = {str(s): s for s in xs}
    try:
        G = sp.Matrix([[sp.sympify(c, locals=loc) for c in row] for row in components])
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse metric components: {exc}") from exc
    if G.shape != (dim, dim):
        raise ConfigError(f"metric components must be {dim}x{dim}, got {G.shape}")
    if G != G.T:
        raise ConfigError("metric components must be symmetric")
    extra = set().union(*(e.free_symbols for e in G)) - set(xs)
    if extra:
        raise ConfigError(f"unknown symbols in metric: {sorted(map(str, extra))}")
    g0 = G.tolist()
    g1 = [[[sp.diff(G[a, b], xs[c]) for b in range(dim)] for a in range(dim)] for c in range(dim)]
    g2 = [[[[sp.diff(g1[c][a][b], xs[d]) for b in range(dim)] for a in range(dim)] for d in range(dim)] for c in range(dim)]
    g3 = [
        [[[[sp.diff(g2[c][d][a][b], xs[e]) for b in range(dim)] for a in range(dim)] for e in range(dim)] for d in range(dim)]
        for c in range(dim)
    ]
    if signature is None:
        signature = (1,) * dim
    return MetricSpec(
        dim,
        _check_signature(dim, signature),
        _lambdify_array(xs, g0),
        _lambdify_array(xs, g1),
        _lambdify_array(xs, g2),
        _lambdify_array(xs, g3),
        kind="general",
        name=name,
        params={"components": [[str(c) for c in row] for row in components]},
    )


# ---------------------------------------------------------------------------
# the geometry jet


@dataclass(frozen=True)
class GeometryJet:
    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    dchristoffel: np.ndarray  # [..., e, a, b, c] = partial_e Gamma^a_bc
    riemann: np.ndarray
    riemann_lower: np.ndarray  # R_abcd = g_ae R^e_bcd
    ricci: np.ndarray
    scalar: np.ndarray
    schouten: np.ndarray
    schouten_sharp: np.ndarray  # (P#)^a_b
    weyl: np.ndarray
    dschouten: Optional[np.ndarray] = None  # [..., c, a, b] = partial_c P_ab
    nabla_schouten: Optional[np.ndarray] = None
    ddchristoffel: Optional[np.ndarray] = None  # [..., f, e, a, b, c]
    flat: bool = False

    @property
    def dim(self):
        return self.g.shape[-1]


def take_jet(jet: GeometryJet, idx) -> GeometryJet:
    """Select batch entries of a batched geometry jet."""
    batch = jet.g.shape[:-2]
    if not batch:
        return jet
    vals = {}
    for f in fields(jet):
        v = getattr(jet, f.name)
        batched = isinstance(v, np.ndarray) and v.shape[: len(batch)] == batch
        vals[f.name] = v[idx] if batched else v
    return GeometryJet(**vals)


def _christoffel(ginv, dg):
    t = dg.swapaxes(-3, -2)  # t[d, b, c] = partial_b g_dc
    tt = t + np.swapaxes(t, -1, -2) - dg  # partial_b g_dc + partial_c g_db - partial_d g_bc
    return 0.5 * np.einsum("...ad,...dbc->...abc", ginv, tt)


def _dchristoffel(ginv, dg, d2g):
    # T[d, b, c] and partial_e T[d, b, c]
    t = dg.swapaxes(-3, -2)
    T = t + np.swapaxes(t, -1, -2) - dg
    # d2g[e, c, a, b] = partial_e partial_c g_ab; d2t[e, d, b, c] = partial_e partial_b g_dc
    d2t = np.swapaxes(d2g, -3, -2)
    dT = d2t + np.swapaxes(d2t, -1, -2) - d2g
    dginv = -np.einsum("...ap,...epq,...qd->...ead", ginv, dg, ginv)
    return 0.5 * (np.einsum("...ead,...dbc->...eabc", dginv, T) + np.einsum("...ad,...edbc->...eabc", ginv, dT))


def _curvature(g, dg, d2g):
    """Connection and curvature from metric partials (batch and complex safe)."""
    n = g.shape[-1]
    ginv = np.linalg.inv(g)
    gam = _christoffel(ginv, dg)
    dgam = _dchristoffel(ginv, dg, d2g)
    # R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
    t1 = np.einsum("...cadb->...abcd", dgam)
    quad = np.einsum("...ace,...edb->...abcd", gam, gam)
    riem = t1 - np.swapaxes(t1, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    ricci = np.einsum("...cacb->...ab", riem)
    scalar = np.einsum("...ab,...ab->...", ginv, ricci)
    schouten = (ricci - scalar[..., None, None] * g / (2.0 * (n - 1))) / (n - 2)
    return ginv, gam, dgam, riem, ricci, scalar, schouten


def _weyl_lower(g, riem_lower, P):
    e = np.einsum
    kn = (
        e("...ac,...bd->...abcd", g, P)
        + e("...bd,...ac->...abcd", g, P)
        - e("...ad,...bc->...abcd", g, P)
        - e("...bc,...ad->...abcd", g, P)
    )
    return riem_lower - kn


def _directional_complex_step(g, dg, d2g, d3g):
    """partial_c of (Schouten, dChristoffel) for every direction c, via complex step."""
    b = g.ndim - 2  # batch ndim
    gd = np.moveaxis(dg, b, 0)
    dgd = np.moveaxis(d2g, b, 0)
    d2gd = np.moveaxis(d3g, b, 0)
    gc = g[None] + 1j * _CSTEP * gd
    dgc = dg[None] + 1j * _CSTEP * dgd
    d2gc = d2g[None] + 1j * _CSTEP * d2gd
    _, _, dgam, _, _, _, P = _curvature(gc, dgc, d2gc)
    dP = np.moveaxis(P.imag / _CSTEP, 0, b)
    ddgam = np.moveaxis(dgam.imag / _CSTEP, 0, b)
    return dP, ddgam


def _flat_jet(spec: MetricSpec, x):
    n = spec.dim
    batch = x.shape[:-1]
    eta = _eta(spec.signature)
    g = np.broadcast_to(eta, batch + (n, n)).copy()

    def z(*k):
        return np.zeros(batch + (n,) * len(k))

    return GeometryJet(
        x=x,
        g=g,
        ginv=g.copy(),
        christoffel=z(1, 1, 1),
        dchristoffel=z(1, 1, 1, 1),
        riemann=z(1, 1, 1, 1),
        riemann_lower=z(1, 1, 1, 1),
        ricci=z(1, 1),
        scalar=np.zeros(batch),
        schouten=z(1, 1),
        schouten_sharp=z(1, 1),
        weyl=z(1, 1, 1, 1),
        dschouten=z(1, 1, 1),
        nabla_schouten=z(1, 1, 1),
        ddchristoffel=z(1, 1, 1, 1, 1),
        flat=True,
    )


def geometry_jet(spec: MetricSpec, x, h: float = DEFAULT_FD_STEP, derivatives: bool = True) -> GeometryJet:
    """All pointwise geometric data of ``spec`` at ``x`` (a point or a batch).

    With ``derivatives=False`` the fields that need third partials of the
    metric (``dschouten``, ``nabla_schouten``, ``ddchristoffel``) are left
    as ``None``; the connection and curvature are still complete.
    """
    x = np.asarray(x, dtype=float)
    if spec.dim < 3:
        raise DimensionTooSmall(f"dimension {spec.dim} < 3: the Schouten tensor needs n >= 3")
    if x.shape[-1] != spec.dim:
        raise ValueError(f"point has {x.shape[-1]} coordinates, metric has dimension {spec.dim}")
    if spec.kind == "flat":
        return _flat_jet(spec, x)

    if derivatives:
        g, dg, d2g, d3g = spec.partials(x, h)
    else:
        g = spec.metric(x)
        dg = spec.dg(x) if spec.dg is not None else central_difference(spec._order_fn(0, h), x, h)
        d2g = spec.d2g(x) if spec.d2g is not None else central_difference(spec._order_fn(1, h), x, h)
        d3g = None
    det = np.linalg.det(g)
    if np.any(np.abs(det) < DET_THRESHOLD):
        raise SingularMetric(f"|det g| < {DET_THRESHOLD:g} at {x}")

    ginv, gam, dgam, riem, ricci, scalar, P = _curvature(g, dg, d2g)
    riem_lower = np.einsum("...ae,...ebcd->...abcd", g, riem)
    weyl = np.einsum("...ae,...ebcd->...abcd", ginv, _weyl_lower(g, riem_lower, P))
    P_sharp = np.einsum("...ac,...cb->...ab", ginv, P)

    dP = nablaP = ddgam = None
    if derivatives:
        dP, ddgam = _directional_complex_step(g, dg, d2g, d3g)
        nablaP = dP - np.einsum("...dca,...db->...cab", gam, P) - np.einsum("...dcb,...ad->...cab", gam, P)

    return GeometryJet(
        x=x,
        g=g,
        ginv=ginv,
        christoffel=gam,
        dchristoffel=dgam,
        riemann=riem,
        riemann_lower=riem_lower,
        ricci=ricci,
        scalar=scalar,
        schouten=P,
        schouten_sharp=P_sharp,
        weyl=weyl,
        dschouten=dP,
        nabla_schouten=nablaP,
        ddchristoffel=ddgam,
    )


# ---------------------------------------------------------------------------
# conformal rescaling laws


def rescaled_schouten(jet: GeometryJet, factor: ConformalFactor, x=None):
    """Schouten tensor of Omega^2 g from that of g.

    P^ = P - nabla Upsilon + Upsilon (x) Upsilon - 1/2 |Upsilon|^2 g.
    """
    return _rescaled_schouten(jet, factor, x, norm_coefficient=-0.5)


def _rescaled_schouten(jet, factor, x, norm_coefficient):
    x = jet.x if x is None else np.asarray(x, dtype=float)
    ups = factor.upsilon(x)
    nabla_ups = factor.d_upsilon(x) - np.einsum("...cab,...c->...ab", jet.christoffel, ups)
    ups2 = inner(jet.ginv, ups, ups)
    return (
        jet.schouten
        - nabla_ups
        + np.einsum("...a,...b->...ab", ups, ups)
        + norm_coefficient * ups2[..., None, None] * jet.g
    )


def rescaled_acceleration(state, factor: ConformalFactor, jet: GeometryJet):
    """A^ = A - |U|^2 Upsilon# + 2 Upsilon(U) U for the same parametrized curve."""
    from .dynamics import check_velocity

    U, A = np.asarray(state.U), np.asarray(state.A)
    U2 = check_velocity(jet, U)
    ups = factor.upsilon(state.x)
    ups_sharp = raise_index(jet.ginv, ups)
    return A - U2[..., None] * ups_sharp + 2 * np.einsum("...a,...a->...", ups, U)[..., None] * U


# ---------------------------------------------------------------------------
# named metrics and configuration


BUILTIN_METRICS = ("flat-euclidean", "flat-minkowski", "round-sphere-stereographic", "conformally-flat(expr)")


def named_metric(name: str, dim: int = 3, **params) -> MetricSpec:
    name = name.strip()
    if name == "flat-euclidean":
        return flat_metric(dim)
    if name == "flat-minkowski":
        return flat_metric(dim, (-1,) + (1,) * (dim - 1))
    if name == "round-sphere-stereographic":
        radius = float(params.get("radius", 1.0))
        spec = conformally_flat(ConformalFactor.sphere(radius), dim, name=name)
        return replace(spec, params={"radius": radius})
    if name.startswith("conformally-flat(") and name.endswith(")"):
        expr = name[len("conformally-flat(") : -1]
        factor = ConformalFactor.from_expr(expr, dim)
        return conformally_flat(factor, dim, params.get("signature"), name=name)
    raise ConfigError(f"unknown metric {name!r}; built-ins: {', '.join(BUILTIN_METRICS)}")


def metric_from_config(cfg) -> MetricSpec:
    """Build a metric from ``{kind, dim, signature, parameters}`` or ``{name, dim}``."""
    if isinstance(cfg, str):
        return named_metric(cfg)
    try:
        dim = int(cfg.get("dim", 3))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad metric dim: {exc}") from exc
    params = dict(cfg.get("parameters", {}))
    signature = cfg.get("signature")
    if "name" in cfg:
        return named_metric(cfg["name"], dim, **params)
    kind = cfg.get("kind")
    if kind == "flat":
        return flat_metric(dim, signature)
    if kind == "conformally-flat":
        if "expr" not in params:
            raise ConfigError("conformally-flat metric needs parameters.expr")
        return conformally_flat(ConformalFactor.from_expr(params["expr"], dim), dim, signature, name=f"conformally-flat({params['expr']})")
    if kind == "round-sphere":
        return named_metric("round-sphere-stereographic", dim, **params)
    if kind == "general":
        if "components" not in params:
            raise ConfigError("general metric needs parameters.components")
        return from_expressions(params["components"], dim, signature, name=cfg.get("id", "general"))
    raise ConfigError(f"unknown metric kind {kind!r}")
