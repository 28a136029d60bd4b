"""Named verification suites producing JSON-ready reports.

Each suite returns ``{"suite", "pass", "checks": [...], ...}`` where every
check records the measured value, the tolerance and the comparison used.
"""

from __future__ import annotations

import numpy as np

from . import ode
from .dynamics import (
    CurveState,
    D_op,
    D_squared,
    E_vector,
    FlatMercatorFlow,
    K_vector,
    integrate,
    lagrangian_L,
    mercator_C,
    state_from_coordinates,
    variation_derivatives,
)
from .errors import InputError
from .geometry import ConformalFactor, MetricSpec, _flat_jet, flat_metric, from_expressions, geometry_jet, inner, named_metric, rescale
from .hamiltonian import (
    KahlerStructure,
    MagneticFlow,
    OstrogradskyFlow,
    PoissonFlow,
    arclength_residual,
    cky_residual,
    constant_cky,
    dirac_bracket_check,
    first_integral_Q,
    jacobi_residual,
    linear_cky,
    omega_hamiltonian,
    ostro_from_jet,
    ostro_hamiltonian,
    ostro_to_jet,
    poisson_matrix,
    q_hamilton_derivative,
    CkyPair,
    structure_report,
)
from .oracles import circle_curve, random_circle, random_spiral, spiral_curve
from .tractor import acceleration_tractor, acceleration_tractor_rate, tractor_kinetic_energy, tractor_norm
from .trajectory import Trajectory
from .variational import curve_states, first_variation_check, trig_field

SUITES = ("invariance", "first-integrals", "tractor", "theorem1", "hamiltonian")

# smooth non conformally flat metrics used wherever curvature terms must not vanish
GENERIC_3D = [
    ["1+0.3*sin(x0)*cos(x1)", "0.1*x2", "0"],
    ["0.1*x2", "1+0.2*x0*x2", "0.05*x0"],
    ["0", "0.05*x0", "1+0.1*(x1**2+x2)"],
]
GENERIC_4D = [
    ["1+0.2*sin(x1)", "0.1*x2", "0", "0.05*x3"],
    ["0.1*x2", "1+0.1*x0*x3", "0.05*x0", "0"],
    ["0", "0.05*x0", "1+0.15*cos(x3)", "0.1*x1"],
    ["0.05*x3", "0", "0.1*x1", "1+0.1*(x0**2+x2)"],
]


def generic_metric(dim=3) -> MetricSpec:
    if dim == 3:
        return from_expressions(GENERIC_3D, 3, name="generic-3d")
    if dim == 4:
        return from_expressions(GENERIC_4D, 4, name="generic-4d")
    raise ValueError("generic test metrics exist for dim 3 and 4")


def _check(name, value, tol, op="<="):
    value = float(value)
    ok = value <= tol if op == "<=" else value >= tol
    return {"name": name, "value": value, "tolerance": float(tol), "comparison": op, "pass": bool(ok)}


def _report(suite, checks, **extra):
    return {"suite": suite, "pass": all(c["pass"] for c in checks), "checks": checks, **extra}


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))


# ---------------------------------------------------------------------------
# conformal invariance


def invariant_quantities(metric: MetricSpec, xjet, vjet):
    """E, L, D(V), B(V) and |U|^-2 <K, V> for coordinate jets of a curve and a field."""
    jet = geometry_jet(metric, xjet[..., 0, :], derivatives=True)
    state, _ = state_from_coordinates(jet, xjet)
    V, V1, V2 = variation_derivatives(jet, xjet, vjet)
    g = jet.g
    U2 = inner(g, state.U, state.U)
    E = E_vector(jet, state)
    L = lagrangian_L(jet, state)
    D2 = D_squared(jet, state, V, V1, V2)
    B = (inner(g, state.U, D2) - inner(g, E - 2 * L[..., None] * state.U, V)) / U2
    K = inner(g, K_vector(jet, state), V) / U2
    return {"E": E, "L": L, "D": D_op(jet, state, V, V1), "B": B, "K": K}


def random_jets(rng, states, dim, spread=0.5):
    xjet = rng.normal(size=(states, 4, dim))
    xjet[:, 0] *= spread
    vjet = rng.normal(size=(states, 3, dim))
    return xjet, vjet


def invariance_suite(states=100, seed=0, tol=1e-7):
    """Compare the invariant quantities for g and Omega^2 g at random states."""
    rng = np.random.default_rng(seed)
    checks, cases = [], []
    for base in (flat_metric(3), generic_metric(3), generic_metric(4)):
        n = base.dim
        k = rng.normal(size=n) * 0.5
        for label, factor in (("sphere", ConformalFactor.sphere()), ("exponential", ConformalFactor.exponential(k))):
            xjet, vjet = random_jets(rng, states, n)
            a = invariant_quantities(base, xjet, vjet)
            b = invariant_quantities(rescale(base, factor), xjet, vjet)
            for q in a:
                checks.append(_check(f"{base.name}/{label}/{q}", _rel(a[q], b[q]), tol))
            cases.append({"metric": base.name, "factor": label, "k": k.tolist() if label == "exponential" else None})
    return _report("invariance", checks, states=states, seed=seed, cases=cases)


# ---------------------------------------------------------------------------
# first integrals


def first_integrals_suite(trajectory: Trajectory, tol=1e-6):
    """Drift of the flat first integral C (and of |U| for arclength runs) along a trajectory."""
    if not str(trajectory.metric).startswith("flat"):
        raise InputError("the first integral C is defined for flat metrics only")
    checks = []
    C = mercator_C(trajectory.states(), np.eye(trajectory.x.shape[1]))
    checks.append(_check("C_drift", np.max(np.ptp(C, axis=0)), tol))
    if trajectory.equation in ("arclength", "magnetic"):
        checks.append(_check("unit_speed_drift", np.max(np.abs(np.linalg.norm(trajectory.U, axis=1) - 1)), tol))
    return _report("first-integrals", checks, equation=trajectory.equation, C0=C[0].tolist())


# ---------------------------------------------------------------------------
# tractors


def tractor_suite(seed=0, samples=401):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, samples)
    norm_circle = rate_circle = 0.0
    for metric in (flat_metric(3), named_metric("round-sphere-stereographic", 3)):
        for _ in range(3):
            jets, states, _ = curve_states(metric, circle_curve(random_circle(rng)), t)
            norm_circle = max(norm_circle, float(np.max(np.abs(tractor_norm(jets, acceleration_tractor(jets, states))))))
            rate = acceleration_tractor_rate(jets, states, t).stack()[5:-5]  # drop one-sided stencil ends
            rate_circle = max(rate_circle, float(np.max(np.abs(rate))))
    spiral_min = np.inf
    for _ in range(5):
        jets, states, _ = curve_states(flat_metric(3), spiral_curve(random_spiral(rng)), t)
        spiral_min = min(spiral_min, float(np.min(np.abs(tractor_norm(jets, acceleration_tractor(jets, states))))))
    ke = 0.0
    for metric in (flat_metric(3), named_metric("round-sphere-stereographic", 3), generic_metric(3)):
        xjet, _ = random_jets(rng, 50, 3)
        jet = geometry_jet(metric, xjet[:, 0], derivatives=True)
        state, _ = state_from_coordinates(jet, xjet)
        ke = max(ke, _rel(tractor_kinetic_energy(jet, state), lagrangian_L(jet, state)))
    checks = [
        _check("circle_tractor_norm", norm_circle, 1e-9),
        _check("circle_tractor_rate", rate_circle, 1e-8),
        _check("spiral_tractor_norm_min", spiral_min, 1e-2, ">="),
        _check("kinetic_energy_vs_L", ke, 1e-8),
    ]
    return _report("tractor", checks, seed=seed)


# ---------------------------------------------------------------------------
# first variation


def first_variation_suite(pairs=20, seed=0, tol=1e-5, samples=2001):
    """Finite-difference delta I against integral + boundary on flat and sphere metrics."""
    rng = np.random.default_rng(seed)
    rows = []
    metrics = (flat_metric(3), named_metric("round-sphere-stereographic", 3))
    for k in range(pairs):
        metric = metrics[k % 2]
        curve = circle_curve(random_circle(rng)) if (k // 2) % 2 == 0 else spiral_curve(random_spiral(rng))
        V = trig_field(rng.normal(size=3) * 0.3, rng.uniform(1, 3, 3), rng.uniform(0, 2 * np.pi, 3))
        r = first_variation_check(metric, curve, V, 0.0, 1.0, samples=samples)
        rows.append({"metric": metric.name, "curve": curve.name, **r})
    worst = max(r["rel_error"] for r in rows)
    return _report("theorem1", [_check("max_rel_error", worst, tol)], pairs=rows)


def first_variation_single(metric, curve, V, t0=0.0, t1=1.0, tol=1e-5, samples=2001):
    r = first_variation_check(metric, curve, V, t0, t1, samples=samples)
    return _report("theorem1", [_check("rel_error", r["rel_error"], tol)], pairs=[{"metric": metric.name, "curve": curve.name, **r}])


# ---------------------------------------------------------------------------
# Hamiltonian forms


def _solve_rows(flow, y0, t, tol=1e-12):
    return ode.solve(flow, t[0], t[-1], y0, rtol=tol, atol=tol, t_eval=t).y


def ostrogradsky_check(state0: CurveState, t1=2.0, samples=41, tol=1e-12):
    """Max deviation between the Ostrogradsky flow and the flat C-form flow, and H drift."""
    n = len(state0.x)
    t = np.linspace(0.0, t1, samples)
    flow = OstrogradskyFlow(n)
    ph = flow.states(_solve_rows(flow, ostro_from_jet(state0).stack(), t, tol))
    metric = flat_metric(n)
    ref = integrate(FlatMercatorFlow(metric, mercator_C(state0, np.eye(n))), CurveState(state0.x, state0.U, state0.A),
                    0.0, t1, tol=tol, t_eval=t)
    jets = ostro_to_jet(ph)
    return {
        "x_deviation": float(np.max(np.abs(ph.x - ref.x))),
        "jet_deviation": float(max(np.max(np.abs(getattr(jets, k) - getattr(ref, k))) for k in ("U", "A", "J"))),
        "H_drift": float(np.ptp(ostro_hamiltonian(ph))),
        "C_drift": float(np.max(np.ptp(mercator_C(jets, np.eye(n)), axis=0))),
    }


def poisson_flow_check(ks: KahlerStructure, w, state0: CurveState, t1=5.0, samples=501, tol=1e-12):
    """Residual of X''' + w^2 X' = 0 (from sampled derivatives) and H = Omega(A, U) drift."""
    from .variational import sampled_jet

    t = np.linspace(0.0, t1, samples)
    flow = PoissonFlow(ks, w)
    st = flow.states(_solve_rows(flow, np.concatenate([state0.x, state0.U, state0.A]), t, tol))
    # dA/dt by finite differences of the integrated A, so the flow equation is not assumed
    A_dot = sampled_jet(t, st.A, order=1, width=9)[:, 1]
    return {
        "third_order_residual": float(np.max(np.abs(A_dot + w**2 * st.U)[4:-4])),
        "H_drift": float(np.ptp(omega_hamiltonian(ks, st.U, st.A))),
    }


def magnetic_check(ks: KahlerStructure, U0, t1=10.0, samples=201, tol=1e-12):
    n = ks.dim
    t = np.linspace(0.0, t1, samples)
    flow = MagneticFlow(ks)
    U0 = np.asarray(U0, dtype=float) / np.linalg.norm(U0)
    st = flow.states(_solve_rows(flow, np.concatenate([np.zeros(n), U0]), t, tol))
    jet = _flat_jet(flat_metric(n), np.zeros(n))  # P = 0 in every dimension, including n = 2
    return st, {
        "arclength_residual": float(np.max(np.abs(arclength_residual(jet, st)))),
        "accel_norm_drift": float(np.max(np.abs(np.linalg.norm(st.A, axis=1) - abs(ks.charge)))),
    }


def non_cky_control(dim):
    """Y_bc = |x|^2 (x_b k_c - x_c k_b): antisymmetric but not conformal Killing-Yano."""
    k = np.eye(dim)[0]

    def Y(x):
        x = np.asarray(x)
        return (x @ x) * (np.outer(x, k) - np.outer(k, x))

    return CkyPair(Y, lambda x: np.zeros(dim), name="non-cky")


def hamiltonian_suite(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    dev = h = cd = 0.0
    for _ in range(3):
        r = ostrogradsky_check(CurveState(*rng.normal(size=(4, 3))))
        dev, h, cd = max(dev, r["x_deviation"], r["jet_deviation"]), max(h, r["H_drift"]), max(cd, r["C_drift"])
    checks += [_check("ostrogradsky_vs_C_form", dev, 1e-8), _check("ostrogradsky_H_drift", h, 1e-9)]

    res = hd = jac = 0.0
    dirac = {}
    for n in (2, 4):
        ks = KahlerStructure.standard(n)
        w = rng.uniform(0.5, 1.5)
        r = poisson_flow_check(ks, w, CurveState(*rng.normal(size=(3, n))))
        res, hd = max(res, r["third_order_residual"]), max(hd, r["H_drift"])
        z = rng.normal(size=3 * n)
        jac = max(jac, jacobi_residual(lambda zz: poisson_matrix(ks, w), z))
        dirac[n] = dirac_bracket_check(ks, w)
        dirac[n]["structure"] = structure_report(ks, w, rng)
    checks += [
        _check("poisson_third_order_residual", res, 1e-9),
        _check("poisson_H_drift", hd, 1e-10),
        _check("jacobi_identity", jac, 0.0),
    ]
    for n, d in dirac.items():
        checks.append(_check(f"dirac_U_U_n{n}", d["U_U_star_residual"], 1e-12))
        checks.append(_check(f"dirac_reduced_structure_n{n}", d["reduced_structure_residual"], 1e-12))

    ks = KahlerStructure.standard(4, charge=0.8)
    st, m = magnetic_check(ks, rng.normal(size=4))
    checks += [_check("magnetic_arclength_residual", m["arclength_residual"], 1e-9),
               _check("magnetic_accel_norm_drift", m["accel_norm_drift"], 1e-9)]
    pairs = (linear_cky(rng.normal(size=4)), constant_cky(ks.omega))
    q = max(float(np.ptp(first_integral_Q(p, st))) for p in pairs)
    bad = float(np.ptp(first_integral_Q(non_cky_control(4), st)))
    jet = geometry_jet(flat_metric(4), np.zeros(4))
    cky = max(float(np.max(np.abs(cky_residual(jet, p, rng.normal(size=4))[0]))) for p in pairs)
    qh = 0.0
    for _ in range(20):
        U = rng.normal(size=4)
        U /= np.linalg.norm(U)
        A = rng.normal(size=4)
        A -= (A @ U) * U
        qh = max(qh, *(abs(q_hamilton_derivative(p, CurveState(rng.normal(size=4), U, A))) for p in pairs))
    checks += [
        _check("cky_residual", cky, 1e-9),
        _check("cky_Q_drift", q, 1e-8),
        _check("non_cky_Q_drift", bad, 1e-3, ">="),
        _check("Q_H_bracket", qh, 1e-9),
    ]
    return _report("hamiltonian", checks, seed=seed, ostrogradsky_C_drift=cd,
                   dirac={str(n): {k: v for k, v in d.items()} for n, d in dirac.items()})


def run_suite(name, **kwargs):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn = {
        "invariance": invariance_suite,
        "first-integrals": first_integrals_suite,
        "tractor": tractor_suite,
        "theorem1": first_variation_suite,
        "hamiltonian": hamiltonian_suite,
    }[name]
    return fn(**kwargs)


__all__ = [
    "SUITES",
    "generic_metric",
    "invariant_quantities",
    "invariance_suite",
    "first_integrals_suite",
    "tractor_suite",
    "first_variation_suite",
    "first_variation_single",
    "ostrogradsky_check",
    "poisson_flow_check",
    "magnetic_check",
    "non_cky_control",
    "hamiltonian_suite",
    "run_suite",
]
