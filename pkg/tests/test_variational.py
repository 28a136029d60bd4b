import functools

import numpy as np
import pytest
from scipy.integrate import quad

from confgeo import variational
from confgeo.checks import generic_metric
from confgeo.dynamics import K_vector, CurveState, cg3_jerk
from confgeo.errors import InputError, NoConvergence
from confgeo.geometry import ConformalFactor, flat_metric, geometry_jet, named_metric, rescale
from confgeo.oracles import CircleParams, SpiralParams, circle_curve, spiral_curve
from confgeo.trajectory import Trajectory
from confgeo.variational import (
    BvpProblem,
    bump_field,
    bvp_shoot,
    first_variation_fd,
    first_variation_formula,
    functional_I,
    polynomial_field,
    sampled_jet,
    stationarity_check,
    first_variation_check,
    trace_csv,
    trig_field,
    weyl_pairing,
)

FLAT = flat_metric(3)
SPHERE = named_metric("round-sphere-stereographic", 3)
e1, e2, e3 = np.eye(3)
CIRCLE = circle_curve(CircleParams(np.zeros(3), e1, e2))
SPIRAL = spiral_curve(SpiralParams([0.6, 0, 0], [0, 0.6, 0], [0.1, -0.2, 0.3], 2.0))


def spiral_L_by_hand(t, r, c):
    """<U, E>/|U|^2 for a flat spiral, derivatives written out with complex numbers."""
    z = r * np.exp((1 + 1j * c) * t)
    U, A, J = (1 + 1j * c) * z, (1 + 1j * c) ** 2 * z, (1 + 1j * c) ** 3 * z
    dot = lambda a, b: (np.conj(a) * b).real  # noqa: E731
    U2 = dot(U, U)
    E = J - 3 * dot(U, A) / U2 * A + 1.5 * dot(A, A) / U2 * U
    return dot(U, E) / U2


def test_I_vanishes_on_circle():
    val, err = functional_I(FLAT, CIRCLE, 0, 1)
    assert abs(val) < 1e-10
    assert abs(functional_I(SPHERE, CIRCLE, 0, 1).value) < 1e-10


def test_I_spiral_against_adaptive_quadrature():
    ref = quad(spiral_L_by_hand, 0, 1, args=(0.6, 2.0), epsabs=1e-13)[0]
    val = functional_I(FLAT, SPIRAL, 0, 1)
    assert val.value == pytest.approx(ref, abs=1e-9)
    assert ref == pytest.approx((2.0**2 - 1) / 2, abs=1e-12)  # L is constant along spirals


def test_I_from_trajectory_samples():
    t = np.linspace(0, 1, 201)
    xjet = SPIRAL.jet(t, 3)
    tr = Trajectory(t, xjet[:, 0], xjet[:, 1], xjet[:, 2], xjet[:, 3])
    assert functional_I(FLAT, tr).value == pytest.approx(1.5, abs=1e-10)
    with pytest.raises(InputError):
        functional_I(FLAT, Trajectory(t, xjet[:, 0], xjet[:, 1], xjet[:, 2]))


def test_I_conformally_invariant():
    a = functional_I(FLAT, SPIRAL, 0, 1).value
    for metric in (SPHERE, rescale(FLAT, ConformalFactor.exponential(np.array([0.3, -0.2, 0.5])))):
        assert functional_I(metric, SPIRAL, 0, 1).value == pytest.approx(a, abs=1e-8)
    base = generic_metric(3)
    b = functional_I(base, SPIRAL, 0, 1).value
    assert functional_I(rescale(base, ConformalFactor.sphere()), SPIRAL, 0, 1).value == pytest.approx(b, abs=1e-8)


def test_zero_variation():
    V = polynomial_field(np.zeros((1, 3)))
    assert first_variation_formula(FLAT, SPIRAL, V, 0, 1) == (0.0, 0.0)
    assert first_variation_fd(FLAT, SPIRAL, V, 0, 1, s_step=1e-2).value == 0.0


def test_conformal_geodesic_has_no_flat_integral_term():
    V = trig_field([0.3, -0.2, 0.4], [1, 2, 3], [0, 1, 2])
    integral, boundary = first_variation_formula(FLAT, CIRCLE, V, 0, 1)
    assert abs(integral) < 1e-10
    r = first_variation_check(FLAT, CIRCLE, V, 0, 1)
    assert r["fd"] == pytest.approx(boundary, rel=1e-6, abs=1e-10)


def test_first_variation_flat_spiral_bump():
    V = bump_field(0.0, 1.0, e3 * 256)
    r = first_variation_check(FLAT, SPIRAL, V, 0, 1)
    assert r["rel_error"] < 1e-6
    assert abs(r["boundary"]) < 1e-12


@pytest.mark.parametrize("metric", [FLAT, SPHERE])
def test_first_variation_trig_fields(metric):
    V = trig_field([0.2, 0.3, -0.25], [1.5, 2.0, 2.5], [0.3, 1.0, 2.0])
    for curve in (SPIRAL, CIRCLE):
        assert first_variation_check(metric, curve, V, 0, 1)["rel_error"] < 1e-5


def test_first_variation_stencil_route():
    V = trig_field([0.2, 0.3, -0.25], [1.5, 2.0, 2.5], [0.3, 1.0, 2.0])
    assert first_variation_check(FLAT, SPIRAL, V, 0, 1, jets="stencil")["rel_error"] < 1e-6
    with pytest.raises(InputError):
        first_variation_fd(FLAT, SPIRAL, V, 0, 1, jets="spline")


def test_first_variation_generic_metric_and_cotton_sign(monkeypatch):
    metric = generic_metric(3)
    V = trig_field([0.2, 0.3, -0.25], [1.5, 2.0, 2.5], [0.3, 1.0, 2.0])
    curve = spiral_curve(SpiralParams([0.3, 0, 0], [0, 0.3, 0], [0.1, 0.1, 0.1], 2.0))
    assert abs(weyl_pairing(metric, curve, V, 0, 1)) > 1e-4
    assert first_variation_check(metric, curve, V, 0, 1)["rel_error"] < 1e-5
    monkeypatch.setattr(variational, "K_vector", functools.partial(K_vector, cotton_coefficient=-2.0))
    assert first_variation_check(metric, curve, V, 0, 1)["rel_error"] > 1e-4


def test_fd_error_scales_quadratically():
    V = trig_field([0.2, 0.3, -0.25], [1.5, 2.0, 2.5], [0.3, 1.0, 2.0])
    exact = sum(first_variation_formula(FLAT, SPIRAL, V, 0, 1))
    fd = first_variation_fd(FLAT, SPIRAL, V, 0, 1, s_step=0.05)
    ratio = (fd.raw - exact) / (fd.raw_half - exact)
    assert ratio == pytest.approx(4.0, rel=0.05)
    assert abs(fd.value - exact) < abs(fd.raw_half - exact)


def test_stationarity():
    assert stationarity_check(FLAT, CIRCLE, 0, 1)["stationary"]
    report = stationarity_check(FLAT, SPIRAL, 0, 1)
    assert not report["stationary"] and report["max_abs_delta_I"] > 1e-3
    assert stationarity_check(SPHERE, CIRCLE, 0, 1, tolerance=1e-6)["stationary"]


def test_sampled_jet_of_polynomial():
    t = np.linspace(0, 1, 21)
    X = np.stack([t**3, 2 * t**2], axis=1)
    j = sampled_jet(t, X, order=3)
    assert np.allclose(j[:, 1, 0], 3 * t**2, atol=1e-10)
    assert np.allclose(j[:, 3, 0], 6, atol=1e-7)
    with pytest.raises(InputError):
        sampled_jet(t**2, X)


def test_grid_errors():
    V = polynomial_field(np.ones((1, 3)))
    with pytest.raises(InputError):
        first_variation_formula(FLAT, SPIRAL, V, 1, 1)
    with pytest.raises(InputError):
        first_variation_formula(FLAT, SPIRAL, polynomial_field(np.ones((1, 2))), 0, 1)


def _endpoint_problem(curve, metric=FLAT):
    j0, j1 = curve.jet(np.array([0.0, 1.0]), 3)
    return BvpProblem(metric, j0[0], j0[1], j1[0], j1[1]), j0


def test_bvp_recovers_circle():
    problem, j0 = _endpoint_problem(CIRCLE)
    res = bvp_shoot(problem)
    flat = geometry_jet(FLAT, np.zeros(3))
    J_ref = cg3_jerk(flat, CurveState(j0[0], j0[1], j0[2]))
    assert np.max(np.abs(res.A0 - j0[2])) < 1e-6 and np.max(np.abs(res.J0 - J_ref)) < 1e-6
    assert res.iterations <= 20 and res.residual < 1e-8
    assert trace_csv(res.trace).startswith("iteration,residual,damping,accepted\n")


def test_bvp_recovers_spiral():
    curve = spiral_curve(SpiralParams([0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.2], 1.0))
    problem, j0 = _endpoint_problem(curve)
    res = bvp_shoot(problem)
    assert np.max(np.abs(res.A0 - j0[2])) < 1e-6 and np.max(np.abs(res.J0 - j0[3])) < 1e-6


def test_bvp_steep_spiral_from_nearby_guess():
    problem, j0 = _endpoint_problem(SPIRAL)
    res = bvp_shoot(problem, guess=np.concatenate([j0[2], j0[3]]) * 1.05)
    assert np.max(np.abs(res.A0 - j0[2])) < 1e-6 and np.max(np.abs(res.J0 - j0[3])) < 1e-6


def test_bvp_errors():
    with pytest.raises(InputError):
        BvpProblem(FLAT, np.zeros(3), e1, e2, e1, 0.0, 0.0)
    with pytest.raises(InputError):
        BvpProblem(FLAT, np.zeros(3), e1, np.zeros(3), e1)
    problem, _ = _endpoint_problem(CIRCLE)
    with pytest.raises(NoConvergence) as info:
        bvp_shoot(problem, max_iter=1)
    assert info.value.iterations == 1 and info.value.best_residual > 0
    with pytest.raises(InputError):
        bvp_shoot(problem, guess=np.zeros(3))
