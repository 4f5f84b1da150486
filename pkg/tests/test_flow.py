import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from contact_caustic import caustic, flow
from contact_caustic.model import NormalFormCoefficients as NF, heisenberg

TWO_PI = 2 * math.pi
GENERIC = NF(c0=0.4, c1=-0.2, c2=0.1, c11=0.3, c12=-0.1, c31=0.25, c32=-0.15, c421=0.2,
             c422=-0.3, c423=0.1, c441=0.05, c442=0.1, c443=-0.2, c444=0.15, c445=0.3)


def closed_form_oracle(t, phi, r):
    """Flat geodesic from the explicit rotation of the horizontal velocity."""
    out = []
    for s in np.atleast_1d(t):
        # velocity turns at rate r; w' = (x y' - y x') / 2
        a, b = math.cos(phi), math.sin(phi)
        x = (a * math.sin(r * s) - b * math.cos(r * s) + b) / r
        y = (a * (math.cos(r * s) - 1) + b * math.sin(r * s)) / r
        w = (r * s - math.sin(r * s)) / (2 * r * r)
        out.append((x, y, w))
    return np.array(out)


@pytest.mark.parametrize("phi,r", [(0.3, 1.0), (2.0, -2.5), (4.0, 7.0), (5.5, 0.5)])
def test_heisenberg_integration_matches_closed_form(phi, r):
    arc = flow.integrate(heisenberg(), flow.initial_covector(phi, r), TWO_PI / abs(r))
    exact = closed_form_oracle(arc.times, phi, r)
    assert np.abs(arc.states[:, :3] - exact).max() <= 1e-9
    np.testing.assert_allclose(flow.heisenberg_geodesic(arc.times, phi, r), exact, atol=1e-14)


def test_heisenberg_closed_form_straight_line():
    t = np.linspace(0, 2, 5)
    np.testing.assert_allclose(flow.heisenberg_geodesic(t, 0.5, 0.0)[:, 0], np.cos(0.5) * t)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 5.0, 10.0, -3.0])
def test_heisenberg_conjugate_point(r):
    tau, pt = caustic.conjugate_point(heisenberg(), 1.1, r)
    assert tau == pytest.approx(TWO_PI / abs(r), rel=1e-8)
    np.testing.assert_allclose(pt, [0, 0, math.copysign(math.pi / r ** 2, r)], atol=1e-9 / r ** 2)


def test_energy_is_conserved():
    arc = flow.integrate(GENERIC, flow.initial_covector(0.7, 6.0), 1.2 * TWO_PI / 6.0)
    assert arc.energy_drift < 1e-10
    assert flow.hamiltonian(GENERIC, arc.states[-1]) == pytest.approx(0.5, abs=1e-10)


def test_energy_failure_raises():
    big = NF(c0=50.0, c31=80.0, c442=100.0)
    with pytest.raises(flow.StepFailure):
        flow.integrate(big, flow.initial_covector(0.2, 0.3), 40.0,
                       flow.FlowSettings(steps_per_period=16, tol_energy=1e-12))


@hsettings(max_examples=20)
@given(st.tuples(*[st.floats(-1, 1)] * 6))
def test_rhs_is_hamiltonian_gradient(s):
    s = np.array(s)
    f = flow.flow_rhs(GENERIC, s)
    eps = 1e-6
    grad = np.empty(6)
    for i in range(6):
        e = np.zeros(6)
        e[i] = eps
        grad[i] = (flow.hamiltonian(GENERIC, s + e) - flow.hamiltonian(GENERIC, s - e)) / (2 * eps)
    np.testing.assert_allclose(f[:3], grad[3:], atol=1e-7)
    np.testing.assert_allclose(f[3:], -grad[:3], atol=1e-7)


@pytest.mark.parametrize("phi,r", [(0.4, 5.0), (3.0, -8.0)])
def test_variational_jacobian_matches_differences(phi, r):
    t = 0.9 * TWO_PI / abs(r)
    Jv = flow.exp_jacobian(GENERIC, t, phi, r)
    Jf = flow.exp_jacobian(GENERIC, t, phi, r, method="fd")
    np.testing.assert_allclose(Jv, Jf, rtol=1e-6, atol=1e-8 * np.abs(Jv).max())


def test_jacobian_degenerates_at_conjugate_time():
    tau = caustic.conjugate_time(GENERIC, 1.0, 12.0)
    J = flow.exp_jacobian(GENERIC, tau, 1.0, 12.0)
    J0 = flow.exp_jacobian(GENERIC, 0.8 * tau, 1.0, 12.0)
    scale = np.prod(np.linalg.norm(J, axis=0))
    assert abs(np.linalg.det(J)) / scale < 1e-8
    assert abs(np.linalg.det(J0)) / np.prod(np.linalg.norm(J0, axis=0)) > 1e-3


def test_exp_map_vectorised_matches_scalar():
    ts, phis, rs = [0.3, 0.5], [0.1, 2.0], [4.0, -6.0]
    many = flow.exp_map_many(GENERIC, ts, phis, rs)
    for i in range(2):
        np.testing.assert_allclose(many[i], flow.exp_map(GENERIC, ts[i], phis[i], rs[i]))
    arc = flow.integrate(GENERIC, flow.initial_covector(2.0, -6.0), 0.5)
    np.testing.assert_allclose(many[1], arc.endpoint, atol=1e-12)


def test_conjugate_time_expansion_order():
    # tau - 2 pi/r decays like r^-3
    vals = []
    for r in (16.0, 32.0):
        tau = np.array([caustic.conjugate_time(GENERIC, p, r) for p in (0.0, 1.3, 2.9)])
        vals.append(np.abs(tau - TWO_PI / r).max() * r ** 3)
    assert 0.5 <= vals[0] / vals[1] <= 2.0


def test_rotation_of_initial_angle_in_flat_case():
    # rotating the covector rotates the planar projection
    a = flow.exp_map(heisenberg(), 1.0, 0.0, 2.0)
    b = flow.exp_map(heisenberg(), 1.0, 0.9, 2.0)
    R = np.array([[math.cos(0.9), -math.sin(0.9)], [math.sin(0.9), math.cos(0.9)]])
    np.testing.assert_allclose(b[:2], R @ a[:2], atol=1e-12)
    assert b[2] == pytest.approx(a[2], abs=1e-12)


@pytest.mark.parametrize("call", [
    lambda: flow.integrate(GENERIC, flow.initial_covector(0, 1), 0.0),
    lambda: flow.exp_map(GENERIC, -1.0, 0.0, 1.0),
    lambda: flow.exp_jacobian(GENERIC, 1.0, 0.0, 1.0, method="bogus"),
    lambda: flow.conjugate_points(GENERIC, [0.0], [0.0]),
    lambda: flow.FlowSettings(steps_per_period=4),
    lambda: flow.FlowSettings(tol_energy=0.0),
])
def test_invalid_arguments(call):
    with pytest.raises(ValueError):
        call()


def test_no_bracket_reported():
    status, _, _ = flow.conjugate_points(heisenberg(), [0.0], [1.0], window=(0.1, 0.5))
    assert status[0] == 1
