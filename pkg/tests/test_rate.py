import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from decoh.core import EpsilonMode, UnitSystem, ValidationError, make_bath
from decoh.rate import (
    DecoherenceCurve,
    Route,
    check_compatible,
    conservation_check,
    localization_coefficient,
    per_collision_decoherence,
    rate_general,
    rate_general_curve,
    rate_via_replacement,
    rate_via_replacement_curve,
    saturation_rate,
)
from decoh.scattering import BornPotential, ConstantSWave, GaussianPotential, HardSphere
from decoh.thermal import speed_distribution

F0 = 0.1


def sinc(x):
    return math.sin(x) / x if x else 1.0


def swave_oracle(bath, R, weight=lambda x: 1.0 - sinc(x) ** 2):
    """n 4 pi f0^2 int nu(q) (q/m) w(qR/hbar) dq, from the isotropic closed form of the angles."""
    integrand = lambda q: speed_distribution(bath, q) * q / bath.mass * weight(q * R / bath.hbar)
    val, _ = quad(integrand, 0, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return bath.density * 4 * math.pi * F0**2 * val


@pytest.mark.parametrize("r", [0.05, 0.4, 1.0, 3.0, 8.0])
def test_general_route_constant_swave_oracle(bath, r):
    R = r * np.array([0.48, -0.6, 0.64])
    assert rate_general(bath, ConstantSWave(F0), R) == pytest.approx(swave_oracle(bath, r), rel=1e-8)


@pytest.mark.parametrize("r", [0.05, 1.0, 8.0])
def test_replacement_route_constant_swave_oracle(bath, r):
    R = np.array([0.0, r, 0.0])
    assert rate_via_replacement(bath, ConstantSWave(F0), R) == pytest.approx(swave_oracle(bath, r), rel=1e-8)


def test_gallis_fleming_is_two_pi_larger(bath):
    seps = [np.array([0.0, 0.0, r]) for r in (0.3, 2.0)]
    c1 = rate_general_curve(bath, HardSphere(1.0), seps)
    c2 = rate_general_curve(bath, HardSphere(1.0), seps, epsilon=EpsilonMode.GALLIS_FLEMING)
    np.testing.assert_allclose(c2.values / c1.values, 2 * math.pi, rtol=1e-12)
    assert c2.epsilon is EpsilonMode.GALLIS_FLEMING and c1.route is Route.GENERAL


def test_rate_vanishes_at_zero_and_without_gas(bath):
    assert rate_general(bath, HardSphere(1.0), np.zeros(3)) == 0.0
    empty = make_bath(1.0, 1.0, 0.0)
    assert rate_general(empty, HardSphere(1.0), [1.0, 0.0, 0.0]) == 0.0
    assert rate_via_replacement(empty, HardSphere(1.0), [1.0, 0.0, 0.0]) == 0.0


def test_hard_sphere_rate_isotropic_in_direction(bath):
    model = HardSphere(1.0)
    fz = rate_general(bath, model, [0.0, 0.0, 1.5])
    fx = rate_general(bath, model, [1.5 / math.sqrt(2), -1.5 / math.sqrt(2), 0.0])
    assert fx == pytest.approx(fz, rel=1e-9)


def test_hard_sphere_routes_agree(bath):
    seps = [np.array([r, 0.0, 0.0]) for r in (0.1, 1.0, 5.0)]
    g = rate_general_curve(bath, HardSphere(1.0), seps)
    r = rate_via_replacement_curve(bath, HardSphere(1.0), seps)
    np.testing.assert_allclose(g.values, r.values, rtol=1e-6)


def test_saturation_constant_swave_closed_form(bath):
    mean_speed = math.sqrt(8 * bath.kt / (math.pi * bath.mass))
    expected = bath.density * 4 * math.pi * F0**2 * mean_speed
    assert saturation_rate(bath, ConstantSWave(F0)) == pytest.approx(expected, rel=1e-12)


def test_rate_bounded_by_twice_saturation(bath):
    # 1 - Re e^{i phi} <= 2 on every term of the integrand
    sat = saturation_rate(bath, HardSphere(1.0))
    for r in (0.5, 2.0, 6.0):
        assert 0.0 < rate_general(bath, HardSphere(1.0), [0.0, r, 0.0]) <= 2.0 * sat


def test_localization_coefficient_constant_swave(bath):
    # 1 - sinc^2 x ~ x^2 / 3, so Lambda = n 4 pi f0^2 <q^3> / (3 m hbar^2)
    third, _ = quad(lambda q: speed_distribution(bath, q) * q**3, 0, math.inf, epsrel=1e-13)
    expected = bath.density * 4 * math.pi * F0**2 * third / (3 * bath.mass * bath.hbar**2)
    seps = [np.array([0.0, 0.0, r]) for r in np.geomspace(1e-3, 1e-2, 6)]
    lam, resid = localization_coefficient(rate_general_curve(bath, ConstantSWave(F0), seps))
    assert lam == pytest.approx(expected, rel=1e-4)
    assert resid < 1e-4


def test_localization_coefficient_needs_points():
    curve = DecoherenceCurve([np.array([0.0, 0.0, 1.0])], np.array([1.0]), Route.GENERAL, EpsilonMode.CORRECTED)
    with pytest.raises(ValidationError):
        localization_coefficient(curve)


@pytest.mark.parametrize("pr", [(1.0, 0.5), (2.0, 3.0), (0.7, 10.0)])
def test_eta_constant_swave_closed_form(pr):
    pm, rm = pr
    p = pm * np.array([0.0, 0.6, 0.8])
    R = rm * np.array([1.0, 0.0, 0.0]) * 0.6 + rm * np.array([0.0, 0.8, 0.0])
    expected = np.exp(1j * float(p @ R)) * sinc(pm * rm)
    got = per_collision_decoherence(ConstantSWave(F0), p, R)
    assert abs(got - expected) <= 1e-9


def test_eta_limits_hard_sphere():
    model = HardSphere(5.0)
    p = np.array([0.0, 0.0, 1.0])
    assert per_collision_decoherence(model, p, np.zeros(3)) == 1.0
    assert abs(per_collision_decoherence(model, p, [50.0, 0.0, 0.0])) <= 0.05
    with pytest.raises(ValidationError):
        per_collision_decoherence(model, np.zeros(3), [1.0, 0.0, 0.0])


def test_outgoing_flux_conservation():
    assert conservation_check(HardSphere(1.0), [0.3, 0.4, 1.2]) <= 1e-10
    assert conservation_check(BornPotential(GaussianPotential(0.05, 0.5)), [1.0, -0.5, 0.2]) <= 1e-10


def test_incompatible_units_rejected(bath):
    with pytest.raises(ValidationError):
        check_compatible(bath, HardSphere(1.0, hbar=2.0))
    with pytest.raises(ValidationError):
        rate_general(bath, BornPotential(GaussianPotential(0.05, 0.5), mass=3.0), [1.0, 0.0, 0.0])
    other = make_bath(1.0, 1.0, 1e-5, UnitSystem(hbar=2.0))
    check_compatible(other, HardSphere(1.0, hbar=2.0))


@settings(max_examples=40, deadline=None)
@given(
    pm=st.floats(0.05, 5.0),
    rm=st.floats(0.0, 20.0),
    theta=st.floats(0.0, math.pi),
)
def test_eta_constant_swave_property(pm, rm, theta):
    p = np.array([0.0, 0.0, pm])
    R = rm * np.array([math.sin(theta), 0.0, math.cos(theta)])
    eta = per_collision_decoherence(ConstantSWave(F0), p, R)
    assert abs(eta - np.exp(1j * float(p @ R)) * sinc(pm * rm)) <= 1e-9
    assert abs(eta) <= 1.0 + 1e-12
