import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from decoh.core import ValidationError, make_bath
from decoh.scattering import GaussianPotential, YukawaPotential
from decoh.weak_coupling import (
    BornValidityWarning,
    GbarSpec,
    born_strength_check,
    gbar_closed,
    gbar_integral,
    golden_rule_window,
    potential_fourier,
    rate_weak_coupling,
)

POT = GaussianPotential(0.02, 0.5)


def gbar_oracle(bath, pot, q, omega):
    """(pi m hbar / q) |Vbar|^2 n int_{pc}^inf nu(p)/p dp with the MB tail done by 1-D quad."""
    pc = abs(2 * bath.mass * bath.hbar * omega - q * q) / (2 * q)
    tail = math.exp(-bath.beta * pc * pc / (2 * bath.mass)) * 4 * math.pi * (bath.beta / (2 * math.pi * bath.mass)) ** 1.5
    tail *= bath.mass / bath.beta
    return math.pi * bath.mass * bath.hbar / q * float(pot.fourier(q, bath.hbar)) ** 2 * bath.density * tail


@pytest.mark.parametrize("q", [0.3, 1.0, 4.0])
@pytest.mark.parametrize("omega", [-1.5, 0.0, 2.0])
def test_gbar_closed_and_integral_agree(bath, q, omega):
    spec = GbarSpec(bath, POT)
    closed = float(gbar_closed(spec, q, omega))
    assert gbar_integral(spec, q, omega) == pytest.approx(closed, rel=1e-9)
    # analytic tail int nu(p)/p dp = 4 pi (beta/2pi m)^{3/2} (m/beta) exp(-beta pc^2/2m)
    assert closed == pytest.approx(gbar_oracle(bath, POT, q, omega), rel=1e-12)


def test_gbar_rejects_zero_momentum(bath):
    with pytest.raises(ValidationError):
        gbar_closed(GbarSpec(bath, POT), 0.0, 0.0)


def weak_oracle(bath, pot, r):
    spec = GbarSpec(bath, pot)
    hb = bath.hbar
    f = lambda q: q * q * (1 - math.sin(q * r / hb) / (q * r / hb)) * float(gbar_closed(spec, q, 0.0))
    val, _ = quad(f, 1e-12, math.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    return 8 * math.pi**3 * hb * 4 * math.pi * val


@pytest.mark.parametrize("r", [0.1, 1.0, 7.0])
def test_weak_route_oracle(bath, r):
    got = rate_weak_coupling(bath, POT, [0.0, r, 0.0])
    assert got == pytest.approx(weak_oracle(bath, POT, r), rel=1e-8)


def test_weak_route_yukawa(bath):
    pot = YukawaPotential(0.01, 2.0)
    assert rate_weak_coupling(bath, pot, [2.0, 0.0, 0.0]) == pytest.approx(weak_oracle(bath, pot, 2.0), rel=1e-8)


def test_weak_route_zero_cases(bath):
    assert rate_weak_coupling(bath, POT, np.zeros(3)) == 0.0
    assert rate_weak_coupling(make_bath(1.0, 1.0, 0.0), POT, [1.0, 0.0, 0.0]) == 0.0


def test_potential_fourier_vector_form():
    q = np.array([[0.3, 0.4, 0.0], [0.0, 0.0, 0.5]])
    vals = potential_fourier(POT, q)
    assert vals[0] == pytest.approx(vals[1], rel=1e-15)
    with pytest.raises(ValidationError):
        potential_fourier(POT, [0.5, 0.5])


def test_born_strength_warning():
    with pytest.warns(BornValidityWarning):
        born_strength_check(GaussianPotential(1.0, 1.0), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert born_strength_check(POT, 1.0) == pytest.approx(2 * 0.02 * 0.25)


def test_golden_rule_window():
    assert golden_rule_window(make_bath(1.0, 4.0, 0.0)) == pytest.approx(0.25)
