import math

import numpy as np
import pytest
from scipy.integrate import quad

from decoh.core import ValidationError, make_bath
from decoh.thermal import (
    WavePacket,
    gamma_fourier_residual,
    gamma_profile,
    mb_density,
    packet_moments,
    packet_norm,
    packet_wavefunction,
    speed_distribution,
    split_bath,
)


def test_speed_distribution_moments():
    bath = make_bath(2.0, 1.5, 0.0)
    norm, _ = quad(lambda q: speed_distribution(bath, q), 0, math.inf)
    second, _ = quad(lambda q: q * q * speed_distribution(bath, q), 0, math.inf)
    assert norm == pytest.approx(1.0, rel=1e-12)
    assert second == pytest.approx(3 * 2.0 * 1.5, rel=1e-12)


def test_mb_density_is_isotropic_and_matches_speed_distribution():
    bath = make_bath(1.0, 1.0, 0.0)
    q = np.array([[0.3, 0.4, 0.0], [0.0, 0.0, 0.5]])
    vals = mb_density(bath, q)
    assert vals[0] == pytest.approx(vals[1], rel=1e-15)
    assert 4 * math.pi * 0.25 * vals[1] == pytest.approx(speed_distribution(bath, 0.5), rel=1e-15)


def test_split_lengths_and_equipartition():
    bath = make_bath(1.0, 2.0, 1e-3)
    split = split_bath(bath, 0.25)
    assert split.t_bar == pytest.approx(0.5)
    assert split.b == pytest.approx(math.sqrt(2 * 0.5), rel=1e-15)
    assert split.a * split.b == pytest.approx(bath.hbar, rel=1e-15)
    assert split.variance_sum() == pytest.approx(0.5 * bath.kt, rel=1e-14)
    assert split.v_wp == pytest.approx(math.sqrt(3 * 1.5), rel=1e-15)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
def test_split_rejects_bad_fraction(fraction):
    with pytest.raises(ValidationError):
        split_bath(make_bath(1.0, 1.0, 0.0), fraction)


def test_packet_is_normalised_and_has_minimum_uncertainty():
    split = split_bath(make_bath(1.0, 1.0, 0.0), 0.1)
    packet = WavePacket([0.2, -0.1, 0.4], [0.5, 0.0, -0.3], split)
    assert packet_norm(packet) == pytest.approx(1.0, rel=1e-15)
    # independent check of the norm on a tensor Gauss-Hermite grid
    x, w = np.polynomial.hermite.hermgauss(20)
    s = split.lambda_bar / math.sqrt(4 * math.pi)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1) * s + packet.center
    ww = np.einsum("i,j,k->ijk", w, w, w) * np.exp(np.sum(((pts - packet.center) / s) ** 2, -1)) * s**3
    assert float(np.sum(ww * np.abs(packet_wavefunction(packet, pts)) ** 2)) == pytest.approx(1.0, rel=1e-10)
    m = packet_moments(packet)
    assert m["delta_x"] * m["delta_p"] == pytest.approx(0.5 * split.hbar, rel=1e-10)
    assert m["delta_x"] == pytest.approx(split.a / math.sqrt(2), rel=1e-10)


def test_gamma_profile_normalised_in_transverse_plane():
    split = split_bath(make_bath(1.0, 1.0, 0.0), 0.1)
    qh = np.array([0.0, 0.0, 1.0])
    a = split.a
    total, _ = quad(lambda r: 2 * math.pi * r * float(gamma_profile(split, qh, [r, 0.0, 7.0])), 0, 12 * a)
    assert total == pytest.approx(1.0, rel=1e-10)
    # independent of the longitudinal coordinate
    assert gamma_profile(split, qh, [0.3, 0.1, -5.0]) == pytest.approx(gamma_profile(split, qh, [0.3, 0.1, 9.0]), rel=1e-14)


@pytest.mark.parametrize("t", [0.0, 1.0, 3.0, 5.0])
def test_gamma_fourier_identity(t):
    split = split_bath(make_bath(1.0, 1.0, 0.0), 0.01)
    qh = np.array([0.6, 0.0, 0.8])
    u = np.array([0.0, t * split.a, 0.2])
    assert gamma_fourier_residual(split, qh, u) <= 1e-6
