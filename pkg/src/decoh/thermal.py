"""Maxwell-Boltzmann distributions and the Gaussian-packet split of the bath state.

The thermal state of one gas particle is written as a mixture of minimum
uncertainty packets: the temperature is split as T = T_bar + T_hat, where
T_bar sets the momentum width b of each packet and T_hat the spread of the
packet mean momenta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .core import BathSpec, ValidationError, as_vec3, unit, orthonormal_frame
from .quadrature import gauss_hermite

DEFAULT_BAR_FRACTION = 0.01


def mb_density(bath: BathSpec, q):
    """mu(q) = (beta/2 pi m)^{3/2} exp(-beta q^2 / 2m) for momenta q of shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    q2 = np.sum(q * q, axis=-1)
    pref = (bath.beta / (2.0 * math.pi * bath.mass)) ** 1.5
    return pref * np.exp(-bath.beta * q2 / (2.0 * bath.mass))


def speed_distribution(bath: BathSpec, q):
    """nu(q) = 4 pi q^2 mu(q), the distribution of the momentum magnitude."""
    q = np.asarray(q, dtype=float)
    pref = 4.0 * math.pi * (bath.beta / (2.0 * math.pi * bath.mass)) ** 1.5
    return pref * q * q * np.exp(-bath.beta * q * q / (2.0 * bath.mass))


def thermal_wavelength(bath: BathSpec) -> float:
    return bath.thermal_wavelength


@dataclass(frozen=True)
class PacketSplit:
    t_bar: float
    t_hat: float
    b: float
    a: float
    lambda_bar: float
    mass: float
    hbar: float
    boltzmann: float

    @property
    def temperature(self) -> float:
        return self.t_bar + self.t_hat

    @property
    def bar_fraction(self) -> float:
        return self.t_bar / self.temperature

    @property
    def v_wp(self) -> float:
        """Typical packet speed sqrt(3 k_B T_hat / m)."""
        return math.sqrt(3.0 * self.boltzmann * self.t_hat / self.mass)

    @property
    def hat_momentum_std(self) -> float:
        """Per-axis standard deviation of packet mean momenta, sqrt(m k_B T_hat)."""
        return math.sqrt(self.mass * self.boltzmann * self.t_hat)

    def variance_sum(self) -> float:
        """(Delta p_x)^2/2m + (delta p_x)^2/2m; equals k_B T / 2."""
        width_part = (self.b / math.sqrt(2.0)) ** 2 / (2.0 * self.mass)
        spread_part = self.hat_momentum_std**2 / (2.0 * self.mass)
        return width_part + spread_part


def split_bath(bath: BathSpec, bar_fraction=DEFAULT_BAR_FRACTION) -> PacketSplit:
    if not (0.0 < bar_fraction < 1.0):
        raise ValidationError(f"bar_fraction must lie in (0, 1), got {bar_fraction!r}")
    t_bar = bar_fraction * bath.temperature
    t_hat = bath.temperature - t_bar
    kb = bath.units.boltzmann
    b = math.sqrt(2.0 * bath.mass * kb * t_bar)
    a = bath.hbar / b
    lambda_bar = math.sqrt(2.0 * math.pi * bath.hbar**2 / (bath.mass * kb * t_bar))
    return PacketSplit(t_bar, t_hat, b, a, lambda_bar, bath.mass, bath.hbar, kb)


@dataclass(frozen=True)
class WavePacket:
    center: np.ndarray
    mean_momentum: np.ndarray
    split: PacketSplit

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center, "center"))
        object.__setattr__(self, "mean_momentum", as_vec3(self.mean_momentum, "mean_momentum"))


def packet_wavefunction(packet: WavePacket, r_prime):
    """<r'|psi_rp> for positions r' of shape (..., 3)."""
    sp = packet.split
    d = np.asarray(r_prime, dtype=float) - packet.center
    lam = sp.lambda_bar
    phase = np.sum(d * packet.mean_momentum, axis=-1) / sp.hbar
    env = np.exp(-2.0 * math.pi * np.sum(d * d, axis=-1) / lam**2)
    return 2.0 * math.sqrt(2.0) / lam**1.5 * np.exp(1j * phase) * env


def packet_norm(packet: WavePacket) -> float:
    """Closed-form integral of |psi|^2: (8/lambda^3) (lambda^2/4)^{3/2}."""
    lam = packet.split.lambda_bar
    return 8.0 / lam**3 * (lam**2 / 4.0) ** 1.5


def packet_moments(packet: WavePacket, nodes=24):
    """Numerical <x>, <p>, Delta x, Delta p_x by Gauss-Hermite quadrature.

    Derivatives of psi are analytic; the integrals over |psi|^2-shaped
    weights are done on a tensor Hermite grid scaled to the packet.
    """
    sp = packet.split
    lam = sp.lambda_bar
    alpha = 4.0 * math.pi / lam**2  # |psi|^2 ~ exp(-alpha d^2)
    x, w = gauss_hermite(nodes)
    s = 1.0 / math.sqrt(alpha)
    g = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3) * s
    wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel() * s**3
    # the Hermite weight is exp(-alpha d^2); undo it so plain integrands can be summed
    wt = wt * np.exp(alpha * np.sum(g * g, axis=-1))
    r = packet.center + g
    psi = packet_wavefunction(packet, r)
    dens = np.abs(psi) ** 2
    norm = np.sum(wt * dens)
    mean_x = (wt * dens) @ r / norm
    var_x = np.sum(wt * dens * (r[:, 0] - mean_x[0]) ** 2) / norm
    # grad psi = (i p / hbar - alpha d) psi
    grad = 1j * packet.mean_momentum / sp.hbar - alpha * g
    mom = (wt * dens) @ (-1j * sp.hbar * grad) / norm
    # d^2 psi / dx^2 = ((i p_x / hbar - alpha d_x)^2 - alpha) psi
    p2 = np.sum(wt * dens * (-(sp.hbar**2)) * (grad[:, 0] ** 2 - alpha)) / norm
    var_p = p2.real - mom[0].real ** 2
    return {
        "norm": float(norm),
        "mean_position": mean_x,
        "mean_momentum": mom.real,
        "delta_x": math.sqrt(var_x),
        "delta_p": math.sqrt(var_p),
    }


def gamma_profile(split: PacketSplit, q_hat, r):
    """Gamma_q(R) = exp(-|R_perp|^2 / a^2) / (pi a^2), R_perp transverse to q_hat."""
    qh = np.asarray(q_hat, dtype=float)
    if qh.shape == (3,) and abs(np.linalg.norm(qh) - 1.0) > 1e-9:
        raise ValidationError("q_hat must be a unit vector")
    r = np.asarray(r, dtype=float)
    along = np.sum(r * qh, axis=-1)
    perp2 = np.maximum(np.sum(r * r, axis=-1) - along**2, 0.0)
    a = split.a
    return np.exp(-perp2 / a**2) / (math.pi * a * a)


@lru_cache(maxsize=8)
def _mp_hermite(n, dps):
    with mpmath.workdps(dps):
        x, w = mpmath.gauss_quadrature(n, "hermite")
        return tuple(x), tuple(w)


def _gamma_fourier_quadrature(split, u1, u2, n, dps):
    """Tensor Gauss-Hermite value of int_{q_perp} dDelta e^{-i Delta.u/hbar} e^{-Delta^2/4b^2}."""
    xs, ws = _mp_hermite(n, dps)
    with mpmath.workdps(dps):
        # Delta = 2b (x e1 + y e2); phase 2b(x u1 + y u2)/hbar = 2(x u1 + y u2)/a
        c1 = 2 * mpmath.mpf(u1) / mpmath.mpf(split.a)
        c2 = 2 * mpmath.mpf(u2) / mpmath.mpf(split.a)
        ex = [mpmath.expj(-c1 * x) for x in xs]
        ey = [mpmath.expj(-c2 * y) for y in xs]
        # the tensor rule factorises into a product of two one-dimensional sums
        sx = mpmath.fsum(w * e for w, e in zip(ws, ex))
        sy = mpmath.fsum(w * e for w, e in zip(ws, ey))
        return 4 * mpmath.mpf(split.b) ** 2 * sx * sy


def gamma_fourier_residual(split: PacketSplit, q_hat, u, nodes=64, max_nodes=256, dps=40):
    """Relative gap between the numerical transverse Fourier integral and (2 pi hbar)^2 Gamma_q(u).

    The closed form falls to e^{-25} at |u_perp| = 5a, below the rounding
    floor of a double-precision sum of O(1) terms, so the quadrature runs in
    extended precision and doubles its node count until two levels agree.
    """
    qh = unit(q_hat, "q_hat")
    u = as_vec3(u, "u")
    e1, e2 = orthonormal_frame(qh)
    u1, u2 = float(np.dot(u, e1)), float(np.dot(u, e2))
    with mpmath.workdps(dps):
        a = mpmath.mpf(split.a)
        exact = (2 * mpmath.pi * split.hbar) ** 2 * mpmath.exp(-(u1**2 + u2**2) / a**2) / (mpmath.pi * a**2)
        n = nodes
        old = _gamma_fourier_quadrature(split, u1, u2, n, dps)
        while True:
            if n * 2 > max_nodes:
                val = old
                break
            new = _gamma_fourier_quadrature(split, u1, u2, 2 * n, dps)
            n *= 2
            if abs(new - old) <= mpmath.mpf("1e-12") * abs(new):
                val = new
                break
            old = new
        return float(abs(val - exact) / exact)
