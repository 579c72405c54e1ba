"""Elastic scattering amplitudes f(q2, q1) and derived cross sections.

Amplitudes follow the convention <q2|S|q1> = delta(q2 - q1)
+ (i / 2 pi hbar m) delta(E2 - E1) f(q2, q1): every argument is a momentum
and f carries the dimension of length. All implemented models are central,
so f depends only on |q1| and the scattering angle; each model exposes
``amplitude_cos(q, cos_theta)`` (broadcasting) as its primitive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import ValidationError, as_vec3, norm
from .quadrature import gauss_legendre
from .special import spherical_jn_all, spherical_yn_all

LMAX_TAIL_TOL = 1e-10
SIGMA_REFINE_TOL = 1e-10


def _legendre_sum(x, coef):
    """sum_l coef[l] P_l(x) for complex coef and real x, by upward recurrence in place."""
    x = np.asarray(x, dtype=float)
    re = np.full(x.shape, coef[0].real)
    im = np.full(x.shape, coef[0].imag)
    if coef.size == 1:
        return re + 1j * im
    p_prev = np.ones_like(x)
    p_cur = x.copy()
    re += coef[1].real * p_cur
    im += coef[1].imag * p_cur
    for ell in range(1, coef.size - 1):
        # P_{l+1} = ((2l+1) x P_l - l P_{l-1}) / (l+1), written into p_prev's buffer
        p_prev *= -ell / (ell + 1)
        p_prev += ((2 * ell + 1) / (ell + 1)) * x * p_cur
        p_prev, p_cur = p_cur, p_prev
        re += coef[ell + 1].real * p_cur
        im += coef[ell + 1].imag * p_cur
    return re + 1j * im


# -- potentials -------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPotential:
    """V(r) = v0 * exp(-r^2 / (2 width^2))."""

    v0: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError("Gaussian width must be > 0")
        if not math.isfinite(self.v0):
            raise ValidationError("v0 must be finite")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self.v0 * np.exp(-(r**2) / (2.0 * self.width**2))

    def fourier(self, q, hbar=1.0):
        """Vbar(q) = int d^3r / (2 pi hbar)^3 V(r) exp(-i q.r / hbar), q a magnitude."""
        q = np.asarray(q, dtype=float)
        w = self.width
        return self.v0 * w**3 / ((2.0 * math.pi) ** 1.5 * hbar**3) * np.exp(-(q * w) ** 2 / (2.0 * hbar**2))

    def born_strength(self, mass, hbar=1.0):
        """Dimensionless 2 m |v0| w^2 / hbar^2; Born is trustworthy well below 1."""
        return 2.0 * mass * abs(self.v0) * self.width**2 / hbar**2

    def azimuthal_nodes(self, k_width_sq):
        kappa = 2.0 * k_width_sq
        return int(math.ceil(9.0 * math.sqrt(kappa) + 12))


@dataclass(frozen=True)
class YukawaPotential:
    """V(r) = strength * exp(-screening * r) / r.

    Its transform is Vbar(q) = strength / (2 pi^2 hbar (q^2 + hbar^2 screening^2)),
    which makes the Born amplitude the textbook screened-Coulomb form
    f_B = -2 m strength / (|q2 - q1|^2 + hbar^2 screening^2).
    """

    strength: float
    screening: float

    def __post_init__(self):
        if not self.screening > 0:
            raise ValidationError("Yukawa screening must be > 0")
        if not math.isfinite(self.strength):
            raise ValidationError("strength must be finite")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return self.strength * np.exp(-self.screening * r) / r

    def fourier(self, q, hbar=1.0):
        q = np.asarray(q, dtype=float)
        return self.strength / (2.0 * math.pi**2 * hbar * (q**2 + (hbar * self.screening) ** 2))

    def born_strength(self, mass, hbar=1.0):
        return 2.0 * mass * abs(self.strength) / (hbar**2 * self.screening)


PotentialModel = Union[GaussianPotential, YukawaPotential]


# -- amplitude models -------------------------------------------------------

@dataclass(frozen=True)
class ConstantSWave:
    """Isotropic toy amplitude f = f0.

    Real f0 violates the optical theorem (Im f = 0); only |f|^2 enters the
    localization rate, and the Re f(q, q) term of the packet kernel is kept.
    """

    f0: float
    hbar: float = 1.0
    isotropic = True

    def __post_init__(self):
        if not math.isfinite(self.f0):
            raise ValidationError("f0 must be finite")

    def amplitude_cos(self, q, cos_theta):
        q, c = np.broadcast_arrays(np.asarray(q, float), np.asarray(cos_theta, float))
        return np.full(c.shape, complex(self.f0))

    def azimuthal_nodes(self, q):
        return 1

    def angular_nodes(self, q):
        return 0

    def describe(self):
        return {"kind": "constant", "f0": self.f0}


@dataclass(frozen=True)
class HardSphere:
    """Impenetrable sphere; partial waves with tan(delta_l) = j_l(kR)/y_l(kR)."""

    radius: float
    l_max: Optional[int] = None
    hbar: float = 1.0
    isotropic = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("hard-sphere radius must be > 0")
        if self.l_max is not None and int(self.l_max) < 0:
            raise ValidationError("l_max must be >= 0")

    def lmax_for(self, q):
        if self.l_max is not None:
            return int(self.l_max)
        return auto_lmax(self.radius, q, self.hbar)

    def partial_wave_terms(self, q, lmax=None):
        """Return (2l+1) e^{i delta_l} sin(delta_l) for l = 0..lmax at momentum q.

        The amplitude is this sum against P_l(cos theta), divided by k = q/hbar.
        """
        if lmax is None:
            lmax = self.lmax_for(q)
        x = q * self.radius / self.hbar
        j = spherical_jn_all(lmax, x)
        y = spherical_yn_all(lmax, np.array(x))
        big_j = np.abs(j) > np.abs(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(big_j, y / np.where(big_j, j, 1.0), j / np.where(big_j, 1.0, y))
        # t = cot(delta) where |j| > |y|, tan(delta) otherwise
        denom = 1.0 + t * t
        sc = t / denom
        s2 = np.where(big_j, 1.0 / denom, t * t / denom)
        ell = np.arange(lmax + 1)
        return (2 * ell + 1) * (sc + 1j * s2)

    def phase_shifts(self, q, lmax=None):
        if lmax is None:
            lmax = self.lmax_for(q)
        x = q * self.radius / self.hbar
        j = spherical_jn_all(lmax, x)
        y = spherical_yn_all(lmax, np.array(x))
        return np.arctan(j / y)

    def amplitude_cos(self, q, cos_theta):
        q, c = np.broadcast_arrays(np.asarray(q, float), np.asarray(cos_theta, float))
        out = np.empty(q.shape, complex)
        if q.size == 0:
            return out
        uq, inverse = np.unique(q, return_inverse=True)
        if uq[0] <= 0:
            raise ValidationError("hard-sphere amplitude needs q > 0")
        lmax = self.lmax_for(float(uq[-1]))
        if uq.size == 1:
            return _legendre_sum(c, self.partial_wave_terms(float(uq[0]), lmax) * (self.hbar / uq[0]))
        flat_c = c.ravel()
        flat_out = out.ravel()
        order = np.argsort(inverse.ravel(), kind="stable")
        bounds = np.searchsorted(inverse.ravel()[order], np.arange(uq.size + 1))
        for k, qv in enumerate(uq):
            idx = order[bounds[k]:bounds[k + 1]]
            coef = self.partial_wave_terms(float(qv), lmax) * (self.hbar / qv)
            flat_out[idx] = _legendre_sum(flat_c[idx], coef)
        return flat_out.reshape(q.shape)

    def angular_nodes(self, q):
        """Extra Gauss-Legendre nodes in cos(theta) to resolve |f|^2."""
        return self.lmax_for(q) + 1

    def cross_section_partial_waves(self, q):
        """Closed-form sigma = (4 pi / k^2) sum (2l+1) sin^2 delta_l."""
        terms = self.partial_wave_terms(q)
        k = q / self.hbar
        return float(4.0 * math.pi / k**2 * np.sum(terms.imag))

    def azimuthal_nodes(self, q):
        return 2 * self.lmax_for(q) + 2

    def describe(self):
        return {"kind": "hard_sphere", "radius": self.radius, "l_max": self.l_max}


@dataclass(frozen=True)
class BornPotential:
    """First Born amplitude f_B(q2, q1) = -(2 pi)^2 m hbar Vbar(q2 - q1)."""

    potential: PotentialModel
    mass: float = 1.0
    hbar: float = 1.0
    isotropic = False

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("mass must be > 0")

    def amplitude_cos(self, q, cos_theta):
        q, c = np.broadcast_arrays(np.asarray(q, float), np.asarray(cos_theta, float))
        transfer = q * np.sqrt(np.clip(2.0 - 2.0 * c, 0.0, None))
        return self.amplitude_transfer(transfer)

    def amplitude_transfer(self, transfer):
        vbar = self.potential.fourier(transfer, self.hbar)
        return (-(2.0 * math.pi) ** 2 * self.mass * self.hbar * vbar).astype(complex)

    def azimuthal_nodes(self, q):
        k = q / self.hbar
        pot = self.potential
        if isinstance(pot, GaussianPotential):
            return pot.azimuthal_nodes((k * pot.width) ** 2)
        # 1/(A - B cos phi)^2 with A - B >= hbar^2 kappa^2: geometric trapezoid rate
        b = 2.0 * k**2
        a = b + pot.screening**2
        if b == 0.0:
            return 4
        r = (a - math.sqrt(a * a - b * b)) / b
        return int(math.ceil(36.0 / max(-math.log(r), 1e-3))) + 8

    def angular_nodes(self, q):
        k = q / self.hbar
        pot = self.potential
        if isinstance(pot, GaussianPotential):
            return (pot.azimuthal_nodes((k * pot.width) ** 2) + 1) // 2
        if k == 0.0:
            return 2
        # pole of 1/(A - B x)^2 at x0 = 1 + kappa^2 / 2k^2 sets the Bernstein ellipse
        x0 = 1.0 + pot.screening**2 / (2.0 * k * k)
        rho = x0 + math.sqrt(x0 * x0 - 1.0)
        return int(math.ceil(20.0 / max(math.log(rho), 1e-3))) + 4

    def describe(self):
        pot = self.potential
        if isinstance(pot, GaussianPotential):
            return {"kind": "born_gaussian", "v0": pot.v0, "width": pot.width, "mass": self.mass}
        return {"kind": "born_yukawa", "strength": pot.strength, "screening": pot.screening, "mass": self.mass}


AmplitudeModel = Union[ConstantSWave, HardSphere, BornPotential]


# -- operations -------------------------------------------------------------

def auto_lmax(radius, q, hbar=1.0) -> int:
    """Smallest l_max >= ceil(kR)+10 whose neglected partial-wave tail is < 1e-10."""
    if not radius > 0:
        raise ValidationError("radius must be > 0")
    if not q > 0:
        raise ValidationError("auto_lmax needs q > 0")
    x = q * radius / hbar
    start = int(math.ceil(x)) + 10
    probe = start + 40
    j = spherical_jn_all(probe, x)
    y = spherical_yn_all(probe, np.array(x))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = j / y
    # |sin delta| = |t| / sqrt(1 + t^2); overflowed y gives t = 0
    s = np.abs(np.nan_to_num(t / np.sqrt(1.0 + t * t), nan=1.0))
    mag = (2 * np.arange(probe + 1) + 1) * s
    head = np.cumsum(mag)
    tail = head[-1] - head
    for lmax in range(start, probe):
        if tail[lmax] <= LMAX_TAIL_TOL * head[lmax]:
            return lmax
    return probe


def _check_model(model):
    if not hasattr(model, "amplitude_cos"):
        raise ValidationError(f"not an amplitude model: {model!r}")


def amplitude(model, q_in, n_out) -> complex:
    """f(q n_out, q_in) with q = |q_in|; elastic by construction."""
    _check_model(model)
    q_in = as_vec3(q_in, "q_in")
    n_out = as_vec3(n_out, "n_out")
    q = norm(q_in)
    if q == 0.0:
        raise ValidationError("q_in must be nonzero")
    if abs(norm(n_out) - 1.0) > 1e-9:
        raise ValidationError("n_out must be a unit vector")
    c = float(np.clip(np.dot(n_out, q_in) / q, -1.0, 1.0))
    return complex(model.amplitude_cos(q, c))


def amplitude_vectors(model, q_out, q_in):
    """Vectorised f(q_out, q_in) over leading axes, magnitude taken from q_in."""
    q_out = np.asarray(q_out, float)
    q_in = np.asarray(q_in, float)
    qi = np.linalg.norm(q_in, axis=-1)
    qo = np.linalg.norm(q_out, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.sum(q_out * q_in, axis=-1) / (qi * qo)
    return model.amplitude_cos(qi, np.clip(c, -1.0, 1.0))


def total_cross_section(model, q, nodes=64, tol=SIGMA_REFINE_TOL, max_nodes=4096) -> float:
    """sigma(q) = int dn |f(q n, q)|^2 by Gauss-Legendre in cos(theta), doubling."""
    _check_model(model)
    if not q > 0:
        raise ValidationError("total_cross_section needs q > 0")
    if isinstance(model, ConstantSWave):
        return 4.0 * math.pi * abs(model.f0) ** 2
    old = None
    n = nodes
    while n <= max_nodes:
        c, w = gauss_legendre(n)
        val = 2.0 * math.pi * float(np.dot(w, np.abs(model.amplitude_cos(q, c)) ** 2))
        if old is not None and abs(val - old) <= tol * abs(val):
            return val
        old = val
        n *= 2
    return old


def forward_amplitude(model, q) -> complex:
    return complex(model.amplitude_cos(q, 1.0))


def optical_theorem_residual(model, q) -> float:
    """|Im f(q,q) - q sigma / (4 pi hbar)| relative to q sigma / (4 pi hbar).

    Only unitary models (HardSphere) satisfy it; ConstantSWave and
    BornPotential violate it by construction and give O(1) residuals.
    """
    sigma = total_cross_section(model, q)
    target = q * sigma / (4.0 * math.pi * model.hbar)
    imf = forward_amplitude(model, q).imag
    scale = abs(target) if target != 0 else 1.0
    return abs(imf - target) / scale
