"""Weak-coupling route: bath correlation spectrum Gbar_q(omega) and F(R) from it.

Vbar has units energy / momentum^3. Gbar then has units
1 / (energy * time^2 * momentum^3), which is what makes
8 pi^3 hbar int d^3q Gbar_q(0) a rate. Tests compare only dimensionless
ratios of these quantities.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad as scipy_quad

from .core import BathSpec, EpsilonMode, ValidationError, as_vec3
from .quadrature import gauss_legendre, oscillatory_nodes, refine
from .rate import DEFAULT_QUAD, DecoherenceCurve, Route, _finish, _metadata, _separations
from .scattering import GaussianPotential, PotentialModel

BORN_STRENGTH_LIMIT = 0.3


class BornValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GbarSpec:
    bath: BathSpec
    potential: PotentialModel


def potential_fourier(potential, q, hbar=1.0):
    """Vbar(q) = int d^3r / (2 pi hbar)^3 V(r) exp(-i q.r / hbar); q of shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (3,):
        raise ValidationError("q must be a momentum vector (last axis of length 3)")
    return potential.fourier(np.linalg.norm(q, axis=-1), hbar)


def born_strength_check(potential, mass, hbar=1.0):
    """Dimensionless coupling; warns when a Gaussian potential is outside the Born regime."""
    strength = potential.born_strength(mass, hbar)
    if isinstance(potential, GaussianPotential) and strength > BORN_STRENGTH_LIMIT:
        warnings.warn(
            f"2m|V0|w^2/hbar^2 = {strength:.3g} > {BORN_STRENGTH_LIMIT}: Born approximation is doubtful",
            BornValidityWarning,
            stacklevel=2,
        )
    return strength


def _check_q(q):
    if not (np.all(np.isfinite(q)) and np.all(np.asarray(q) > 0)):
        raise ValidationError("Gbar needs q > 0 (1/q singularity at the origin)")


def gbar_closed(spec: GbarSpec, q, omega):
    """(2 pi n m hbar / q) |Vbar|^2 (beta/2 pi m)^{1/2} exp(-(beta m hbar^2 / 2q^2)(omega - q^2/2m hbar)^2)."""
    q = np.asarray(q, dtype=float)
    _check_q(q)
    b = spec.bath
    m, hb, beta = b.mass, b.hbar, b.beta
    vbar = spec.potential.fourier(q, hb)
    pref = 2.0 * math.pi * b.density * m * hb / q * vbar**2 * math.sqrt(beta / (2.0 * math.pi * m))
    expo = -(beta * m * hb**2 / (2.0 * q * q)) * (omega - q * q / (2.0 * m * hb)) ** 2
    return pref * np.exp(expo)


def p_cut(spec: GbarSpec, q, omega):
    """Smallest incoming momentum that can transfer q at frequency omega: |2 m hbar omega - q^2| / 2q."""
    b = spec.bath
    return abs(2.0 * b.mass * b.hbar * omega - q * q) / (2.0 * q)


def gbar_integral(spec: GbarSpec, q, omega) -> float:
    """(pi m hbar / q) |Vbar(q)|^2 n int_{p_cut}^inf nu(p)/p dp by adaptive quadrature."""
    q = float(q)
    _check_q(q)
    b = spec.bath
    pc = p_cut(spec, q, omega)
    vbar = float(spec.potential.fourier(q, b.hbar))
    pref = 4.0 * math.pi * (b.beta / (2.0 * math.pi * b.mass)) ** 1.5
    # nu(p)/p written without the division so p = 0 is harmless
    nu_over_p = lambda p: pref * p * math.exp(-b.beta * p * p / (2.0 * b.mass))
    tail, _ = scipy_quad(nu_over_p, pc, math.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.pi * b.mass * b.hbar / q * vbar**2 * b.density * tail


def golden_rule_window(bath: BathSpec) -> float:
    """beta hbar: coarse-graining times must greatly exceed it."""
    return bath.beta * bath.hbar


def _weak_curve(bath, potential, radii, quad):
    if bath.density == 0.0 or radii.size == 0:
        return np.zeros(radii.size), {"levels": 0, "achieved": 0.0}
    spec = GbarSpec(bath, potential)
    # Gbar_q(0) decays like exp(-q^2 / 4 q_th^2), twice as slowly as the MB weight
    qmax = 2.0 * quad.radial_qmax_thermal_units * bath.thermal_momentum
    r_max = float(np.max(radii))
    hb = bath.hbar
    sat = {}

    def evaluate(level):
        nq = oscillatory_nodes(qmax * r_max / (2.0 * hb), quad.radial_nodes * 2**level)
        qn, qw = gauss_legendre(nq, 0.0, qmax)
        g = gbar_closed(spec, qn, 0.0)
        radial = qw * 2.0 * math.pi * qn * qn * g
        sat["value"] = 8.0 * math.pi**3 * hb * 2.0 * float(np.sum(radial))
        out = np.empty(radii.size)
        for k, r in enumerate(radii):
            nc = oscillatory_nodes(qmax * r / hb, quad.angular_theta_nodes * 2**level)
            c, w = gauss_legendre(nc)
            # 1 - cos(q R c / hbar) = 2 sin^2(q R c / 2 hbar); the sine part is odd in c
            kern = 2.0 * np.sin(0.5 * np.outer(qn, c) * r / hb) ** 2
            out[k] = 8.0 * math.pi**3 * hb * float(radial @ (kern @ w))
        return out

    cache = {0: evaluate(0)}
    value, achieved, level = refine(
        lambda lv: cache[lv] if lv in cache else evaluate(lv),
        quad.refine_tol,
        quad.max_refinements,
        floor=1e-6 * sat["value"],
        what="weak-coupling quadrature",
    )
    diag = {
        "levels": level,
        "achieved": achieved,
        "saturation_estimate": sat["value"],
        "golden_rule_window": golden_rule_window(bath),
    }
    return _finish(value, sat["value"], quad.refine_tol, diag), diag


def rate_weak_coupling_curve(bath, potential, separations, quad=None):
    quad = quad or DEFAULT_QUAD
    vecs, radii = _separations(separations)
    values, diag = _weak_curve(bath, potential, radii, quad)
    meta = _metadata(bath, _PotentialTag(potential), quad, diag)
    return DecoherenceCurve(vecs, values, Route.WEAK_COUPLING, EpsilonMode.CORRECTED, None, meta)


def rate_weak_coupling(bath, potential, R, quad=None) -> float:
    """F(R) = 8 pi^3 hbar int d^3q (1 - e^{-i q.R/hbar}) Gbar_q(0)."""
    as_vec3(R, "R")
    return float(rate_weak_coupling_curve(bath, potential, [R], quad).values[0])


@dataclass(frozen=True)
class _PotentialTag:
    potential: PotentialModel

    def describe(self):
        pot = self.potential
        if isinstance(pot, GaussianPotential):
            return {"kind": "gaussian_potential", "v0": pot.v0, "width": pot.width}
        return {"kind": "yukawa_potential", "strength": pot.strength, "screening": pot.screening}
