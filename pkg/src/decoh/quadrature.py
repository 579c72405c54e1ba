"""Cached quadrature rules and the node-doubling driver shared by the rate routes."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .core import ConvergenceError


@lru_cache(maxsize=256)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=-1.0, b=1.0):
    """n-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (b + a), half * w


@lru_cache(maxsize=64)
def gauss_hermite(n):
    """Nodes/weights for the weight exp(-x^2) on the real line."""
    x, w = np.polynomial.hermite.hermgauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def oscillatory_nodes(phase_range, base):
    """Gauss-Legendre count resolving exp(i*a*x) on [-1, 1] for a = phase_range.

    Calibrated so the product rule for the double-sphere kernel reaches
    machine precision once ``base`` >= 24.
    """
    a = abs(float(phase_range))
    return int(base + math.ceil(0.5 * a + 2.5 * a ** (1.0 / 3.0)))


def periodic_even_rule(n):
    """Trapezoid rule for an even 2*pi-periodic integrand, normalised to mean.

    Returns angles in [0, pi] and weights summing to 1 such that
    sum(w * g(phi)) equals (1/2pi) * integral of g over a full period.
    """
    n = max(2, int(n))
    if n % 2:
        n += 1
    k = np.arange(n // 2 + 1)
    phi = 2.0 * math.pi * k / n
    w = np.full(k.shape, 2.0 / n)
    w[0] = w[-1] = 1.0 / n
    return phi, w


def refine(evaluate, tol, max_level, floor=0.0, what="quadrature"):
    """Evaluate at successive refinement levels until consecutive results agree.

    ``evaluate(level)`` returns an array; agreement is checked pointwise as
    |new - old| <= tol * max(|new|, floor). Returns (value, achieved, level).
    """
    old = np.asarray(evaluate(0), dtype=float)
    achieved = math.inf
    for level in range(1, max_level + 1):
        new = np.asarray(evaluate(level), dtype=float)
        scale = np.maximum(np.abs(new), floor)
        diff = np.abs(new - old)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
        achieved = float(np.max(rel)) if rel.size else 0.0
        if achieved <= tol:
            return new, achieved, level
        old = new
    raise ConvergenceError(f"{what} did not converge after {max_level} refinements", achieved)
