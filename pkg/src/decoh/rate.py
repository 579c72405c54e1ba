"""Localization rate F(R) by the double-sphere formula and by the per-collision route.

Both routes integrate the same physics along different coordinates:

* ``rate_general`` puts R on the polar axis and integrates the two
  directions n1, n2 over (cos theta1, cos theta2, phi2 - phi1), averaging
  |f|^2 over the relative azimuth with a periodic trapezoid rule.
* ``rate_via_replacement`` integrates the incoming direction s against R
  and the outgoing direction about s, where the azimuth about s is done in
  closed form through J0.

For central models F depends only on |R|, so curves are evaluated for many
separations in one pass over the momentum nodes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import j0

from .core import (
    BathSpec,
    ConvergenceError,
    DegenerateModelError,
    EpsilonMode,
    ValidationError,
    as_vec3,
    norm,
    ordered_map,
    orthonormal_frame,
)
from .quadrature import gauss_legendre, oscillatory_nodes, periodic_even_rule, refine
from .scattering import ConstantSWave, amplitude_vectors, total_cross_section
from .thermal import speed_distribution


class Route(enum.Enum):
    GENERAL = "General"
    REPLACEMENT = "Replacement"
    WEAK_COUPLING = "WeakCoupling"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class QuadratureSpec:
    """Base node counts; separations add oscillation-resolving nodes on top.

    Each refinement level doubles the base counts. ``max_refinements`` caps
    the loop and ``max_angular_nodes`` caps the per-dimension escalation.
    """

    radial_nodes: int = 32
    radial_qmax_thermal_units: float = 8.0
    angular_theta_nodes: int = 24
    angular_phi_nodes: int = 8
    refine_tol: float = 1e-9
    max_refinements: int = 4
    max_angular_nodes: int = 6000

    def __post_init__(self):
        for name in ("radial_nodes", "angular_theta_nodes", "angular_phi_nodes"):
            if int(getattr(self, name)) < 8:
                raise ValidationError(f"{name} must be >= 8")
        if not self.refine_tol > 0:
            raise ValidationError("refine_tol must be > 0")
        if not self.radial_qmax_thermal_units > 0:
            raise ValidationError("radial_qmax_thermal_units must be > 0")
        if self.max_refinements < 1:
            raise ValidationError("max_refinements must be >= 1")

    def describe(self):
        return {
            "radial_nodes": self.radial_nodes,
            "radial_qmax_thermal_units": self.radial_qmax_thermal_units,
            "angular_theta_nodes": self.angular_theta_nodes,
            "angular_phi_nodes": self.angular_phi_nodes,
            "refine_tol": self.refine_tol,
        }


DEFAULT_QUAD = QuadratureSpec()


@dataclass
class DecoherenceCurve:
    separations: list
    values: np.ndarray
    route: Route
    epsilon: EpsilonMode
    stderr: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def radii(self):
        return np.array([norm(r) for r in self.separations])


def _separations(separations):
    vecs = [as_vec3(r, "R") for r in separations]
    return vecs, np.array([norm(r) for r in vecs])


def _radial_rule(bath, quad, r_max, level):
    """Gauss-Legendre in q on [0, qmax]; node count grows with qmax * R_max."""
    qmax = quad.radial_qmax_thermal_units * bath.thermal_momentum
    # F's integrand oscillates in q roughly as exp(2 i q R / hbar)
    n = oscillatory_nodes(qmax * r_max / bath.hbar, quad.radial_nodes * 2**level)
    if n > quad.max_angular_nodes:
        raise ConvergenceError(f"radial node escalation exceeded cap ({n} nodes)")
    return gauss_legendre(n, 0.0, qmax)


def _angular_count(base, phase, extra, cap):
    n = oscillatory_nodes(phase, base) + extra
    if n > cap:
        raise ConvergenceError(f"angular node escalation exceeded cap ({n} nodes)")
    return n


def _finish(raw, scale, tol, diagnostics):
    """Clamp small negatives to 0; larger negatives signal a broken quadrature."""
    values = np.array(raw, dtype=float)
    neg = values < 0
    if np.any(values < -tol * scale):
        worst = float(values.min())
        raise ConvergenceError(f"quadrature produced negative rate {worst:.3e}", abs(worst))
    diagnostics["clamped_negatives"] = int(np.count_nonzero(neg))
    values[neg] = 0.0
    return values


# -- general (double sphere) route -------------------------------------------

def _double_sphere(model, q, radii, hbar, base_c, base_phi, cap):
    """J(q, R) = int dn1 dn2 / 4pi (1 - cos(q (n1-n2).R / hbar)) |f(q n2, q n1)|^2 for all R.

    Returns (J values, sigma(q) from the same grid, imaginary residue).
    """
    a_max = q * float(np.max(radii)) / hbar if radii.size else 0.0
    nc = _angular_count(base_c, a_max, model.angular_nodes(q), cap)
    c, w = gauss_legendre(nc)
    if getattr(model, "isotropic", False):
        wmat = np.full((nc, nc), abs(model.f0) ** 2)
    else:
        phi, wphi = periodic_even_rule(model.azimuthal_nodes(q) + base_phi)
        s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        iu, ju = np.triu_indices(nc)
        cosg = (c[iu] * c[ju])[:, None] + (s[iu] * s[ju])[:, None] * np.cos(phi)[None, :]
        f2 = np.abs(model.amplitude_cos(q, np.clip(cosg, -1.0, 1.0))) ** 2
        wpair = f2 @ wphi
        wmat = np.empty((nc, nc))
        wmat[iu, ju] = wpair
        wmat[ju, iu] = wpair
    ww = wmat * np.outer(w, w)
    sigma = math.pi * float(np.sum(ww))
    diff = c[:, None] - c[None, :]
    out = np.empty(radii.size)
    imag = 0.0
    for k, r in enumerate(radii):
        a = q * r / hbar
        out[k] = 2.0 * math.pi * float(np.sum(ww * np.sin(0.5 * a * diff) ** 2))
        imag = max(imag, abs(math.pi * float(np.sum(ww * np.sin(a * diff)))))
    return out, sigma, imag


def _general_curve(bath, model, radii, quad):
    diagnostics = {}
    if bath.density == 0.0 or radii.size == 0:
        return np.zeros(radii.size), {"levels": 0, "achieved": 0.0}
    r_max = float(np.max(radii))
    state = {}

    def evaluate(level):
        qn, qw = _radial_rule(bath, quad, r_max, level)
        base_c = quad.angular_theta_nodes * 2**level
        base_phi = quad.angular_phi_nodes * 2**level

        def node(q):
            return _double_sphere(model, q, radii, bath.hbar, base_c, base_phi, quad.max_angular_nodes)

        parts = ordered_map(node, qn)
        weight = qw * speed_distribution(bath, qn) * qn / bath.mass * bath.density
        jmat = np.array([p[0] for p in parts])
        sig = np.array([p[1] for p in parts])
        state["imag"] = float(np.abs(weight) @ np.array([p[2] for p in parts]))
        state["sat"] = float(weight @ sig)
        state["nodes"] = int(qn.size)
        return weight @ jmat

    # floor relative to the collision rate keeps tiny-R points from stalling refinement
    evaluate0 = evaluate(0)
    cache = {0: evaluate0}
    floor = 1e-6 * state["sat"]
    value, achieved, level = refine(
        lambda lv: cache[lv] if lv in cache else evaluate(lv),
        quad.refine_tol,
        quad.max_refinements,
        floor=floor,
        what="general-route quadrature",
    )
    imag = state["imag"]
    if imag > quad.refine_tol * max(state["sat"], 1e-300):
        raise ConvergenceError("imaginary residue of the double-sphere quadrature too large", imag)
    diagnostics.update(
        levels=level,
        achieved=achieved,
        radial_nodes=state["nodes"],
        imaginary_residue=imag,
        saturation_estimate=state["sat"],
    )
    values = _finish(value, state["sat"], quad.refine_tol, diagnostics)
    return values, diagnostics


def check_compatible(bath, model):
    """The model must share the bath's hbar, and a Born amplitude the gas-particle mass."""
    hb = getattr(model, "hbar", bath.hbar)
    if not math.isclose(hb, bath.hbar, rel_tol=1e-12):
        raise ValidationError(f"model hbar {hb!r} differs from the bath's {bath.hbar!r}")
    mass = getattr(model, "mass", None)
    if mass is not None and not math.isclose(mass, bath.mass, rel_tol=1e-12):
        raise ValidationError(f"Born amplitude mass {mass!r} differs from the gas mass {bath.mass!r}")


def _metadata(bath, model, quad, extra):
    meta = {
        "bath": {"mass": bath.mass, "temperature": bath.temperature, "density": bath.density, "hbar": bath.hbar},
        "model": model.describe() if hasattr(model, "describe") else repr(model),
        "quad": quad.describe(),
    }
    meta.update(extra)
    return meta


def rate_general_curve(bath, model, separations, quad=None, epsilon=EpsilonMode.CORRECTED):
    quad = quad or DEFAULT_QUAD
    epsilon = EpsilonMode.parse(epsilon)
    check_compatible(bath, model)
    vecs, radii = _separations(separations)
    values, diag = _general_curve(bath, model, radii, quad)
    values = epsilon.multiplier * values
    return DecoherenceCurve(vecs, values, Route.GENERAL, epsilon, None, _metadata(bath, model, quad, diag))


def rate_general(bath, model, R, quad=None, epsilon=EpsilonMode.CORRECTED) -> float:
    """F(R) = eps n int dq nu(q) (q/m) int dn1 dn2 / 4pi (1 - e^{i q (n1-n2).R/hbar}) |f|^2."""
    return float(rate_general_curve(bath, model, [R], quad, epsilon).values[0])


# -- replacement route -------------------------------------------------------

def _one_minus_j0(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.05
    x2 = x * x / 4.0
    series = x2 - x2**2 / 4.0 + x2**3 / 36.0 - x2**4 / 576.0
    return np.where(small, series, 1.0 - j0(x))


def _outgoing_rule(model, q, base, phase):
    n = oscillatory_nodes(phase, base) + model.angular_nodes(q)
    x, w = gauss_legendre(n)
    f2 = np.abs(model.amplitude_cos(q, x)) ** 2
    return x, w * f2


def _loss_integral(x, wf2, a, cos_t):
    """int dn (1 - e^{i a (cos_t - n.R_hat)}) |f|^2 with the azimuth about p done exactly."""
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    sin_g = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    phase = a * cos_t * (1.0 - x)
    jj = j0(a * sin_t * sin_g)
    one_minus = 2.0 * np.sin(0.5 * phase) ** 2 + np.cos(phase) * _one_minus_j0(a * sin_t * sin_g)
    re = 2.0 * math.pi * float(np.dot(wf2, one_minus))
    im = -2.0 * math.pi * float(np.dot(wf2, np.sin(phase) * jj))
    return complex(re, im)


def scattering_loss(model, p, R, base=24, tol=1e-10, max_level=5):
    """(int dn (1 - e^{i (p - p n).R / hbar}) |f(p n, p)|^2, sigma) on one shared angular rule."""
    p = as_vec3(p, "p")
    R = as_vec3(R, "R")
    pm = norm(p)
    if pm == 0.0:
        raise ValidationError("p must be nonzero")
    rm = norm(R)
    a = pm * rm / model.hbar
    cos_t = float(np.dot(p, R) / (pm * rm)) if rm > 0 else 1.0

    def evaluate(level):
        x, wf2 = _outgoing_rule(model, pm, base * 2**level, 2.0 * a)
        sigma = 2.0 * math.pi * float(np.sum(wf2))
        loss = _loss_integral(x, wf2, a, cos_t) if rm > 0 else 0j
        return np.array([loss.real, loss.imag, sigma])

    if rm == 0.0:
        val = evaluate(0)
    else:
        scale = evaluate(0)[2]
        val, _, _ = refine(evaluate, tol, max_level, floor=1e-3 * scale, what="angular quadrature")
    return complex(val[0], val[1]), float(val[2])


def per_collision_decoherence(model, p, R, base=24, tol=1e-10, max_level=5) -> complex:
    """eta_p(R) = 1 - (1/sigma(p)) int dn (1 - e^{i (p - p n).R / hbar}) |f(p n, p)|^2."""
    loss, sigma = scattering_loss(model, p, R, base, tol, max_level)
    if sigma == 0.0:
        raise DegenerateModelError("sigma(p) = 0: decoherence function undefined")
    return 1.0 - loss / sigma


def _replacement_node(model, q, radii, hbar, base, cap):
    """int ds/4pi int dn (1 - Re e^{i q (s - n).R / hbar}) |f|^2 for each R, s against R."""
    a_max = q * float(np.max(radii)) / hbar
    ns = _angular_count(base, 2.0 * a_max, 0, cap)
    cs, ws = gauss_legendre(ns)
    x, wf2 = _outgoing_rule(model, q, base, 2.0 * a_max)
    sin_g = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    sin_s = np.sqrt(np.clip(1.0 - cs * cs, 0.0, None))
    out = np.empty(radii.size)
    for k, r in enumerate(radii):
        a = q * r / hbar
        phase = a * np.outer(cs, 1.0 - x)
        kern = 2.0 * np.sin(0.5 * phase) ** 2 + np.cos(phase) * _one_minus_j0(a * np.outer(sin_s, sin_g))
        # (1/4pi) * 2pi (s azimuth) * 2pi (outgoing azimuth about s)
        out[k] = math.pi * float(ws @ (kern @ wf2))
    return out


def _replacement_curve(bath, model, radii, quad):
    if bath.density == 0.0 or radii.size == 0:
        return np.zeros(radii.size), {"levels": 0, "achieved": 0.0}
    r_max = float(np.max(radii))
    sat = {}

    def evaluate(level):
        qn, qw = _radial_rule(bath, quad, r_max, level)
        base = quad.angular_theta_nodes * 2**level
        weight = bath.density * qw * speed_distribution(bath, qn) * qn / bath.mass
        rows = ordered_map(
            lambda q: _replacement_node(model, q, radii, bath.hbar, base, quad.max_angular_nodes), qn
        )
        sig = np.array([total_cross_section(model, q) for q in qn]) if level == 0 else None
        if sig is not None:
            sat["value"] = float(weight @ sig)
        return weight @ np.array(rows)

    cache = {0: evaluate(0)}
    value, achieved, level = refine(
        lambda lv: cache[lv] if lv in cache else evaluate(lv),
        quad.refine_tol,
        quad.max_refinements,
        floor=1e-6 * sat["value"],
        what="replacement-route quadrature",
    )
    diag = {"levels": level, "achieved": achieved, "saturation_estimate": sat["value"]}
    return _finish(value, sat["value"], quad.refine_tol, diag), diag


def rate_via_replacement_curve(bath, model, separations, quad=None):
    quad = quad or DEFAULT_QUAD
    check_compatible(bath, model)
    vecs, radii = _separations(separations)
    values, diag = _replacement_curve(bath, model, radii, quad)
    return DecoherenceCurve(
        vecs, values, Route.REPLACEMENT, EpsilonMode.CORRECTED, None, _metadata(bath, model, quad, diag)
    )


def rate_via_replacement(bath, model, R, quad=None) -> float:
    """F(R) = n int dp mu(p) (p/m) sigma(p) (1 - Re eta_p(R))."""
    return float(rate_via_replacement_curve(bath, model, [R], quad).values[0])


# -- diagnostics -------------------------------------------------------------

def conservation_check(model, p, tol=1e-13, max_level=6) -> float:
    """|int dn |f(p n, p)|^2 / sigma(p) - 1| with the sphere integral done in a lab frame.

    sigma comes from the Gauss-Legendre rule about p; the numerator uses a
    (theta, phi) product rule about a fixed lab axis tilted away from p.
    """
    p = as_vec3(p, "p")
    pm = norm(p)
    if pm == 0.0:
        raise ValidationError("p must be nonzero")
    sigma = total_cross_section(model, pm)
    if sigma == 0.0:
        raise DegenerateModelError("sigma(p) = 0")
    axis = np.array([0.3, -0.5, 0.8])
    axis /= np.linalg.norm(axis)
    e1, e2 = orthonormal_frame(axis)
    base = 16 + model.angular_nodes(pm) + getattr(model, "azimuthal_nodes", lambda q: 0)(pm)

    def evaluate(level):
        nt = base * 2**level
        ct, wt = gauss_legendre(nt)
        nphi = 2 * nt
        phi = 2.0 * math.pi * np.arange(nphi) / nphi
        st = np.sqrt(1.0 - ct * ct)
        dirs = (
            ct[:, None, None] * axis
            + (st[:, None] * np.cos(phi)[None, :])[..., None] * e1
            + (st[:, None] * np.sin(phi)[None, :])[..., None] * e2
        )
        f2 = np.abs(amplitude_vectors(model, pm * dirs, np.broadcast_to(p, dirs.shape))) ** 2
        return np.array([float(wt @ f2.mean(axis=1)) * 2.0 * math.pi])

    val, _, _ = refine(evaluate, tol, max_level, what="conservation quadrature")
    return abs(float(val[0]) / sigma - 1.0)


def saturation_rate(bath, model, quad=None) -> float:
    """Large-separation limit n int nu(q) (q/m) sigma(q) dq, the total collision rate."""
    quad = quad or DEFAULT_QUAD
    check_compatible(bath, model)
    if bath.density == 0.0:
        return 0.0
    qmax = quad.radial_qmax_thermal_units * bath.thermal_momentum
    if isinstance(model, ConstantSWave):
        sig = lambda q: np.full(np.shape(q), 4.0 * math.pi * model.f0**2)
    else:
        sig = lambda q: np.array([total_cross_section(model, float(v)) for v in q])

    def evaluate(level):
        qn, qw = gauss_legendre(quad.radial_nodes * 2**level, 0.0, qmax)
        return np.array([float(qw @ (speed_distribution(bath, qn) * qn / bath.mass * sig(qn)))])

    val, _, _ = refine(evaluate, 1e-13, quad.max_refinements + 2, what="saturation quadrature")
    return bath.density * float(val[0])


def localization_coefficient(curve: DecoherenceCurve, r_max=None, quadratic_tol=0.01):
    """Least-squares Lambda in F(R) ~ Lambda R^2 over the small-R points of a curve.

    Without ``r_max`` the quadratic regime is taken as the leading run of
    points (by |R|) whose F/R^2 stays within ``quadratic_tol`` of the value
    at the smallest nonzero separation. Returns (Lambda, relative rms residual).
    """
    radii = curve.radii
    values = np.asarray(curve.values, dtype=float)
    keep = radii > 0
    radii, values = radii[keep], values[keep]
    order = np.argsort(radii)
    radii, values = radii[order], values[order]
    if r_max is not None:
        sel = radii <= r_max
    else:
        if radii.size == 0:
            raise ValidationError("curve has no nonzero separations")
        ratio = values / radii**2
        sel = np.zeros(radii.size, bool)
        for i, rv in enumerate(ratio):
            if abs(rv - ratio[0]) > quadratic_tol * abs(ratio[0]):
                break
            sel[i] = True
    if np.count_nonzero(sel) < 4:
        raise ValidationError("need at least 4 separations in the quadratic regime")
    r2 = radii[sel] ** 2
    lam = float(np.dot(values[sel], r2) / np.dot(r2, r2))
    resid = values[sel] - lam * r2
    rel = float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(values[sel] ** 2)))
    return lam, rel
