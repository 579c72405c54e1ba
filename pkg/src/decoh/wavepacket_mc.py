"""Gaussian wave-packet collisions: single-packet kernel, reduced integrals, Monte Carlo rate.

A packet psi_{r p} with momentum width b hits the Brownian particle held in
the superposition of R1 and R2. The change of rho(R1, R2) per packet is
<psi|A|psi> rho, with

    <psi|A|psi> = int dq G_b(q - p) A^r(q),
    A^r(q) = Gamma_q(r - Rbar) K1(q) - (Gamma_q(r - R1) + Gamma_q(r - R2)) sigma(q) / 2
             + (2 pi i hbar / q) (Gamma_q(r - R1) - Gamma_q(r - R2)) Re f(q, q),

where K1(q) = int dn e^{i (q - q n).(R1 - R2) / hbar} |f(q n, q)|^2 and G_b
is the normalised Gaussian exp(-|q - p|^2 / b^2) / (pi b^2)^{3/2}.

Each Gamma term is integrated over q with Hermite nodes adapted to the
product G_b * Gamma. A packet started a distance s upstream has an
effective transverse width sqrt(a^2 + (s b / p)^2) at the scatterer, far
narrower in q-space than b, so nodes placed for G_b alone would miss it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erf

from .core import ValidationError, as_vec3, norm, ordered_map, unit
from .quadrature import gauss_hermite, gauss_legendre, periodic_even_rule
from .rate import _loss_integral, _outgoing_rule, scattering_loss
from .scattering import amplitude_vectors
from .thermal import PacketSplit, gamma_profile, split_bath

SLOW_PACKET_RATIO = 5.0
# the estimator carries an O(T_bar / T) flux bias, so the MC default is smaller
MC_BAR_FRACTION = 0.001
CHUNK = 4096


# -- kernels of the exact reduction -----------------------------------------

def m_kernels(model, q, delta, n_hat):
    """(M1, M2) at momentum q, transverse offset delta (perpendicular to q) and direction n_hat."""
    q = as_vec3(q, "q")
    delta = as_vec3(delta, "delta")
    n_hat = unit(n_hat, "n_hat")
    qm = norm(q)
    if qm == 0.0:
        raise ValidationError("q must be nonzero")
    if abs(np.dot(delta, q)) > 1e-12 * qm * max(norm(delta), 1.0):
        raise ValidationError("delta must be perpendicular to q")
    hb = model.hbar
    q_plus = q + 0.5 * delta
    q_minus = q - 0.5 * delta
    big_q = n_hat * math.sqrt(qm * qm + 0.25 * float(np.dot(delta, delta)))
    f_fwd = complex(amplitude_vectors(model, q_plus, q_minus))
    f_bwd = complex(amplitude_vectors(model, q_minus, q_plus))
    m1 = (f_fwd + np.conj(f_bwd)) / (2.0 * math.pi * hb * qm)
    f2 = complex(amplitude_vectors(model, big_q, q_plus))
    f1 = complex(amplitude_vectors(model, big_q, q_minus))
    m2 = norm(big_q) / qm * np.conj(f2) * f1 / (4.0 * math.pi**2 * hb**2)
    return complex(m1), complex(m2)


def gaussian_packet_bilinear(split: PacketSplit, r_o, p_o):
    """u(q1, q2) = <q1|psi><psi|q2> for the minimum-uncertainty packet at (r_o, p_o)."""
    r_o = as_vec3(r_o, "r_o")
    p_o = as_vec3(p_o, "p_o")
    b, hb = split.b, split.hbar

    def u(q1, q2):
        q1 = np.asarray(q1, float)
        q2 = np.asarray(q2, float)
        d1 = q1 - p_o
        d2 = q2 - p_o
        env = np.exp(-(np.sum(d1 * d1, -1) + np.sum(d2 * d2, -1)) / (2.0 * b * b))
        phase = np.sum((q2 - q1) * r_o, -1) / hb
        return env * np.exp(1j * phase) / (math.pi * b * b) ** 1.5

    return u


def _frames(vectors):
    """Row-wise orthonormal (e1, e2) perpendicular to each row of ``vectors``."""
    v = vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)
    trial = np.where(np.abs(v[..., :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e1 = trial - np.sum(trial * v, -1, keepdims=True) * v
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(v, e1)
    return v, e1, e2


def _sphere_rule(n_theta, n_phi):
    ct, wt = gauss_legendre(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - ct * ct)
    dirs = np.stack(
        [np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(ct, np.ones(n_phi))], axis=-1
    ).reshape(-1, 3)
    w = np.repeat(wt, n_phi) * (2.0 * math.pi / n_phi)
    return dirs, w


def _transverse_hermite(split, q_center, scale, nodes):
    """Nodes and weights for int dq g(q) ~ sum w g, weight exp(-|q - c|^2 / scale^2) divided out."""
    x, w = gauss_hermite(nodes)
    g = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return q_center + scale * g, wt * scale**3 * np.exp(np.sum(g * g, -1))


def reduced_integral_i2(u, model, R, center, scale, nodes=8, n_theta=None, n_phi=None):
    """I2(R) = int dn dq int_{q perp} dDelta u(q - Delta/2, q + Delta/2) e^{i Q.R / hbar} M2(q, n, Delta).

    ``u`` must be concentrated within a few ``scale`` of ``center`` in q;
    q uses a 3-D Hermite grid there, Delta a 2-D Hermite grid of width
    2 * scale in the plane perpendicular to q, and n a Gauss-Legendre by
    trapezoid sphere rule.
    """
    R = as_vec3(R, "R")
    center = as_vec3(center, "center")
    hb = model.hbar
    qn, qw = _transverse_hermite(None, center, scale, nodes)
    x, w = gauss_hermite(nodes)
    dx, dy = np.meshgrid(x, x, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    dw = np.outer(w, w).ravel() * np.exp(dx * dx + dy * dy) * (2.0 * scale) ** 2
    qmax = norm(center) + 6.0 * scale
    if n_theta is None:
        n_theta = 24 + int(math.ceil(qmax * norm(R) / hb)) + model.angular_nodes(qmax)
    if n_phi is None:
        n_phi = 2 * n_theta
    dirs, sw = _sphere_rule(n_theta, n_phi)
    total = 0j
    for qv, wq in zip(qn, qw):
        qm = norm(qv)
        _, e1, e2 = orthonormal_frame_pair(qv)
        delta = 2.0 * scale * (dx[:, None] * e1 + dy[:, None] * e2)
        q1 = qv - 0.5 * delta
        q2 = qv + 0.5 * delta
        uval = u(q1, q2)
        big = np.sqrt(qm * qm + 0.25 * np.sum(delta * delta, -1))
        qvec = big[:, None, None] * dirs[None, :, :]
        fa = amplitude_vectors(model, qvec, np.broadcast_to(q1[:, None, :], qvec.shape))
        fb = amplitude_vectors(model, qvec, np.broadcast_to(q2[:, None, :], qvec.shape))
        phase = np.exp(1j * (qvec @ R) / hb)
        inner = (np.conj(fb) * fa * phase) @ sw
        m2 = big / qm * inner / (4.0 * math.pi**2 * hb**2)
        total += wq * np.sum(dw * uval * m2)
    return complex(total)


def smeared_delta_i2(u, model, R, center, scale, width, samples=400_000, seed=0):
    """Brute-force I2 with the on-shell delta between |q1| and |q2| smeared to a Gaussian.

    Works on the unreduced six-dimensional (q1, q2) integral,
    int dq1 dq2 u(q1, q2) g_width(|q2| - |q1|) (q1 / 4 pi^2 hbar^2 q2)
        int dn' e^{i q1 n'.R / hbar} f*(q1 n', q2) f(q1 n', q1),
    by importance-sampled Monte Carlo: the midpoint q ~ N(center, scale^2/2),
    the transverse part of q2 - q1 ~ N(0, 2 scale^2) and its component along
    q ~ N(0, width^2). The outgoing direction n' is integrated in closed form
    for isotropic models and sampled uniformly otherwise. Returns
    (value, stderr_real, stderr_imag).
    """
    R = as_vec3(R, "R")
    center = as_vec3(center, "center")
    if not (width > 0 and scale > 0):
        raise ValidationError("width and scale must be > 0")
    hb = model.hbar
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5EED])))
    acc = []
    chunk = 50_000
    for start in range(0, int(samples), chunk):
        n = min(chunk, int(samples) - start)
        q = center + rng.normal(0.0, scale / math.sqrt(2.0), size=(n, 3))
        qh, e1, e2 = _frames(q)
        perp = rng.normal(0.0, math.sqrt(2.0) * scale, size=(n, 2))
        par = rng.normal(0.0, width, size=n)
        delta = perp[:, :1] * e1 + perp[:, 1:] * e2 + par[:, None] * qh
        q1 = q - 0.5 * delta
        q2 = q + 0.5 * delta
        m1 = np.linalg.norm(q1, axis=-1)
        m2 = np.linalg.norm(q2, axis=-1)
        dq = m2 - m1
        smear = np.exp(-0.5 * (dq / width) ** 2) / (math.sqrt(2.0 * math.pi) * width)
        d_center = q - center
        dens = (
            np.exp(-np.sum(d_center**2, -1) / scale**2) / (math.pi * scale * scale) ** 1.5
            * np.exp(-np.sum(perp**2, -1) / (4.0 * scale**2)) / (4.0 * math.pi * scale * scale)
            * np.exp(-0.5 * (par / width) ** 2) / (math.sqrt(2.0 * math.pi) * width)
        )
        if getattr(model, "isotropic", False):
            rm = norm(R)
            inner = 4.0 * math.pi * model.f0**2 * np.sinc(m1 * rm / (math.pi * hb))
        else:
            nv = rng.normal(size=(n, 3))
            nv /= np.linalg.norm(nv, axis=-1, keepdims=True)
            out = m1[:, None] * nv
            f_a = amplitude_vectors(model, out, q1)
            f_b = amplitude_vectors(model, out, q2)
            inner = 4.0 * math.pi * np.conj(f_b) * f_a * np.exp(1j * (out @ R) / hb)
        val = u(q1, q2) * smear * m1 / (4.0 * math.pi**2 * hb**2 * m2) * inner / dens
        acc.append(val)
    vals = np.concatenate(acc)
    n = vals.size
    return (
        complex(np.mean(vals)),
        float(np.std(vals.real, ddof=1) / math.sqrt(n)),
        float(np.std(vals.imag, ddof=1) / math.sqrt(n)),
    )


def richardson_zero_width(widths, values, errors):
    """Weighted least-squares fit v(s) = v0 + c s^2; returns (v0, stderr of v0, chi2)."""
    s2 = np.asarray(widths, float) ** 2
    v = np.asarray(values, float)
    e = np.asarray(errors, float)
    if s2.size < 3:
        raise ValidationError("need at least three widths")
    design = np.stack([np.ones_like(s2), s2], -1) / e[:, None]
    coef, *_ = np.linalg.lstsq(design, v / e, rcond=None)
    cov = np.linalg.inv(design.T @ design)
    chi2 = float(np.sum(((design @ coef) - v / e) ** 2))
    return float(coef[0]), float(math.sqrt(cov[0, 0])), chi2


def reduced_integral_i1(u, model, center, scale, nodes=8):
    """I1 = int dq int_{q perp} dDelta u(q - Delta/2, q + Delta/2) M1(q, Delta)."""
    center = as_vec3(center, "center")
    hb = model.hbar
    qn, qw = _transverse_hermite(None, center, scale, nodes)
    x, w = gauss_hermite(nodes)
    dx, dy = np.meshgrid(x, x, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    dw = np.outer(w, w).ravel() * np.exp(dx * dx + dy * dy) * (2.0 * scale) ** 2
    total = 0j
    for qv, wq in zip(qn, qw):
        qm = norm(qv)
        _, e1, e2 = orthonormal_frame_pair(qv)
        delta = 2.0 * scale * (dx[:, None] * e1 + dy[:, None] * e2)
        q1 = qv - 0.5 * delta
        q2 = qv + 0.5 * delta
        m1 = (amplitude_vectors(model, q2, q1) + np.conj(amplitude_vectors(model, q1, q2))) / (
            2.0 * math.pi * hb * qm
        )
        total += wq * np.sum(dw * u(q1, q2) * m1)
    return complex(total)


def orthonormal_frame_pair(v):
    vh, e1, e2 = _frames(np.asarray(v, float)[None, :])
    return vh[0], e1[0], e2[0]


# -- single-packet kernel ----------------------------------------------------

def _scatter_factors(model, q, D, base=32):
    """sigma(q), K1(q) and Re f(q, q) at momenta q of shape (N, 3)."""
    hb = model.hbar
    qm = np.linalg.norm(q, axis=-1)
    dm = norm(D)
    if getattr(model, "isotropic", False):
        s0 = 4.0 * math.pi * model.f0**2
        sigma = np.full(qm.shape, s0)
        k1 = s0 * np.exp(1j * (q @ D) / hb) * np.sinc(qm * dm / (math.pi * hb))
        ref = np.full(qm.shape, float(model.f0))
        return sigma, k1, ref
    sigma = np.empty(qm.shape)
    k1 = np.empty(qm.shape, complex)
    for i, (qv, mag) in enumerate(zip(q, qm)):
        a = mag * dm / hb
        x, wf2 = _outgoing_rule(model, mag, base, 2.0 * a)
        sigma[i] = 2.0 * math.pi * float(np.sum(wf2))
        loss = _loss_integral(x, wf2, a, float(np.dot(qv, D)) / (mag * dm)) if dm > 0 else 0j
        k1[i] = sigma[i] - loss
    ref = model.amplitude_cos(qm, 1.0).real
    return sigma, k1, ref


def _adapted_nodes(split, p, u, nodes, window=None, offset=None):
    """q nodes/weights with sum w S(q) ~ int dq G_b(q - p) Gamma_q(u) S(q), per row of p and u.

    Shapes: p, u (N, 3) -> q (N, M, 3), w (N, M) with M = nodes^3. With a
    ``window`` the weights are divided by the fraction of each node's
    transverse footprint that lies inside the square window, whose centre
    sits at ``offset`` (N, 2) from the footprint centre.
    """
    a, b = split.a, split.b
    ph, e1, e2 = _frames(p)
    pm = np.linalg.norm(p, axis=-1)
    s = -np.sum(u * ph, -1)
    rho1 = np.sum(u * e1, -1)[:, None]
    rho2 = np.sum(u * e2, -1)[:, None]
    x, w = gauss_hermite(nodes)
    xi, xj, xk = (g.ravel() for g in np.meshgrid(x, x, x, indexing="ij"))
    wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    par = b * xi[None, :]
    # a transverse offset xi_perp tilts the line by xi_perp / |p + xi_par|, so the
    # Gamma factor shifts the transverse centre differently on each longitudinal node
    c = s[:, None] / np.maximum(np.abs(pm[:, None] + par), 0.5 * b)
    prec = 1.0 / b**2 + c * c / a**2
    root = np.sqrt(prec)
    t1 = -(c * rho1 / a**2) / prec + xj[None, :] / root
    t2 = -(c * rho2 / a**2) / prec + xk[None, :] / root
    q = p[:, None, :] + par[..., None] * ph[:, None, :] + t1[..., None] * e1[:, None, :] + t2[..., None] * e2[:, None, :]
    qh = q / np.linalg.norm(q, axis=-1, keepdims=True)
    along = np.sum(qh * u[:, None, :], -1)
    perp = u[:, None, :] - along[..., None] * qh
    perp2 = np.sum(perp * perp, -1)
    # longitudinal Gaussian cancels the Hermite weight exactly; the transverse ones nearly
    expo = -(t1 * t1 + t2 * t2) / b**2 - perp2 / a**2 + xj[None, :] ** 2 + xk[None, :] ** 2
    norm_c = 1.0 / ((math.pi * b * b) ** 1.5 * math.pi * a * a)
    weight = wt[None, :] * (b / prec) * np.exp(expo) * norm_c
    if window is not None:
        # footprint of this longitudinal slice: exp(-rho^2 / (a^2 + c^2 b^2))
        width = np.sqrt(a * a + (c * b) ** 2)
        weight = weight / _window_mass(0.5 * window, offset[:, None, :], width)
    return q, weight


def _kernel_parts(split, model, p, r, R1, R2, nodes, window=None):
    """Return (main, forward) parts of <psi|A|psi> for packets (p, r) of shape (N, 3).

    ``main`` holds the first two Gamma terms; ``forward`` the Re f(q, q)
    term, which is purely imaginary. A ``window`` (square, centred on Rbar
    transverse to each p) applies the truncation correction to every term.
    """
    hb = model.hbar
    D = R1 - R2
    rbar = 0.5 * (R1 + R2)
    out_main = np.zeros(p.shape[0], complex)
    out_fwd = np.zeros(p.shape[0], complex)
    terms = ((rbar, "k1"), (R1, "one"), (R2, "two"))
    if window is not None:
        _, e1, e2 = _frames(p)
    for x_i, kind in terms:
        offset = None
        if window is not None:
            offset = np.stack([e1 @ (rbar - x_i), e2 @ (rbar - x_i)], -1)
        q, w = _adapted_nodes(split, p, r - x_i, nodes, window, offset)
        flat = q.reshape(-1, 3)
        sigma, k1, ref = _scatter_factors(model, flat, D)
        sigma, k1, ref = (v.reshape(w.shape) for v in (sigma, k1, ref))
        if kind == "k1":
            out_main += np.sum(w * k1, -1)
        else:
            out_main -= 0.5 * np.sum(w * sigma, -1)
            qm = np.linalg.norm(q, axis=-1)
            sign = 1.0 if kind == "one" else -1.0
            out_fwd += sign * 2j * math.pi * hb * np.sum(w * ref / qm, -1)
    return out_main, out_fwd


def single_packet_kernel(split, model, r_o, p_o, R1, R2, nodes=6) -> complex:
    """<psi|A|psi> for the packet centred at r_o with mean momentum p_o."""
    r_o, p_o, R1, R2 = (as_vec3(v, n) for v, n in ((r_o, "r_o"), (p_o, "p_o"), (R1, "R1"), (R2, "R2")))
    pm = norm(p_o)
    if pm == 0.0:
        raise ValidationError("p_o must be nonzero")
    if pm < SLOW_PACKET_RATIO * split.b:
        warnings.warn(f"p_o = {pm:.3g} < {SLOW_PACKET_RATIO} b: packet kernel approximations strained", stacklevel=2)
    main, fwd = _kernel_parts(split, model, p_o[None, :], r_o[None, :], R1, R2, nodes)
    return complex(main[0] + fwd[0])


def strong_condition_delta_rho(split, model, r_o, p_o, R1, R2) -> complex:
    """-Gamma_{p_o}(r_o - Rbar) int dn (1 - e^{i (p_o - p_o n).(R1 - R2)/hbar}) |f(p_o n, p_o)|^2."""
    r_o, p_o, R1, R2 = (as_vec3(v, n) for v, n in ((r_o, "r_o"), (p_o, "p_o"), (R1, "R1"), (R2, "R2")))
    D = R1 - R2
    if norm(D) > 0.1 * split.a:
        raise ValidationError("strong condition needs |R1 - R2| <= 0.1 a")
    if norm(D) == 0.0:
        return 0j
    gamma = float(gamma_profile(split, unit(p_o, "p_o"), r_o - 0.5 * (R1 + R2)))
    loss, _ = scattering_loss(model, p_o, D)
    return -gamma * loss


# -- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    samples: int = 100_000
    delta_t: Optional[float] = None
    transverse_window: Optional[float] = None
    bar_fraction: float = MC_BAR_FRACTION
    nodes: int = 6
    exclusion_widths: float = 5.0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if int(self.samples) < 1000:
            raise ValidationError("samples must be >= 1000")
        if not (0.0 < self.bar_fraction < 1.0):
            raise ValidationError("bar_fraction must lie in (0, 1)")
        if self.nodes < 2:
            raise ValidationError("nodes must be >= 2")
        for name in ("delta_t", "transverse_window"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be > 0")


@dataclass
class McEstimate:
    value: float
    stderr: float
    samples_used: int
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def default_delta_t(split, separation):
    """Long enough that packets starting within the excluded 5a are a ~0.05% slice of the slab."""
    return max(10000.0 * split.a, 50.0 * separation) / split.v_wp


def default_window(split, separation):
    """The narrowest window allowed; the truncation correction restores the rest."""
    return 6.0 * split.a + separation


def _window_mass(half, offset, width):
    """Fraction of a 2-D Gaussian exp(-|x - offset|^2 / width^2) inside [-half, half]^2."""
    out = np.ones(width.shape)
    for k in range(2):
        o = offset[..., k]
        out *= 0.5 * (erf((half - o) / width) + erf((half + o) / width))
    return out


def _chunk_stats(args):
    (index, count, seed, bath, split, model, R1, R2, dt, window, nodes, excl) = args
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    sd = split.hat_momentum_std
    p = rng.normal(0.0, sd, size=(count, 3))
    frac = rng.random(count)
    perp = (rng.random((count, 2)) - 0.5) * window
    pm = np.linalg.norm(p, axis=-1)
    length = pm / bath.mass * dt
    s = frac * length
    keep = s >= excl * split.a
    x = np.zeros(count)
    fwd = np.zeros(count)
    neglect = 0.0
    D = R1 - R2
    if np.any(keep):
        pk = p[keep]
        ph, e1, e2 = _frames(pk)
        rbar = 0.5 * (R1 + R2)
        r = rbar - s[keep, None] * ph + perp[keep, 0:1] * e1 + perp[keep, 1:2] * e2
        main, forward = _kernel_parts(split, model, pk, r, R1, R2, nodes, window)
        vol_rate = bath.density * pm[keep] / bath.mass * window**2
        x[keep] = -vol_rate * main.real
        fwd[keep] = -vol_rate * forward.imag
        neglect = float(np.max(split.b**2 * norm(D) / (split.hbar * pm[keep])))
    slow = int(np.count_nonzero(pm < SLOW_PACKET_RATIO * split.b))
    return {
        "sum": float(np.sum(x)),
        "sumsq": float(np.sum(x * x)),
        "fwd_sum": float(np.sum(fwd)),
        "fwd_sumsq": float(np.sum(fwd * fwd)),
        "excluded": int(count - np.count_nonzero(keep)),
        "neglect": neglect,
        "slow": slow,
    }


def mc_rate(bath, split, model, R1, R2, mc: McConfig) -> McEstimate:
    """Monte Carlo estimate of F(R1 - R2) from sampled packets and the single-packet kernel.

    ``split`` may be None, in which case it is built from ``mc.bar_fraction``.
    Packet momenta come from mu_hat (temperature T_hat); centres are
    uniform in the slab of length (p/m) Delta t upstream of Rbar times a
    square transverse window. Packets starting within ``exclusion_widths``
    packet widths of Rbar contribute nothing, and that fraction is reported.
    """
    R1 = as_vec3(R1, "R1")
    R2 = as_vec3(R2, "R2")
    if split is None:
        split = split_bath(bath, mc.bar_fraction)
    elif abs(split.bar_fraction - mc.bar_fraction) > 1e-12:
        raise ValidationError("split and McConfig disagree on bar_fraction")
    sep = norm(R1 - R2)
    dt = mc.delta_t if mc.delta_t is not None else default_delta_t(split, sep)
    window = mc.transverse_window if mc.transverse_window is not None else default_window(split, sep)
    if dt < 10.0 * split.a / split.v_wp:
        raise ValidationError("delta_t must be >= 10 a / v_wp")
    if dt * split.v_wp < 10.0 * sep:
        raise ValidationError("delta_t * v_wp must be >= 10 |R1 - R2|")
    if window < 6.0 * split.a + sep:
        raise ValidationError("transverse window must be >= 6 a + |R1 - R2|")
    notes = []
    if sep > 0 and split.bar_fraction > 0.1 * sep / bath.thermal_wavelength:
        notes.append(
            f"bar_fraction {split.bar_fraction:.3g} is not << |R1-R2|/lambda = {sep / bath.thermal_wavelength:.3g}"
        )
    n = int(mc.samples)
    chunks = [(i, min(CHUNK, n - i * CHUNK)) for i in range((n + CHUNK - 1) // CHUNK)]
    args = [
        (i, c, int(mc.seed), bath, split, model, R1, R2, dt, window, mc.nodes, mc.exclusion_widths)
        for i, c in chunks
    ]
    if bath.density == 0.0 or sep == 0.0:
        stats = [dict(sum=0.0, sumsq=0.0, fwd_sum=0.0, fwd_sumsq=0.0, excluded=0, neglect=0.0, slow=0)]
    else:
        stats = ordered_map(_chunk_stats, args)
    total = sum(s["sum"] for s in stats)
    total_sq = sum(s["sumsq"] for s in stats)
    mean = total / n + 0.0
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    stderr = math.sqrt(var / n)
    fwd_mean = sum(s["fwd_sum"] for s in stats) / n
    fwd_var = max(sum(s["fwd_sumsq"] for s in stats) / n - fwd_mean**2, 0.0) * n / (n - 1)
    if mean != 0.0 and stderr > 0.5 * abs(mean):
        notes.append(f"stderr {stderr:.3g} exceeds 50% of the estimate {mean:.3g}")
    excluded = sum(s["excluded"] for s in stats) / n
    diag = {
        "delta_t": dt,
        "transverse_window": window,
        "excluded_fraction": excluded,
        "neglect_max": max(s["neglect"] for s in stats),
        "slow_packet_fraction": sum(s["slow"] for s in stats) / n,
        "forward_term_mean": fwd_mean,
        "forward_term_stderr": math.sqrt(fwd_var / n),
    }
    return McEstimate(mean, stderr, n, notes, diag)
