"""Invariant suite shared by the ``selfcheck`` subcommand.

Each check returns a :class:`CheckResult`; the default tier takes well under
a minute and the extended tier adds the Monte Carlo cross-checks.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import evolution as evo
from .core import EpsilonMode, make_bath
from .rate import (
    conservation_check,
    per_collision_decoherence,
    rate_general_curve,
    rate_via_replacement_curve,
    saturation_rate,
)
from .scattering import BornPotential, ConstantSWave, GaussianPotential, HardSphere, optical_theorem_residual
from .thermal import WavePacket, gamma_fourier_residual, packet_moments, split_bath
from .wavepacket_mc import (
    McConfig,
    gaussian_packet_bilinear,
    mc_rate,
    reduced_integral_i2,
    richardson_zero_width,
    single_packet_kernel,
    smeared_delta_i2,
    strong_condition_delta_rho,
)
from .weak_coupling import GbarSpec, gbar_closed, gbar_integral, rate_weak_coupling_curve


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    seconds: float = 0.0

    def row(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} {self.value:<12.3e} tol {self.tolerance:.1e}  ({self.seconds:.1f} s)"


def reference_bath(density=1e-3):
    return make_bath(1.0, 1.0, density)


def separation_grid(bath, lo=0.1, hi=20.0, count=10):
    """Separations along z with q_th |R| / hbar spaced geometrically in [lo, hi]."""
    scale = bath.hbar / bath.thermal_momentum
    return [np.array([0.0, 0.0, r]) for r in np.geomspace(lo, hi, count) * scale]


def hard_sphere_regime(bath):
    """Hard sphere with q_th R_s / hbar = 1."""
    return HardSphere(bath.hbar / bath.thermal_momentum, hbar=bath.hbar)


def weak_gaussian(bath):
    """A Gaussian potential well inside the Born regime, range half a thermal length."""
    pot = GaussianPotential(0.02, 0.5 * bath.hbar / bath.thermal_momentum)
    return pot, BornPotential(pot, bath.mass, bath.hbar)


def max_rel_diff(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)))


# -- individual checks -------------------------------------------------------

def check_epsilon_ratio():
    bath = reference_bath()
    seps = separation_grid(bath, 0.1, 10.0, 5)
    model = ConstantSWave(0.1)
    c1 = rate_general_curve(bath, model, seps)
    c2 = rate_general_curve(bath, model, seps, epsilon=EpsilonMode.GALLIS_FLEMING)
    return float(np.max(np.abs(c2.values / c1.values / (2.0 * math.pi) - 1.0))), 1e-12


def check_general_vs_replacement(count=10):
    bath = reference_bath()
    seps = separation_grid(bath, 0.1, 20.0, count)
    model = hard_sphere_regime(bath)
    g = rate_general_curve(bath, model, seps)
    r = rate_via_replacement_curve(bath, model, seps)
    return max_rel_diff(g.values, r.values), 1e-6


def check_born_vs_weak(count=10):
    bath = reference_bath()
    seps = separation_grid(bath, 0.1, 20.0, count)
    pot, born = weak_gaussian(bath)
    g = rate_general_curve(bath, born, seps)
    w = rate_weak_coupling_curve(bath, pot, seps)
    return max_rel_diff(g.values, w.values), 1e-3


def check_gbar():
    bath = reference_bath()
    pot, _ = weak_gaussian(bath)
    spec = GbarSpec(bath, pot)
    qth = bath.thermal_momentum
    worst = 0.0
    for q in np.array([0.25, 0.5, 1.0, 2.0, 4.0]) * qth:
        for w in np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * bath.kt / bath.hbar:
            c = float(gbar_closed(spec, q, w))
            i = gbar_integral(spec, q, w)
            worst = max(worst, abs(c - i) / abs(c))
    return worst, 1e-9


def check_optical_theorem():
    model = HardSphere(1.0)
    return max(optical_theorem_residual(model, x) for x in (0.1, 1.0, 5.0)), 1e-8


def check_gamma_fourier():
    split = split_bath(reference_bath())
    qh = np.array([0.0, 0.0, 1.0])
    vals = [gamma_fourier_residual(split, qh, np.array([t * split.a, 0.0, 0.3])) for t in (0.0, 2.5, 5.0)]
    return max(vals), 1e-6


def check_rate_at_zero():
    bath = reference_bath()
    model = hard_sphere_regime(bath)
    curve = rate_general_curve(bath, model, [np.zeros(3), np.array([0.0, 0.0, 1.0])])
    return abs(float(curve.values[0])) / float(curve.values[1]), 1e-14


def check_saturation():
    bath = reference_bath()
    # isotropic scattering keeps the qR = 100 quadrature cheap
    model = ConstantSWave(0.1)
    far = [np.array([0.0, 0.0, 100.0 * bath.hbar / bath.thermal_momentum])]
    f = rate_general_curve(bath, model, far).values[0]
    sat = saturation_rate(bath, model)
    return abs(f / sat - 1.0), 5e-3


def check_eta_limits():
    model = HardSphere(5.0)
    p = np.array([0.0, 0.0, 1.0])
    e0 = per_collision_decoherence(model, p, np.zeros(3))
    far = abs(per_collision_decoherence(model, p, np.array([50.0, 0.0, 0.0])))
    bad = abs(e0 - 1.0) + max(far - 0.05, 0.0)
    return bad, 0.0


def check_conservation():
    return conservation_check(HardSphere(1.0), np.array([0.3, 0.4, 1.2])), 1e-10


def check_packet_moments():
    split = split_bath(reference_bath())
    m = packet_moments(WavePacket(np.zeros(3), np.array([0.5, 0.0, 0.0]), split))
    dev = max(
        abs(m["delta_x"] / (split.a / math.sqrt(2.0)) - 1.0),
        abs(m["delta_p"] / (split.b / math.sqrt(2.0)) - 1.0),
        abs(split.variance_sum() / (0.5 * split.boltzmann * split.temperature) - 1.0),
    )
    return dev, 1e-10


def check_kernel_coincidence():
    split = split_bath(reference_bath(), 0.001)
    a, b = split.a, split.b
    worst = 0.0
    rng = np.random.default_rng(7)
    for model in (ConstantSWave(0.1), HardSphere(0.3)):
        for _ in range(3):
            p = rng.normal(size=3)
            p *= 20.0 * b / np.linalg.norm(p)
            r = -8.0 * a * p / np.linalg.norm(p) + rng.normal(size=3) * a
            R = rng.normal(size=3)
            worst = max(worst, abs(single_packet_kernel(split, model, r, p, R, R)))
    return worst, 1e-12


def check_strong_condition():
    split = split_bath(reference_bath(), 0.001)
    a, b = split.a, split.b
    model = ConstantSWave(0.1)
    p = np.array([0.0, 0.0, 2000.0 * b])
    r = np.array([0.0, 0.0, -10.0 * a])
    R1 = np.array([0.0, 0.0, 0.025 * a])
    k = single_packet_kernel(split, model, r, p, R1, -R1)
    s = strong_condition_delta_rho(split, model, r, p, R1, -R1)
    return abs(k - s) / abs(s), 1e-4


def check_evolution():
    axis = np.array([0.0, 0.0, 1.0])
    x = np.linspace(-6.0, 6.0, 64)
    grid = evo.two_packet_superposition(axis, x, 6.0, 0.7)
    bath = reference_bath()
    model = ConstantSWave(0.1)
    h = grid.spacing
    curve = rate_general_curve(bath, model, [k * h * axis for k in range(x.size)])
    rate = evo.tabulated_rate(curve)
    t1, t2 = 3.0, 5.0
    one = evo.evolve(evo.evolve(grid, rate, t1), rate, t2)
    both = evo.evolve(grid, rate, t1 + t2)
    semigroup = float(np.max(np.abs(one.values - both.values)))
    trace = abs(both.trace() / grid.trace() - 1.0)
    herm = float(np.max(np.abs(both.values - both.values.conj().T)))
    diag = float(np.max(np.abs(np.diagonal(both.values) - np.diagonal(grid.values))))
    eig = float(np.min(np.linalg.eigvalsh(both.values * h)))
    neg = max(-eig / both.trace(), 0.0)
    # identities at 1e-12, positivity at 1e-10 of the trace; report in units of those
    return max(semigroup / 1e-12, trace / 1e-12, herm / 1e-12, diag / 1e-12, neg / 1e-10), 1.0


def check_mc(samples=100_000, seed=11):
    bath = reference_bath()
    model = ConstantSWave(0.1)
    split = split_bath(bath, McConfig().bar_fraction)
    qth = bath.thermal_momentum
    worst = 0.0
    for d in np.array([0.5, 1.0, 3.0]) * bath.hbar / qth:
        R1 = np.array([0.5 * d, 0.0, 0.0])
        ref = rate_general_curve(bath, model, [2.0 * R1]).values[0]
        est = mc_rate(bath, split, model, R1, -R1, McConfig(seed=seed, samples=samples))
        worst = max(worst, abs(est.value - ref) / (3.0 * est.stderr), est.stderr / est.value / 0.1)
    return worst, 1.0


def smeared_delta_oracle(samples=400_000, seed=3):
    """Compare reduced I2 against the zero-width extrapolation of the smeared-delta integral.

    Returns a list of (label, reduced, extrapolated, stderr, chi2).
    """
    split = split_bath(reference_bath(), 0.01)
    a, b = split.a, split.b
    p = np.array([0.3, 0.2, 1.5])
    r = np.array([0.5 * a, 0.0, -3.0 * a])
    R = np.array([0.2, 0.1, 0.3])
    u = gaussian_packet_bilinear(split, r, p)
    widths = [0.04 * b, 0.02 * b, 0.01 * b]
    out = []
    models = (("constant_swave", ConstantSWave(0.1)), ("born_gaussian", BornPotential(GaussianPotential(0.05, 0.5))))
    for label, model in models:
        i2 = reduced_integral_i2(u, model, R, p, b, nodes=8)
        vals, errs = [], []
        for k, w in enumerate(widths):
            v, er, _ = smeared_delta_i2(u, model, R, p, b, w, samples, seed=seed + k)
            vals.append(v.real)
            errs.append(er)
        v0, e0, chi2 = richardson_zero_width(widths, vals, errs)
        out.append((label, i2.real, v0, e0, chi2))
    return out


def check_smeared_delta():
    worst = 0.0
    for _, i2, v0, e0, chi2 in smeared_delta_oracle():
        # chi2 with one degree of freedom; 10.8 is the 0.1% tail
        worst = max(worst, abs(i2 - v0) / (3.0 * e0), chi2 / 10.8)
    return worst, 1.0


DEFAULT_CHECKS = [
    ("epsilon ratio 2pi", check_epsilon_ratio),
    ("general vs replacement", lambda: check_general_vs_replacement(4)),
    ("Born vs weak coupling", lambda: check_born_vs_weak(4)),
    ("Gbar closed vs integral", check_gbar),
    ("optical theorem", check_optical_theorem),
    ("Gamma Fourier identity", check_gamma_fourier),
    ("F(0) = 0", check_rate_at_zero),
    ("saturation at qR = 100", check_saturation),
    ("eta limits", check_eta_limits),
    ("outgoing flux conservation", check_conservation),
    ("packet moments", check_packet_moments),
    ("kernel at R1 = R2", check_kernel_coincidence),
    ("strong-condition kernel", check_strong_condition),
    ("evolution invariants", check_evolution),
]

EXTENDED_CHECKS = [
    ("general vs replacement, 10 pts", check_general_vs_replacement),
    ("Born vs weak coupling, 10 pts", check_born_vs_weak),
    ("MC vs quadrature", check_mc),
    ("reduced I2 vs smeared delta", check_smeared_delta),
]


def run_checks(extended=False):
    checks = DEFAULT_CHECKS + (EXTENDED_CHECKS if extended else [])
    results = []
    for name, fn in checks:
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                value, tol = fn()
                passed = bool(np.isfinite(value) and value <= tol)
            except Exception as exc:  # a crashing check is a failing check
                value, tol, passed = float("nan"), float("nan"), False
                name = f"{name} [{type(exc).__name__}]"
        results.append(CheckResult(name, float(value), float(tol), passed, time.perf_counter() - start))
    return results
