"""Position-basis density matrix of an infinitely massive particle under collisional decoherence.

Without a kinetic term the master equation is diagonal in position pairs,
so rho(R_i, R_j; t) = rho(R_i, R_j; 0) exp(-F(R_i - R_j) t) on any grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .core import ValidationError, unit

HERMITICITY_TOL = 1e-12


class ContractError(ValidationError):
    """A callable argument broke its documented contract."""


@dataclass(frozen=True)
class DensityMatrixGrid:
    axis: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", unit(self.axis, "axis"))
        pos = np.asarray(self.positions, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if pos.ndim != 1 or pos.size < 2:
            raise ValidationError("positions must be a 1-D grid of at least two points")
        steps = np.diff(pos)
        if not (np.all(steps > 0) and np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)):
            raise ValidationError("positions must be uniform and increasing")
        if vals.shape != (pos.size, pos.size):
            raise ValidationError("values must be N x N for N positions")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("values must be finite")
        scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
        if np.max(np.abs(vals - vals.conj().T)) > HERMITICITY_TOL * scale:
            raise ValidationError("values must be Hermitian")
        diag = np.diagonal(vals)
        if np.any(np.abs(diag.imag) > HERMITICITY_TOL * scale) or np.any(diag.real < -HERMITICITY_TOL * scale):
            raise ValidationError("diagonal must be real and nonnegative")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValidationError("time must be >= 0")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    def trace(self) -> float:
        """Riemann sum of the diagonal."""
        return float(np.sum(np.diagonal(self.values).real) * self.spacing)

    def separations(self) -> np.ndarray:
        """|R_i - R_j| for every pair, as an N x N array."""
        return np.abs(self.positions[:, None] - self.positions[None, :])

    def normalized(self) -> "DensityMatrixGrid":
        tr = self.trace()
        if tr <= 0:
            raise ValidationError("trace must be positive to normalise")
        return replace(self, values=self.values / tr)


def pure_state(axis, positions, amplitudes, time=0.0) -> DensityMatrixGrid:
    """|phi><phi| sampled on the grid, normalised to unit trace."""
    phi = np.asarray(amplitudes, dtype=complex)
    grid = DensityMatrixGrid(axis, positions, np.outer(phi, phi.conj()), time)
    return grid.normalized()


def two_packet_superposition(axis, positions, separation, width) -> DensityMatrixGrid:
    """Pure state of two equal Gaussians centred at -separation/2 and +separation/2."""
    if not (width > 0 and separation >= 0):
        raise ValidationError("width must be > 0 and separation >= 0")
    x = np.asarray(positions, dtype=float)
    phi = np.exp(-((x + 0.5 * separation) ** 2) / (4.0 * width**2))
    phi = phi + np.exp(-((x - 0.5 * separation) ** 2) / (4.0 * width**2))
    return pure_state(axis, x, phi)


def separation_rates(grid: DensityMatrixGrid, rate_fn: Callable, tol=1e-12):
    """F at the N distinct grid separations k * h, checking F(0) = 0."""
    h = grid.spacing
    n = grid.positions.size
    rates = np.array([float(rate_fn(k * h * grid.axis)) for k in range(n)])
    if not np.all(np.isfinite(rates)):
        raise ContractError("rate_fn returned a non-finite value")
    scale = max(float(np.max(np.abs(rates))), np.finfo(float).tiny)
    if abs(rates[0]) > tol * scale:
        raise ContractError(f"rate_fn(0) = {rates[0]:.3g} but must vanish")
    rates[0] = 0.0
    return rates


def evolve(grid: DensityMatrixGrid, rate_fn: Callable, t: float, tol=1e-12) -> DensityMatrixGrid:
    """rho_ij(t0 + t) = rho_ij(t0) exp(-F(R_i - R_j) t).

    ``rate_fn`` receives a separation vector along the grid axis. It is
    called once per distinct separation and must vanish at zero.
    """
    if not (math.isfinite(t) and t >= 0):
        raise ValidationError("t must be >= 0")
    rates = separation_rates(grid, rate_fn, tol)
    idx = np.abs(np.arange(grid.positions.size)[:, None] - np.arange(grid.positions.size)[None, :])
    decay = np.exp(-rates * t)[idx]
    values = grid.values * decay
    # exact symmetry of decay keeps hermiticity; restore the diagonal bit for bit
    np.fill_diagonal(values, np.diagonal(grid.values))
    return replace(grid, values=values, time=grid.time + t)


def tabulated_rate(curve, rel_tol=1e-9) -> Callable:
    """rate_fn that looks F up in a precomputed curve by |R|; off-table separations are an error."""
    radii = np.asarray(curve.radii, dtype=float)
    values = np.asarray(curve.values, dtype=float)
    order = np.argsort(radii)
    radii, values = radii[order], values[order]

    def rate(R):
        r = float(np.linalg.norm(R))
        k = int(np.clip(np.searchsorted(radii, r), 0, radii.size - 1))
        best = min((k, max(k - 1, 0)), key=lambda i: abs(radii[i] - r))
        if abs(radii[best] - r) > rel_tol * max(r, radii[-1]):
            raise ValidationError(f"separation {r!r} is not on the tabulated curve")
        return values[best]

    return rate


class CoherenceLength(NamedTuple):
    length: float
    reached: bool


def coherence_envelope(grid: DensityMatrixGrid, floor=1e-12) -> np.ndarray:
    """max over pairs at offset k of |rho_ij| / sqrt(rho_ii rho_jj), for k = 0..N-1.

    Pairs whose diagonal entries fall below ``floor`` times the largest one
    carry no probability and are skipped; an offset with no such pair gets 0.
    """
    diag = np.diagonal(grid.values).real
    live = diag > floor * float(np.max(diag))
    n = diag.size
    env = np.zeros(n)
    for k in range(n):
        i = np.arange(n - k)
        j = i + k
        ok = live[i] & live[j]
        if np.any(ok):
            ratio = np.abs(grid.values[i[ok], j[ok]]) / np.sqrt(diag[i[ok]] * diag[j[ok]])
            env[k] = float(np.max(ratio))
    return env


def coherence_length(grid: DensityMatrixGrid, threshold=math.exp(-1.0)) -> CoherenceLength:
    """Smallest grid separation where the coherence envelope drops to ``threshold``.

    If it never does, the grid extent is returned with ``reached=False``.
    """
    if not (0 < threshold):
        raise ValidationError("threshold must be > 0")
    if threshold >= 1.0:
        return CoherenceLength(0.0, True)
    env = coherence_envelope(grid)
    below = np.nonzero(env <= threshold)[0]
    if below.size == 0:
        return CoherenceLength(float(grid.positions[-1] - grid.positions[0]), False)
    return CoherenceLength(float(below[0] * grid.spacing), True)
