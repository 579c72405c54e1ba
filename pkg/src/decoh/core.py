"""Shared value types, unit conventions and validated constructors.

All quantities are plain floats in a unit system fixed by ``hbar`` and the
Boltzmann constant; the default is the reduced system hbar = m = k_B = 1.
Vectors are numpy arrays of shape ``(3,)``.
"""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

DILUTENESS_LIMIT = 0.1


class ValidationError(ValueError):
    """Raised when a physical specification violates its preconditions."""


class ConvergenceError(RuntimeError):
    """A refinement loop hit its node cap before meeting the tolerance."""

    def __init__(self, message, achieved=float("nan")):
        super().__init__(f"{message} (achieved relative change {achieved:.3e})")
        self.achieved = achieved


class DegenerateModelError(ValueError):
    """The scattering model has a vanishing cross section where one is needed."""


class DilutenessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = 1.0
    boltzmann: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "boltzmann"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {value!r}")


class EpsilonMode(enum.Enum):
    """Prefactor convention for the localization rate."""

    CORRECTED = "corrected"
    GALLIS_FLEMING = "gallis_fleming"

    @property
    def multiplier(self) -> float:
        return 1.0 if self is EpsilonMode.CORRECTED else 2.0 * math.pi

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValidationError(f"unknown epsilon mode {text!r}")


@dataclass(frozen=True)
class BathSpec:
    """Dilute ideal gas: particle mass, temperature and number density."""

    mass: float
    temperature: float
    density: float
    units: UnitSystem = field(default_factory=UnitSystem)

    @property
    def hbar(self) -> float:
        return self.units.hbar

    @property
    def kt(self) -> float:
        return self.units.boltzmann * self.temperature

    @property
    def beta(self) -> float:
        return 1.0 / self.kt

    @property
    def thermal_momentum(self) -> float:
        """q_th = sqrt(2 m k_B T), the most probable momentum magnitude."""
        return math.sqrt(2.0 * self.mass * self.kt)

    @property
    def thermal_wavelength(self) -> float:
        return math.sqrt(2.0 * math.pi * self.hbar**2 * self.beta / self.mass)

    @property
    def degeneracy(self) -> float:
        """n * lambda^3."""
        return self.density * self.thermal_wavelength**3

    @property
    def dilute(self) -> bool:
        return self.degeneracy < DILUTENESS_LIMIT


def make_bath(mass, temperature, density, units=None) -> BathSpec:
    units = units if units is not None else UnitSystem()
    for name, value in (("mass", mass), ("temperature", temperature), ("density", density)):
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")
    if mass <= 0:
        raise ValidationError(f"mass must be > 0, got {mass!r}")
    if temperature <= 0:
        raise ValidationError(f"temperature must be > 0, got {temperature!r}")
    if density < 0:
        raise ValidationError(f"density must be >= 0, got {density!r}")
    bath = BathSpec(float(mass), float(temperature), float(density), units)
    if not bath.dilute:
        warnings.warn(
            f"n*lambda^3 = {bath.degeneracy:.3g} >= {DILUTENESS_LIMIT}: bath is not dilute",
            DilutenessWarning,
            stacklevel=2,
        )
    return bath


def as_vec3(value, name="vector") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite components")
    return arr


def norm(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


def unit(v, name="vector") -> np.ndarray:
    v = as_vec3(v, name)
    n = norm(v)
    if n == 0.0:
        raise ValidationError(f"{name} has zero length; direction undefined")
    return v / n


def orthonormal_frame(axis):
    """Return (e1, e2) completing ``axis`` to a right-handed orthonormal basis."""
    z = unit(axis, "axis")
    trial = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, z) * z
    e1 /= norm(e1)
    e2 = np.cross(z, e1)
    return e1, e2


# Worker count for node-parallel evaluation. Results are always gathered in
# submission order, so the thread count never changes the numbers.
_threads = None


def set_thread_count(n):
    global _threads
    if n is not None and int(n) < 1:
        raise ValidationError("thread count must be >= 1")
    _threads = None if n is None else int(n)


def thread_count() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("DECOH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def ordered_map(fn, items):
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
