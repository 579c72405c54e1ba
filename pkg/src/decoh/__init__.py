"""Collisional decoherence of a heavy particle in a dilute thermal gas."""
from .core import (
    BathSpec,
    ConvergenceError,
    DegenerateModelError,
    DilutenessWarning,
    EpsilonMode,
    UnitSystem,
    ValidationError,
    make_bath,
    set_thread_count,
)
from .evolution import DensityMatrixGrid, coherence_length, evolve
from .rate import (
    DecoherenceCurve,
    QuadratureSpec,
    Route,
    conservation_check,
    localization_coefficient,
    per_collision_decoherence,
    rate_general,
    rate_general_curve,
    rate_via_replacement,
    rate_via_replacement_curve,
    saturation_rate,
)
from .scattering import (
    BornPotential,
    ConstantSWave,
    GaussianPotential,
    HardSphere,
    YukawaPotential,
    amplitude,
    auto_lmax,
    optical_theorem_residual,
    total_cross_section,
)
from .thermal import PacketSplit, WavePacket, split_bath
from .wavepacket_mc import McConfig, McEstimate, mc_rate, single_packet_kernel
from .weak_coupling import GbarSpec, gbar_closed, gbar_integral, rate_weak_coupling

__version__ = "0.1.0"
