"""Simulation and verification toolkit for the wave equation with
fading memory and a fast-oscillating external force.

The displacement field lives on the Dirichlet sine eigenbasis of the
interval (0, pi); the hereditary stress integral is discretized by exact
per-window kernel masses over a ring buffer of past displacements; the
harness maps quantitative claims about dissipativity, response scaling,
and attractor size to runnable sweep experiments.
"""

from .analysis import (
    BootstrapReport,
    EnergyConfig,
    GronwallReport,
    RateFit,
    bootstrap,
    check_gronwall,
    energy_config_for,
    fit_rate,
    m_gamma,
    memory_dissipation,
    total_energy,
)
from .dynamics import PronyEngine, Stepper, TrajectoryRecord, simulate, single_mode_oracle, step
from .forcing import ForceTerm, Forcing, Waveform, evaluate, smoothness_index, tb_bound, tb_norm
from .kernels import (
    KernelWeights,
    PowerLawExp,
    PronySum,
    TailPolicy,
    quadrature_weights,
    total_mass,
    validate,
)
from .spectral import ModalBasis, make_basis
from .state import (
    PowerLaw,
    SineGordon,
    State,
    energy_gauge,
    eta_at,
    initial_state,
    memory_force,
    memory_norm,
    potential,
)

__version__ = "0.1.0"
