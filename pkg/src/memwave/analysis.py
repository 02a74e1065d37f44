"""Energy functionals, inequality residual checkers, and exponent
arithmetic for the attractor-size recursion.

Constants that the underlying estimates leave generic (comparability
constants, decay rates) are fitted from recorded trajectories rather
than asserted; the checkers report the fitted values together with
violation statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import state as st
from .kernels import KernelWeights, MemoryKernel, clipped_window_masses, split_point, total_mass

__all__ = [
    "EnergyConfig",
    "energy_config_for",
    "total_energy",
    "memory_dissipation",
    "coupling_functionals",
    "tilted_energy",
    "sandwich_constant",
    "GronwallReport",
    "check_gronwall",
    "fit_decay",
    "BootstrapReport",
    "bootstrap",
    "m_gamma",
    "RateFit",
    "fit_rate",
    "energy_identity_residual",
]


@dataclass(frozen=True)
class EnergyConfig:
    """Parameters of the auxiliary energy functionals.

    ``c_shift`` keeps the total energy nonnegative (any value large
    enough works; the default 1 suffices for the built-in nonlinearities
    whose potentials are nonnegative).  ``varpi`` controls the clipping
    of the kernel near the origin and ``s_split`` is the lag below which
    the clipped kernel is constant, chosen so the mass below it is at
    most varpi * kappa0 / 2.
    """

    c_shift: float = 1.0
    varpi: float = 0.05
    s_split: float = 0.0


def energy_config_for(kernel: MemoryKernel, varpi: float = 0.05, c_shift: float = 1.0) -> EnergyConfig:
    """Solve the split-point mass condition for the given kernel."""
    target = 0.5 * varpi * total_mass(kernel)
    return EnergyConfig(c_shift=c_shift, varpi=varpi, s_split=split_point(kernel, target))


def fit_energy_shift(min_unshifted: float) -> float:
    """Positivity shift from the observed minimum of the unshifted energy
    over a warm-up run: 1 + max(0, -min)."""
    return 1.0 + max(0.0, -min_unshifted)


def total_energy(state: st.State, nl, kw: KernelWeights, cfg: EnergyConfig) -> float:
    """Half the squared phase-space norm plus the potential plus the shift."""
    return 0.5 * st.hnorm_sq(state, kw) + st.potential(state.basis, state.u, nl) + cfg.c_shift


def memory_dissipation(state: st.State, kw: KernelWeights) -> float:
    """Dissipation functional: half the lag sum of exact -mu' window
    masses against the squared memory-field norms.

    Bounded below by (decay_rate / 2) * squared memory norm, with
    equality for a pure one-term exponential kernel.
    """
    sq = state.ring.lag_sq_norms(state.u)
    return 0.5 * float(kw.dis_masses @ sq)


def coupling_functionals(
    state: st.State,
    kw: KernelWeights,
    cfg: EnergyConfig,
    clipped_masses: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """Velocity-memory and velocity-displacement couplings (L1, L2, L).

    L1 pairs the velocity with the memory field against the clipped
    kernel (bounded near the origin); L2 = <v, u>; L = 2*L1 + L2.
    """
    if clipped_masses is None:
        clipped_masses = clipped_window_masses(kw, cfg.s_split)
    k0 = total_mass(kw.kernel)
    # <v, eta(s_k)> = <v, u> - <v, snapshot_k>
    vu = float(state.v @ state.u)
    inner = vu - state.ring.lag_dot(state.v)
    l1 = -float(clipped_masses @ inner) / k0
    l2 = vu
    return l1, l2, 2.0 * l1 + l2


def tilted_energy(
    state: st.State,
    nl,
    kw: KernelWeights,
    cfg: EnergyConfig,
    omega: float,
    clipped_masses: np.ndarray | None = None,
) -> float:
    """Total energy tilted by omega times the coupling functional."""
    _, _, ell = coupling_functionals(state, kw, cfg, clipped_masses)
    return total_energy(state, nl, kw, cfg) + omega * ell


def sandwich_constant(phi: np.ndarray, lam: np.ndarray) -> float:
    """Smallest c >= 1 with phi/c <= lam <= c*phi + c over the samples.

    Raises ``ValueError`` when the tilted energy dips nonpositive, the
    signal that the tilt parameter is too large.
    """
    phi = np.asarray(phi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("tilted energy nonpositive: tilt parameter too large")
    c_low = float(np.max(phi / lam))
    c_up = float(np.max(lam / (phi + 1.0)))
    return max(1.0, c_low, c_up)


@dataclass(frozen=True)
class GronwallReport:
    violation_fraction: float
    min_c_for_1pct: float
    decay_rate: float      # fitted exponential rate
    decay_floor: float     # fitted additive constant


def check_gronwall(
    times: np.ndarray,
    lam: np.ndarray,
    g: np.ndarray,
    omega: float,
    c: float,
    beta: float,
) -> GronwallReport:
    """Residuals of d(lam)/dt + omega*lam <= c*omega^2*lam^beta + g/omega.

    Samples must be uniform in time; the derivative is the central
    finite difference.  Also fits the decaying-plus-floor envelope
    lam <= Q*exp(-rate*(t - t0)) + floor and reports (rate, floor).
    """
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(g, dtype=float)
    if len(times) < 5:
        raise ValueError("need at least five samples")
    if not 1.0 <= beta < 1.5:
        raise ValueError(f"beta={beta} outside [1, 1.5)")
    dt = times[1] - times[0]
    if np.max(np.abs(np.diff(times) - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("samples are not uniform in time")

    dlam = (lam[2:] - lam[:-2]) / (2.0 * dt)
    mid = slice(1, -1)
    lhs = dlam + omega * lam[mid]
    rhs = c * omega**2 * np.abs(lam[mid]) ** beta + g[mid] / omega
    tol = 1e-12 * (1.0 + np.abs(rhs))
    frac = float(np.mean(lhs > rhs + tol))

    needed = (lhs - g[mid] / omega) / (omega**2 * np.maximum(np.abs(lam[mid]) ** beta, 1e-300))
    order = np.sort(needed)[::-1]
    k = int(math.floor(0.01 * len(order)))
    min_c = float(max(order[k], 0.0))

    rate, floor = fit_decay(times, lam)
    return GronwallReport(
        violation_fraction=frac, min_c_for_1pct=min_c, decay_rate=rate, decay_floor=floor
    )


def fit_decay(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Fit values <= Q*exp(-rate*(t-t0)) + floor; returns (rate, floor).

    The floor is the tail mean; the rate comes from a log-linear fit of
    the part of the signal clearly above the floor.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    floor = float(np.mean(values[-max(3, len(values) // 10):]))
    above = values - floor
    usable = above > max(1e-12, 1e-6 * abs(values[0]))
    if np.count_nonzero(usable) >= 3:
        slope, _ = np.polyfit(times[usable], np.log(above[usable]), 1)
        rate = float(-slope)
    else:
        rate = 0.0
    return rate, floor


@dataclass(frozen=True)
class BootstrapReport:
    p: float
    rho: float
    rho_star: float
    gamma_star: float | None
    kappa: float | None
    exponents: tuple[float, ...]
    n_stop: int | None
    uniform_bound: bool


def m_gamma(p: float, rho: float, gamma: float) -> float:
    """Exponent contraction factor max(0, 2(p-1)/(p+1) - (1-rho)/gamma)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 1 <= p < 3:
        raise ValueError(f"growth order p={p} outside [1, 3)")
    if not 0 <= rho <= 1:
        raise ValueError(f"rho={rho} outside [0, 1]")
    return max(0.0, 2.0 * (p - 1.0) / (p + 1.0) - (1.0 - rho) / gamma)


def bootstrap(p: float, rho: float) -> BootstrapReport:
    """Attractor-size exponent recursion.

    Starting from size exponent rho, each pass multiplies the exponent
    by kappa = 2(p-1)/(p+1) - (1-rho)/rho < 1; the recursion stops at
    the first exponent at or below gamma_star, where the size bound
    becomes uniform.  p = 1 is uniformly bounded for every rho <= 1;
    p > 1 with rho = 1 carries no guarantee.
    """
    if not 1 <= p < 3:
        raise ValueError(f"growth order p={p} outside [1, 3)")
    if not 0 <= rho <= 1:
        raise ValueError(f"rho={rho} outside [0, 1]")
    rho_star = (p + 1.0) / (3.0 * p - 1.0)

    if p == 1:
        return BootstrapReport(
            p=p, rho=rho, rho_star=rho_star, gamma_star=None, kappa=None,
            exponents=(rho,), n_stop=0, uniform_bound=True,
        )

    gamma_star = (1.0 - rho) * (p + 1.0) / (2.0 * (p - 1.0))
    if rho == 0:
        return BootstrapReport(
            p=p, rho=rho, rho_star=rho_star, gamma_star=gamma_star, kappa=None,
            exponents=(0.0,), n_stop=0, uniform_bound=True,
        )
    if rho >= 1:
        return BootstrapReport(
            p=p, rho=rho, rho_star=rho_star, gamma_star=gamma_star, kappa=None,
            exponents=(rho,), n_stop=None, uniform_bound=False,
        )
    if rho <= rho_star:
        return BootstrapReport(
            p=p, rho=rho, rho_star=rho_star, gamma_star=gamma_star, kappa=None,
            exponents=(rho,), n_stop=0, uniform_bound=True,
        )

    kappa = 2.0 * (p - 1.0) / (p + 1.0) - (1.0 - rho) / rho
    exps = [rho]
    n = 0
    while exps[-1] > gamma_star:
        n += 1
        exps.append(rho * kappa**n)
        if n > 10_000:
            raise RuntimeError("exponent recursion failed to contract")
    return BootstrapReport(
        p=p, rho=rho, rho_star=rho_star, gamma_star=gamma_star, kappa=kappa,
        exponents=tuple(exps), n_stop=n, uniform_bound=True,
    )


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    max_residual: float


def fit_rate(eps: np.ndarray, values: np.ndarray) -> RateFit:
    """Least-squares line through (log eps, log value)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps) < 3:
        raise ValueError("need at least three sweep points")
    if np.any(eps <= 0) or np.any(values <= 0):
        raise ValueError("rate fitting needs positive data")
    x, y = np.log(eps), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(slope=float(slope), intercept=float(intercept),
                   max_residual=float(np.max(np.abs(resid))))


def energy_identity_residual(times: np.ndarray, energy: np.ndarray,
                             dissipation: np.ndarray, work: np.ndarray) -> float:
    """|E(t2) - E(t1) + integral of I - forcing work| over the whole record.

    The dissipation integral uses the trapezoid rule on the samples; the
    work column is already the cumulative per-step integral.
    """
    int_i = float(np.trapezoid(dissipation, times))
    return abs(energy[-1] - energy[0] + int_i - (work[-1] - work[0]))
