"""Memory kernels for the hereditary force and their lag-grid quadrature.

The convolution weight mu(s) must be nonnegative, summable, with total
mass kappa0 in (0, 1), and decay at an exponential-type rate in the
sense mu'(s) + delta * mu(s) <= 0 for some delta > 0.  Two families are
implemented:

* ``PronySum``: finite sums of decaying exponentials c_j * exp(-d_j s).
* ``PowerLawExp``: C * s**(-alpha) * exp(-delta s), weakly singular at
  the origin for alpha > 0.

Time stepping consumes kernels through :func:`quadrature_weights`, which
integrates mu exactly over windows centered on the lag grid s_k = k*dt.
Pointwise sampling of mu would be wrong for the singular family, so all
weights are exact per-window masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc, gammaincc

__all__ = [
    "PronySum",
    "PowerLawExp",
    "TailPolicy",
    "KernelWeights",
    "ValidationReport",
    "validate",
    "total_mass",
    "total_mass_quadrature",
    "quadrature_weights",
    "depth_for_tail",
    "split_point",
    "clipped_window_masses",
]


@dataclass(frozen=True)
class PronySum:
    """Kernel mu(s) = sum_j c_j * exp(-d_j * s).

    ``terms`` is a sequence of (amplitude, rate) pairs.  ``delta`` is the
    decay constant used in the admissibility condition; it defaults to
    the smallest rate, which is the sharpest valid choice.
    """

    terms: tuple[tuple[float, float], ...]
    delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), float(d)) for c, d in self.terms))

    @property
    def decay_rate(self) -> float:
        if self.delta is not None:
            return self.delta
        return min(d for _, d in self.terms)

    def density(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, d in self.terms:
            out = out + c * np.exp(-d * s)
        return out

    def density_deriv(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, d in self.terms:
            out = out - c * d * np.exp(-d * s)
        return out

    def mass(self) -> float:
        return sum(c / d for c, d in self.terms)

    def tail_mass(self, s: float) -> float:
        return sum(c / d * math.exp(-d * s) for c, d in self.terms)

    def mass_between(self, a: float, b: float) -> float:
        return self.tail_mass(a) - self.tail_mass(b)


@dataclass(frozen=True)
class PowerLawExp:
    """Kernel mu(s) = amplitude * s**(-alpha) * exp(-delta * s).

    Integrable at the origin for alpha in [0, 1); total mass below one
    requires amplitude < delta**(1-alpha) / Gamma(1-alpha).
    """

    amplitude: float
    alpha: float
    delta: float

    @property
    def decay_rate(self) -> float:
        return self.delta

    def density(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return self.amplitude * s ** (-self.alpha) * np.exp(-self.delta * s)

    def density_deriv(self, s):
        s = np.asarray(s, dtype=float)
        return -(self.alpha / s + self.delta) * self.density(s)

    def mass(self) -> float:
        return self.amplitude * gamma_fn(1 - self.alpha) * self.delta ** (self.alpha - 1)

    def tail_mass(self, s: float) -> float:
        return self.mass() * float(gammaincc(1 - self.alpha, self.delta * s))

    def mass_between(self, a: float, b: float) -> float:
        lo = 0.0 if a <= 0 else float(gammainc(1 - self.alpha, self.delta * a))
        hi = float(gammainc(1 - self.alpha, self.delta * b))
        return self.mass() * (hi - lo)


MemoryKernel = PronySum | PowerLawExp


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = ()


def validate(kernel: MemoryKernel) -> ValidationReport:
    """Check kernel admissibility; never raises on bad parameter values.

    Returns a report whose ``violations`` name each failed condition
    together with the witnessing value.
    """
    bad: list[str] = []
    if isinstance(kernel, PronySum):
        if not kernel.terms:
            bad.append("empty Prony sum")
        for c, d in kernel.terms:
            if c <= 0:
                bad.append(f"nonpositive amplitude c={c} makes mu sign-indefinite")
            if d <= 0:
                bad.append(f"nonpositive rate d={d} gives a non-summable term")
        delta = kernel.delta
        if delta is not None and delta <= 0:
            bad.append(f"decay constant delta={delta} must be positive")
        if not bad:
            dmin = min(d for _, d in kernel.terms)
            if kernel.decay_rate > dmin + 1e-15:
                bad.append(
                    f"decay condition fails: delta={kernel.decay_rate} exceeds slowest rate {dmin}"
                )
    elif isinstance(kernel, PowerLawExp):
        if kernel.amplitude <= 0:
            bad.append(f"nonpositive amplitude {kernel.amplitude}")
        if not 0 <= kernel.alpha < 1:
            bad.append(f"alpha={kernel.alpha} outside [0, 1)")
        if kernel.delta <= 0:
            bad.append(f"nonpositive rate delta={kernel.delta}")
        if not bad:
            limit = kernel.delta ** (1 - kernel.alpha) / gamma_fn(1 - kernel.alpha)
            if kernel.amplitude >= limit:
                bad.append(
                    f"amplitude {kernel.amplitude} >= admissibility limit {limit:.6g}"
                )
    else:
        raise TypeError(f"not a memory kernel: {kernel!r}")

    if not bad:
        k0 = kernel.mass()
        if not 0 < k0 < 1:
            bad.append(f"total mass kappa0={k0:.6g} outside (0, 1)")
    return ValidationReport(ok=not bad, violations=tuple(bad))


def total_mass(kernel: MemoryKernel) -> float:
    """Closed-form total mass kappa0 = integral of mu over (0, inf)."""
    k0 = kernel.mass()
    if not math.isfinite(k0) or k0 <= 0:
        raise ValueError(f"divergent or degenerate kernel mass: {k0}")
    return k0


def total_mass_quadrature(kernel: MemoryKernel) -> float:
    """Adaptive-quadrature total mass, the independent check on closed forms.

    Splits at s = 1 and substitutes s = x**2 near the origin so the
    weakly singular family integrates cleanly.
    """
    def near(x):
        s = x * x
        return 2 * x * float(kernel.density(s)) if x > 0 else 0.0

    head, _ = integrate.quad(near, 0.0, 1.0, limit=200)
    tail, _ = integrate.quad(lambda s: float(kernel.density(s)), 1.0, np.inf, limit=200)
    return head + tail


@dataclass(frozen=True)
class TailPolicy:
    """Truncation rule for the lag grid.

    ``max_fraction`` bounds the dropped tail mass relative to kappa0;
    the induced force error is at most tail * sup ||A eta||.
    ``singular_floor`` is the fraction of the first lag below which the
    derivative mass of a singular kernel is cut off (the frozen-field
    window integral of -mu' diverges otherwise).
    """

    max_fraction: float = 1e-6
    mode: str = "truncate"
    singular_floor: float = 1e-3


@dataclass(frozen=True)
class KernelWeights:
    """Per-window masses of mu and -mu' on the lag grid s_k = k*dt.

    Window k covers ((k-1/2)*dt, (k+1/2)*dt), except the first which
    starts at 0.  ``mu_masses`` partition kappa0 - tail; ``dis_masses``
    are the matching exact window integrals of -mu'.
    """

    kernel: MemoryKernel
    dt: float
    mu_masses: np.ndarray
    dis_masses: np.ndarray
    tail: float
    policy: TailPolicy = field(default_factory=TailPolicy)

    @property
    def n_lags(self) -> int:
        return len(self.mu_masses)

    @property
    def lags(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n_lags + 1)

    @property
    def kappa0(self) -> float:
        return total_mass(self.kernel)

    @property
    def weight_sum(self) -> float:
        return float(self.mu_masses.sum())


def _window_edges(dt: float, n_max: int) -> np.ndarray:
    edges = (np.arange(n_max + 1) + 0.5) * dt
    edges[0] = 0.0
    return edges


def quadrature_weights(
    kernel: MemoryKernel,
    dt: float,
    n_max: int,
    policy: TailPolicy | None = None,
) -> KernelWeights:
    """Exact per-window masses for the hereditary integral on the lag grid.

    Raises ``ValueError`` when the dropped tail mass exceeds the policy
    fraction of kappa0: that signals insufficient history depth rather
    than a kernel defect.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_max < 1:
        raise ValueError(f"need at least one lag, got n_max={n_max}")
    policy = policy or TailPolicy()
    edges = _window_edges(dt, n_max)
    k0 = total_mass(kernel)

    mu_w = np.array([kernel.mass_between(a, b) for a, b in zip(edges[:-1], edges[1:])])
    tail = kernel.tail_mass(edges[-1])
    if tail > policy.max_fraction * k0:
        raise ValueError(
            f"history depth too small: tail mass {tail:.3e} exceeds "
            f"{policy.max_fraction:.1e} * kappa0 = {policy.max_fraction * k0:.3e}"
        )

    # integral of -mu' over (a, b) is mu(a) - mu(b); floor the singular
    # left endpoint of the first window
    left = edges[:-1].copy()
    if isinstance(kernel, PowerLawExp) and kernel.alpha > 0:
        left[0] = policy.singular_floor * dt
    dens = np.concatenate([kernel.density(left[:1]), kernel.density(edges[1:])])
    dis_w = dens[:-1] - dens[1:]

    return KernelWeights(
        kernel=kernel, dt=dt, mu_masses=mu_w, dis_masses=dis_w, tail=tail, policy=policy
    )


def depth_for_tail(kernel: MemoryKernel, dt: float, max_fraction: float = 1e-6) -> int:
    """Smallest lag count whose dropped tail mass is below the given fraction."""
    k0 = total_mass(kernel)
    target = max_fraction * k0
    lo, hi = dt, dt
    while kernel.tail_mass(hi + 0.5 * dt) > target:
        hi *= 2
        if hi / dt > 1e8:
            raise ValueError("kernel tail decays too slowly for a practical lag grid")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kernel.tail_mass(mid + 0.5 * dt) > target:
            lo = mid
        else:
            hi = mid
    return max(1, math.ceil(hi / dt))


def split_point(kernel: MemoryKernel, mass_target: float) -> float:
    """s with cumulative mass of mu over (0, s) equal to ``mass_target``."""
    k0 = total_mass(kernel)
    if not 0 < mass_target < k0:
        raise ValueError(f"target {mass_target} outside (0, kappa0={k0})")
    lo, hi = 0.0, 1.0
    while kernel.mass_between(0.0, hi) < mass_target:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kernel.mass_between(0.0, mid) < mass_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clipped_window_masses(kw: KernelWeights, s_clip: float) -> np.ndarray:
    """Window masses of the clipped kernel equal to mu(s_clip) below s_clip.

    Used by the velocity-memory coupling functional, which needs a
    bounded weight near the origin even for singular kernels.
    """
    kernel = kw.kernel
    edges = _window_edges(kw.dt, kw.n_lags)
    level = float(kernel.density(np.array([s_clip]))[0])
    out = np.empty(kw.n_lags)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b <= s_clip:
            out[k] = level * (b - a)
        elif a >= s_clip:
            out[k] = kw.mu_masses[k]
        else:
            out[k] = level * (s_clip - a) + kernel.mass_between(s_clip, b)
    return out
