"""Time integration of the memory wave system and its exact small oracles.

The default scheme is the classical central-difference update written in
velocity-Verlet form: the displacement recursion is algebraically
u(n+1) = 2u(n) - u(n-1) + dt^2 * a(n), and the stored velocity satisfies
the central identity v(n) = (u(n+1) - u(n-1)) / (2 dt) exactly, so both
components are second order at matching time levels and the cold start
u(-1) = u0 - dt*v0 + dt^2/2 * a0 is automatic.

The hereditary force is evaluated explicitly on the lag grid aligned
with dt, where the reconstruction of the memory field from stored
snapshots is exact.  For Prony kernels an alternative engine integrates
one auxiliary accumulator ODE per kernel term with an exponential
trapezoidal rule, giving a cross-validation path that never touches the
history buffer for the force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import state as st
from .forcing import ForceTerm, Forcing, Waveform, evaluate
from .kernels import (
    KernelWeights,
    MemoryKernel,
    PronySum,
    TailPolicy,
    depth_for_tail,
    quadrature_weights,
    total_mass,
)
from .spectral import ModalBasis, make_basis

__all__ = [
    "Stepper",
    "PronyEngine",
    "TrajectoryRecord",
    "step",
    "simulate",
    "linear_response",
    "single_mode_oracle",
    "cfl_limit",
]


def cfl_limit(basis: ModalBasis, kernel: MemoryKernel, safety: float = 0.9) -> float:
    """Largest stable explicit step: dt^2 * lambda_N * (1 + kappa0) < 4*safety."""
    lam_max = float(basis.eigenvalues[-1])
    return math.sqrt(4.0 * safety / (lam_max * (1.0 + total_mass(kernel))))


class PronyEngine:
    """Per-term memory accumulators for an exponential-sum kernel.

    Accumulator j carries the lag integral of c_j * exp(-d_j s) against
    the memory field; it obeys dz/dt = -d_j z + (c_j/d_j) v and the
    hereditary force is lambda_n * sum_j z_j.  The update is the
    exponential trapezoidal rule, exact for constant velocity.
    """

    def __init__(self, kernel: PronySum, n_modes: int, dt: float):
        self.kernel = kernel
        self.dt = dt
        rates = np.array([d for _, d in kernel.terms])
        amps = np.array([c for c, _ in kernel.terms])
        self.decay = np.exp(-rates * dt)
        i0 = (1.0 - self.decay) / rates
        i1 = (dt - i0) / rates
        gain = amps / rates
        self.w_old = gain * (i0 - i1 / dt)   # weight of v(n)
        self.w_new = gain * (i1 / dt)        # weight of v(n+1)
        self.zeta = np.zeros((len(rates), n_modes))

    def force_sum(self) -> np.ndarray:
        return self.zeta.sum(axis=0)

    def advance(self, v_old: np.ndarray, v_new: np.ndarray) -> None:
        self.zeta *= self.decay[:, None]
        self.zeta += np.outer(self.w_old, v_old) + np.outer(self.w_new, v_new)

    def implicit_gain(self) -> float:
        """Coefficient of v(n+1) in the advanced force sum."""
        return float(self.w_new.sum())

    def partial_advance(self, v_old: np.ndarray) -> np.ndarray:
        """Force sum at the next step minus its v(n+1) contribution."""
        return self.decay @ self.zeta + self.w_old.sum() * v_old

    def init_from_history(self, state: st.State) -> None:
        """Seed the accumulators from a state's lag buffer (nonzero initial
        memory or warm restart)."""
        for j, (c, d) in enumerate(self.kernel.terms):
            single = PronySum(((c, d),), delta=d)
            kw = quadrature_weights(
                single, self.dt, state.ring.depth, TailPolicy(max_fraction=1.0)
            )
            hist = state.ring.weighted_sum(kw.mu_masses)
            self.zeta[j] = kw.weight_sum * state.u - hist

    def copy(self) -> "PronyEngine":
        other = PronyEngine.__new__(PronyEngine)
        other.kernel, other.dt = self.kernel, self.dt
        other.decay, other.w_old, other.w_new = self.decay, self.w_old, self.w_new
        other.zeta = self.zeta.copy()
        return other


@dataclass
class TrajectoryRecord:
    """Sampled diagnostics along one run; columns in fixed CSV order."""

    times: np.ndarray
    phi: np.ndarray        # energy gauge
    energy: np.ndarray     # total energy with the positivity shift
    dissipation: np.ndarray
    h_norm: np.ndarray
    lp_norm: np.ndarray
    work: np.ndarray       # cumulative forcing work
    potential: np.ndarray
    power: np.ndarray      # instantaneous <g, v>
    g_sq: np.ndarray       # squared force norm
    checkpoint_times: np.ndarray | None = None
    checkpoints_u: np.ndarray | None = None
    checkpoints_v: np.ndarray | None = None

    COLUMNS = ("time", "Phi", "E", "I", "H_norm", "Lp_norm", "work", "potential", "power", "g_sq")

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "time": self.times,
            "Phi": self.phi,
            "E": self.energy,
            "I": self.dissipation,
            "H_norm": self.h_norm,
            "Lp_norm": self.lp_norm,
            "work": self.work,
            "potential": self.potential,
            "power": self.power,
            "g_sq": self.g_sq,
        }


@dataclass
class Stepper:
    """Integrator configuration bound to a basis and kernel.

    ``scheme`` is "central" (explicit, CFL-guarded) or "semi_implicit"
    (instantaneous stiffness and the current-displacement part of the
    memory force treated implicitly per mode; no CFL restriction).
    ``engine`` selects the hereditary-force path: "history" quadrature
    over the lag buffer, or "prony" accumulators (Prony kernels only).
    """

    basis: ModalBasis
    kernel: MemoryKernel
    dt: float
    scheme: str = "central"
    engine: str = "history"
    tail: TailPolicy = field(default_factory=TailPolicy)
    n_max: int | None = None
    safety: float = 0.9
    weights: KernelWeights = field(init=False)

    def __post_init__(self):
        if self.scheme not in ("central", "semi_implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.engine not in ("history", "prony"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "prony" and not isinstance(self.kernel, PronySum):
            raise ValueError("prony engine requires an exponential-sum kernel")
        if self.scheme == "central":
            limit = cfl_limit(self.basis, self.kernel, self.safety)
            if self.dt >= limit:
                raise ValueError(
                    f"dt={self.dt} violates the stability bound {limit:.4g} "
                    f"for {self.basis.n_modes} modes"
                )
        if self.n_max is None:
            self.n_max = depth_for_tail(self.kernel, self.dt, self.tail.max_fraction)
        self.weights = quadrature_weights(self.kernel, self.dt, self.n_max, self.tail)

    def new_state(self, u0, v0, eta0=None, t0: float = 0.0, norm_exponent: float = 1.0) -> st.State:
        return st.initial_state(
            self.basis, u0, v0, self.dt, self.n_max, eta0=eta0, t0=t0,
            norm_exponent=norm_exponent,
        )

    def new_engine(self) -> PronyEngine:
        return PronyEngine(self.kernel, self.basis.n_modes, self.dt)


def _acceleration(stepper: Stepper, state: st.State, nl, forcing: Forcing,
                  t: float, engine: PronyEngine | None) -> np.ndarray:
    lam = stepper.basis.eigenvalues
    if engine is not None:
        mem = lam * engine.force_sum()
    else:
        mem = st.memory_force(state, stepper.weights)
    acc = -lam * state.u - mem + evaluate(forcing, t)
    if nl is not None:
        acc -= st.nonlinear_force(stepper.basis, state.u, nl)
    return acc


def step(
    state: st.State,
    stepper: Stepper,
    nl,
    forcing: Forcing,
    engine: PronyEngine | None = None,
    accel: np.ndarray | None = None,
) -> np.ndarray:
    """Advance the state by one dt in place.

    Returns the acceleration at the new time so drivers can reuse it.
    ``accel`` is the acceleration at the current time if already known.
    """
    dt = stepper.dt
    lam = stepper.basis.eigenvalues
    if accel is None:
        accel = _acceleration(stepper, state, nl, forcing, state.t, engine)

    if stepper.scheme == "central":
        v_half = state.v + 0.5 * dt * accel
        u_new = state.u + dt * v_half
        state.ring.push(state.u)
        t_new = state.t + dt
        g_new = evaluate(forcing, t_new)
        f_new = st.nonlinear_force(stepper.basis, u_new, nl) if nl is not None else 0.0
        if engine is not None:
            partial = engine.partial_advance(state.v)
            gain = engine.implicit_gain()
            rhs = v_half + 0.5 * dt * (-lam * u_new - lam * partial - f_new + g_new)
            v_new = rhs / (1.0 + 0.5 * dt * lam * gain)
            engine.advance(state.v, v_new)
            a_new = -lam * (u_new + partial + gain * v_new) - f_new + g_new
            state.u = u_new
        else:
            state.u = u_new
            a_new = -lam * u_new - st.memory_force(state, stepper.weights) - f_new + g_new
            v_new = v_half + 0.5 * dt * a_new
        state.v = v_new
        state.t = t_new
        return a_new

    # semi-implicit: average-acceleration treatment of the stiff part
    kw = stepper.weights
    stiff = lam * (1.0 + kw.weight_sum)
    u_pred = state.u + dt * state.v + 0.5 * dt * dt * accel
    state.ring.push(state.u)
    t_new = state.t + dt
    g_new = evaluate(forcing, t_new)
    f_new = st.nonlinear_force(stepper.basis, u_pred, nl) if nl is not None else 0.0
    hist = state.ring.weighted_sum(kw.mu_masses)
    r_new = lam * hist + g_new - f_new
    if kw.policy.mode == "anchor":
        r_new = r_new - lam * kw.tail * (u_pred - state.u_ref)
    quarter = 0.25 * dt * dt
    u_new = (state.u + dt * state.v + quarter * (accel + r_new)) / (1.0 + quarter * stiff)
    a_new = -stiff * u_new + r_new
    state.v = state.v + 0.5 * dt * (accel + a_new)
    state.u = u_new
    state.t = t_new
    return a_new


def simulate(
    stepper: Stepper,
    state: st.State,
    nl,
    forcing: Forcing,
    horizon: float,
    energy_shift: float = 1.0,
    record_every: int = 1,
    checkpoint_every: int | None = None,
) -> TrajectoryRecord:
    """Integrate over [t, t + horizon], sampling diagnostics.

    The forcing work integral accumulates by per-step trapezoid whatever
    the sampling stride, so energy bookkeeping stays second order.
    """
    n_steps = int(round(horizon / stepper.dt))
    engine = None
    if stepper.engine == "prony":
        engine = stepper.new_engine()
        engine.init_from_history(state)
    kw = stepper.weights
    basis = stepper.basis
    p = nl.growth if nl is not None else 1.0

    rows: list[tuple] = []
    cps: list[tuple] = []
    work = 0.0

    def sample():
        g = evaluate(forcing, state.t)
        power = float(g @ state.v)
        msq = st.memory_norm_sq(state, kw)
        usq = basis.norm_sigma(state.u, 1.0) ** 2
        vsq = float(state.v @ state.v)
        lp = basis.lp_norm(state.u, p + 1)
        pot = st.potential(basis, state.u, nl) if nl is not None else 0.0
        hsq = usq + vsq + msq
        phi = 0.5 * hsq + lp ** (p + 1)
        energy = 0.5 * hsq + pot + energy_shift
        dis = 0.5 * float(kw.dis_masses @ state.ring.lag_sq_norms(state.u))
        rows.append((state.t, phi, energy, dis, math.sqrt(hsq), lp, work, pot, power, float(g @ g)))
        if not np.isfinite(phi):
            raise FloatingPointError(f"non-finite state at t={state.t}")

    accel = _acceleration(stepper, state, nl, forcing, state.t, engine)
    sample()
    if checkpoint_every:
        cps.append((state.t, state.u.copy(), state.v.copy()))
    p_prev = float(evaluate(forcing, state.t) @ state.v)
    for n in range(1, n_steps + 1):
        accel = step(state, stepper, nl, forcing, engine=engine, accel=accel)
        p_now = float(evaluate(forcing, state.t) @ state.v)
        work += 0.5 * stepper.dt * (p_prev + p_now)
        p_prev = p_now
        if n % record_every == 0:
            sample()
        if checkpoint_every and n % checkpoint_every == 0:
            cps.append((state.t, state.u.copy(), state.v.copy()))

    arr = np.array(rows, dtype=float)
    rec = TrajectoryRecord(
        times=arr[:, 0], phi=arr[:, 1], energy=arr[:, 2], dissipation=arr[:, 3],
        h_norm=arr[:, 4], lp_norm=arr[:, 5], work=arr[:, 6], potential=arr[:, 7],
        power=arr[:, 8], g_sq=arr[:, 9],
    )
    if cps:
        rec.checkpoint_times = np.array([c[0] for c in cps])
        rec.checkpoints_u = np.array([c[1] for c in cps])
        rec.checkpoints_v = np.array([c[2] for c in cps])
    return rec


def linear_response(
    kernel: MemoryKernel,
    k_term,
    eps: float,
    sigma: float,
    horizon: float,
    dt: float,
    n_modes: int | None = None,
    tail: TailPolicy | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Response of the f = 0 system to the fast force k(t/eps) from rest.

    Returns (times, response norms), the norm being the phase-space norm
    of index sigma - 1.  Requires dt <= eps / 20 so the oscillation is
    resolved.
    """
    if eps <= 0:
        raise ValueError("linear response needs eps > 0")
    if dt > eps / 20 + 1e-15:
        raise ValueError(f"dt={dt} too coarse for eps={eps}: need dt <= eps/20")
    profile = np.asarray(k_term.profile, dtype=float)
    n = n_modes or len(profile)
    basis = make_basis(n)
    if len(profile) != n:
        raise ValueError("profile length does not match mode count")
    fast = Forcing(
        g0=ForceTerm(basis.zeros(), Waveform.zero()),
        g1=ForceTerm(profile, k_term.waveform),
        rho=0.0,
        eps=eps,
    )
    stepper = Stepper(basis, kernel, dt, tail=tail or TailPolicy())
    state = stepper.new_state(basis.zeros(), basis.zeros(), norm_exponent=sigma)
    kw = stepper.weights
    lam = basis.eigenvalues

    n_steps = int(round(horizon / dt))
    times = np.empty(n_steps + 1)
    norms = np.empty(n_steps + 1)

    def rnorm() -> float:
        zsq = float(kw.mu_masses @ state.ring.lag_sq_norms(state.u))
        return math.sqrt(
            float(np.sum(lam**sigma * state.u**2))
            + float(np.sum(lam ** (sigma - 1) * state.v**2))
            + zsq
        )

    times[0], norms[0] = state.t, rnorm()
    accel = _acceleration(stepper, state, None, fast, state.t, None)
    for i in range(1, n_steps + 1):
        accel = step(state, stepper, None, fast, accel=accel)
        times[i], norms[i] = state.t, rnorm()
    return times, norms


def single_mode_oracle(
    c: float,
    delta: float,
    lam: float,
    waveform: Waveform | None,
    amplitude: float,
    dt: float,
    n_steps: int,
    u0: float = 0.0,
    v0: float = 0.0,
) -> np.ndarray:
    """Exact trajectory of one mode with a one-term exponential kernel.

    The closed system is u' = v, v' = -lam*u - lam*z + g(t),
    z' = -delta*z + (c/delta)*v, with g either zero, constant, or a
    single sine/cosine atom; the forced system is augmented with the
    oscillator generating g and advanced by a single matrix exponential
    per step, exact at sample times.  Returns rows (u, v, z).
    """
    m = np.array([
        [0.0, 1.0, 0.0],
        [-lam, 0.0, -lam],
        [0.0, c / delta, -delta],
    ])
    if waveform is None or not waveform.atoms:
        big = m
        x0 = np.array([u0, v0, 0.0])
    else:
        if len(waveform.atoms) != 1:
            raise ValueError("oracle supports a single waveform atom")
        atom = waveform.atoms[0]
        if atom.kind == "const":
            big = np.zeros((4, 4))
            big[:3, :3] = m
            big[1, 3] = amplitude * atom.amplitude
            x0 = np.array([u0, v0, 0.0, 1.0])
        else:
            w = atom.frequency
            big = np.zeros((5, 5))
            big[:3, :3] = m
            big[1, 3] = amplitude * atom.amplitude
            big[3, 4] = w
            big[4, 3] = -w
            ph = atom.phase if atom.kind == "sin" else atom.phase + 0.5 * math.pi
            x0 = np.array([u0, v0, 0.0, math.sin(ph), math.cos(ph)])
    prop = expm(big * dt)
    out = np.empty((n_steps + 1, 3))
    x = x0
    out[0] = x[:3]
    for i in range(1, n_steps + 1):
        x = prop @ x
        out[i] = x[:3]
    return out
