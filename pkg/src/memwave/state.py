"""Phase-space states, the past-displacement ring buffer, and energy gauges.

A state is (u, v, history): current displacement and velocity
coefficients plus a ring buffer of past displacement snapshots at the
integrator spacing dt.  The memory field at lag s is never stored; it is
reconstructed as eta(s) = u(now) - u(now - s), which makes the lag
transport identity hold by construction and keeps the hereditary force a
single weighted sum over the buffer.

Buffer rows older than the elapsed time hold the initial past data
q(s) = u0 - eta0(s); pushing snapshots shifts them outward exactly as
the lag transport requires, so one reconstruction formula covers both
the warm and the cold part of the history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelWeights
from .spectral import ModalBasis

__all__ = [
    "PowerLaw",
    "SineGordon",
    "HistoryRing",
    "State",
    "initial_state",
    "eta_at",
    "memory_force",
    "memory_norm",
    "memory_norm_sq",
    "hnorm_sq",
    "energy_gauge",
    "potential",
    "nonlinear_force",
    "state_distance",
]


@dataclass(frozen=True)
class PowerLaw:
    """f(u) = a * |u|**(p-1) * u with growth order p in [1, 3)."""

    a: float = 1.0
    p: float = 2.0

    @property
    def growth(self) -> float:
        return self.p

    def f(self, u):
        return self.a * np.abs(u) ** (self.p - 1) * u

    def f_prime(self, u):
        return self.a * self.p * np.abs(u) ** (self.p - 1)

    def potential_density(self, u):
        return self.a / (self.p + 1) * np.abs(u) ** (self.p + 1)


@dataclass(frozen=True)
class SineGordon:
    """f(u) = b * sin(u); Lipschitz, growth order 1."""

    b: float = 1.0

    @property
    def growth(self) -> float:
        return 1.0

    def f(self, u):
        return self.b * np.sin(u)

    def f_prime(self, u):
        return self.b * np.cos(u)

    def potential_density(self, u):
        return self.b * (1.0 - np.cos(u))


Nonlinearity = PowerLaw | SineGordon


class HistoryRing:
    """Circular buffer of past coefficient vectors at uniform dt spacing.

    Rows are kept in a fixed array; ``_pos`` marks the most recent
    snapshot and pushes move it backward, so lag order is the pair of
    slices [pos:], [:pos].  Per-row weighted squared norms are cached at
    write time, which keeps the memory norm and the dissipation
    functional at one matrix-vector product per evaluation.
    """

    def __init__(self, depth: int, width: int, sq_weights: np.ndarray):
        if depth < 1:
            raise ValueError("ring depth must be >= 1")
        self.depth = depth
        self.width = width
        self.sq_weights = np.asarray(sq_weights, dtype=float)
        self._buf = np.zeros((depth, width))
        self._row_sq = np.zeros(depth)
        self._pos = 0
        self._scratch = np.empty(depth)

    def fill(self, rows: np.ndarray) -> None:
        """Set the whole buffer; rows[k-1] becomes the snapshot at lag k*dt."""
        rows = np.asarray(rows, dtype=float)
        if rows.shape != (self.depth, self.width):
            raise ValueError(f"fill expects shape {(self.depth, self.width)}, got {rows.shape}")
        self._buf[:] = rows
        self._row_sq[:] = (self.sq_weights * rows * rows).sum(axis=1)
        self._pos = 0

    def push(self, u: np.ndarray) -> None:
        self._pos = (self._pos - 1) % self.depth
        self._buf[self._pos] = u
        self._row_sq[self._pos] = float(self.sq_weights @ (u * u))

    def snapshot(self, k: int) -> np.ndarray:
        """Stored displacement at lag k*dt (k = 1..depth)."""
        if not 1 <= k <= self.depth:
            raise IndexError(
                f"lag index {k} beyond buffer depth {self.depth}: "
                "history truncated shorter than the requested lag"
            )
        return self._buf[(self._pos + k - 1) % self.depth]

    def _to_buffer_order(self, lag_values: np.ndarray) -> np.ndarray:
        head = self.depth - self._pos
        self._scratch[self._pos:] = lag_values[:head]
        self._scratch[: self._pos] = lag_values[head:]
        return self._scratch

    def _to_lag_order(self, buf_values: np.ndarray) -> np.ndarray:
        return np.concatenate([buf_values[self._pos:], buf_values[: self._pos]])

    def weighted_sum(self, lag_weights: np.ndarray) -> np.ndarray:
        """sum_k w_k * snapshot(k) as one matrix-vector product."""
        wh = self._to_buffer_order(lag_weights)
        return wh @ self._buf

    def lag_matrix(self) -> np.ndarray:
        """All snapshots in lag order, shape (depth, width); allocates."""
        return np.concatenate([self._buf[self._pos:], self._buf[: self._pos]])

    def lag_dot(self, x: np.ndarray) -> np.ndarray:
        """<snapshot(k), x> for every lag k, unweighted coefficients."""
        return self._to_lag_order(self._buf @ x)

    def lag_sq_norms(self, u: np.ndarray) -> np.ndarray:
        """Weighted squared norms ||u - snapshot(k)||^2 for every lag."""
        wu = self.sq_weights * u
        cross = self._buf @ wu
        vals = float(wu @ u) - 2.0 * cross + self._row_sq
        return np.maximum(self._to_lag_order(vals), 0.0)

    def copy(self) -> "HistoryRing":
        other = HistoryRing(self.depth, self.width, self.sq_weights)
        other._buf[:] = self._buf
        other._row_sq[:] = self._row_sq
        other._pos = self._pos
        return other


@dataclass
class State:
    """Trajectory state (u, v, history) at time t."""

    basis: ModalBasis
    u: np.ndarray
    v: np.ndarray
    ring: HistoryRing
    dt: float
    t: float
    u_ref: np.ndarray  # displacement at the initial time, the tail anchor

    def copy(self) -> "State":
        return State(
            basis=self.basis,
            u=self.u.copy(),
            v=self.v.copy(),
            ring=self.ring.copy(),
            dt=self.dt,
            t=self.t,
            u_ref=self.u_ref.copy(),
        )


def initial_state(
    basis: ModalBasis,
    u0: np.ndarray,
    v0: np.ndarray,
    dt: float,
    depth: int,
    eta0: list[tuple[float, np.ndarray]] | None = None,
    t0: float = 0.0,
    norm_exponent: float = 1.0,
) -> State:
    """Assemble a state at time t0 with the buffer prefilled from eta0.

    ``eta0`` is an optional list of (lag, coefficients) samples of the
    initial memory, interpolated linearly in the lag and extended by its
    last value; by default the initial memory is zero, i.e. the body sat
    at u0 for all earlier times.
    """
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    ring = HistoryRing(depth, basis.n_modes, basis.eigenvalues**norm_exponent)
    lags = dt * np.arange(1, depth + 1)
    if eta0 is None:
        rows = np.tile(u0, (depth, 1))
    else:
        samples = sorted(eta0, key=lambda p: p[0])
        s_pts = np.array([s for s, _ in samples])
        vals = np.array([np.asarray(f, dtype=float) for _, f in samples])
        rows = np.empty((depth, basis.n_modes))
        for j in range(basis.n_modes):
            eta_j = np.interp(lags, s_pts, vals[:, j])
            rows[:, j] = u0[j] - eta_j
    ring.fill(rows)
    return State(basis=basis, u=u0.copy(), v=v0.copy(), ring=ring, dt=dt, t=t0, u_ref=u0.copy())


def eta_at(state: State, s: float) -> np.ndarray:
    """Memory field at lag s > 0, linear between stored snapshots."""
    if s <= 0:
        raise ValueError(f"lag must be positive, got {s}")
    k = s / state.dt
    k0 = int(np.floor(k))
    frac = k - k0
    below = state.u if k0 == 0 else state.ring.snapshot(k0)
    if frac < 1e-12:
        past = below
    else:
        past = (1.0 - frac) * below + frac * state.ring.snapshot(k0 + 1)
    return state.u - past


def memory_force(state: State, kw: KernelWeights) -> np.ndarray:
    """Modal hereditary force: lambda_n * sum_k w_k * eta_n(s_k) (+ tail)."""
    hist = state.ring.weighted_sum(kw.mu_masses)
    acc = kw.weight_sum * state.u - hist
    if kw.policy.mode == "anchor":
        acc = acc + kw.tail * (state.u - state.u_ref)
    return state.basis.eigenvalues * acc


def memory_norm_sq(state: State, kw: KernelWeights) -> float:
    """Squared memory norm sum_k w_k * ||eta(s_k)||_1^2 (truncated tail)."""
    sq = state.ring.lag_sq_norms(state.u)
    return float(kw.mu_masses @ sq)


def memory_norm(state: State, kw: KernelWeights) -> float:
    return float(np.sqrt(memory_norm_sq(state, kw)))


def hnorm_sq(state: State, kw: KernelWeights) -> float:
    """Squared phase-space norm ||u||_1^2 + ||v||^2 + memory norm squared."""
    b = state.basis
    return (
        b.norm_sigma(state.u, 1.0) ** 2
        + float(state.v @ state.v)
        + memory_norm_sq(state, kw)
    )


def energy_gauge(state: State, nl: Nonlinearity, kw: KernelWeights) -> float:
    """Energy-like gauge: half the squared phase-space norm plus the
    (p+1)-power displacement norm.  Measures absorbing-set size."""
    p = nl.growth
    return 0.5 * hnorm_sq(state, kw) + state.basis.lp_norm(state.u, p + 1) ** (p + 1)


def potential(basis: ModalBasis, u: np.ndarray, nl: Nonlinearity) -> float:
    """Potential integral of the primitive of f, by collocation quadrature."""
    vals = nl.potential_density(basis.to_grid(u))
    return float(basis.grid_weight * np.sum(vals))


def nonlinear_force(basis: ModalBasis, u: np.ndarray, nl: Nonlinearity) -> np.ndarray:
    """Modal coefficients of f(u), evaluated pseudo-spectrally."""
    return basis.from_grid(nl.f(basis.to_grid(u)))


def state_distance(sa: State, sb: State, kw: KernelWeights) -> float:
    """Phase-space distance between two states sharing basis and lag grid."""
    if sa.ring.depth != sb.ring.depth:
        raise ValueError("states have different history depths")
    b = sa.basis
    du = sa.u - sb.u
    dv = sa.v - sb.v
    dbuf = sa.ring.lag_matrix() - sb.ring.lag_matrix()
    w = sa.ring.sq_weights
    deta_sq = ((du - dbuf) ** 2 * w).sum(axis=1)
    return float(
        np.sqrt(
            b.norm_sigma(du, 1.0) ** 2 + dv @ dv + kw.mu_masses @ deta_sq
        )
    )
