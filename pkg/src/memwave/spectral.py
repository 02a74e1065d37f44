"""Dirichlet eigenbasis on the interval (0, pi) and modal-field operations.

The elastic operator is realized through its spectrum: eigenfunctions
e_n(x) = sqrt(2/pi) * sin(n x) with eigenvalues n**2.  Fields are plain
coefficient vectors on this orthonormal basis; fractional-power norms
reduce to weighted Euclidean norms of the coefficients.

Grid values live on the interior points x_j = j*pi/(M+1) with uniform
quadrature weight pi/(M+1).  That rule integrates products of the first
M eigenfunctions exactly, so coefficient/grid round trips are exact for
band-limited fields, and M = 2N+1 dealiases products up to cubic growth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ModalBasis", "make_basis"]


@dataclass(frozen=True)
class ModalBasis:
    n_modes: int
    eigenvalues: np.ndarray     # (N,), lambda_n = n**2
    grid: np.ndarray            # (M,) collocation points
    grid_weight: float          # uniform quadrature weight
    synthesis: np.ndarray       # (M, N) table e_n(x_j)

    @property
    def n_grid(self) -> int:
        return len(self.grid)

    def mode(self, n: int, scale: float = 1.0) -> np.ndarray:
        """Coefficient vector of scale * e_n (1-based mode index)."""
        if not 1 <= n <= self.n_modes:
            raise ValueError(f"mode {n} outside 1..{self.n_modes}")
        a = np.zeros(self.n_modes)
        a[n - 1] = scale
        return a

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_modes)

    def norm_sigma(self, coeffs: np.ndarray, sigma: float) -> float:
        """Fractional-power norm (sum lambda_n**sigma * a_n**2)**0.5."""
        a = np.asarray(coeffs, dtype=float)
        if a.shape != (self.n_modes,):
            raise ValueError(f"field has shape {a.shape}, basis expects ({self.n_modes},)")
        if sigma == 0:
            return float(np.linalg.norm(a))
        return float(np.sqrt(np.sum(self.eigenvalues**sigma * a**2)))

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        a = np.asarray(coeffs, dtype=float)
        if a.shape != (self.n_modes,):
            raise ValueError(f"field has shape {a.shape}, basis expects ({self.n_modes},)")
        return self.synthesis @ a

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        """Quadrature projection of grid values onto the first N modes."""
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n_grid,):
            raise ValueError(f"grid values have shape {v.shape}, expected ({self.n_grid},)")
        return self.grid_weight * (self.synthesis.T @ v)

    def lp_norm(self, coeffs: np.ndarray, q: float) -> float:
        """Collocation L^q norm of the field on (0, pi)."""
        if q < 1:
            raise ValueError(f"exponent q must be >= 1, got {q}")
        vals = np.abs(self.to_grid(coeffs))
        return float((self.grid_weight * np.sum(vals**q)) ** (1.0 / q))


def make_basis(n_modes: int, n_grid: int | None = None) -> ModalBasis:
    """Build the sine eigenbasis with M collocation points (default 2N+1)."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    m = 2 * n_modes + 1 if n_grid is None else n_grid
    if m < n_modes:
        raise ValueError(f"n_grid={m} cannot resolve {n_modes} modes")
    n = np.arange(1, n_modes + 1)
    x = np.arange(1, m + 1) * np.pi / (m + 1)
    table = np.sqrt(2.0 / np.pi) * np.sin(np.outer(x, n))
    return ModalBasis(
        n_modes=n_modes,
        eigenvalues=(n * n).astype(float),
        grid=x,
        grid_weight=np.pi / (m + 1),
        synthesis=table,
    )
