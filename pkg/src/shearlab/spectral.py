"""Frequency-space fields on the doubly periodic (z, v) box.

Conventions used everywhere in this package:

* z lives on [0, 2*pi) with integer wavenumbers k; v lives on [0, L_v)
  with wavenumbers eta = (2*pi/L_v)*q for integer q.
* The forward transform carries the 1/(n_z*n_v) factor (scipy's
  norm="forward"), so Plancherel reads  mean_phys |f|^2 = sum_freq |fhat|^2
  and every norm below is a plain unweighted sum over coefficients.
* The moving-frame derivative grad_L = (d_z, d_v - t d_z) acts as the
  multipliers (i*k, i*(eta - k*t)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import GridError


class SpilloverWarning(UserWarning):
    """Field mass is leaking into the outer edge of the v-box."""


class FrequencyGrid:
    """Truncated Fourier grid: n_z z-modes, n_v v-modes, v-period L_v."""

    def __init__(self, n_z: int, n_v: int, L_v: float = 32.0):
        if n_z % 2 or n_v % 2 or n_z < 8 or n_v < 8:
            raise GridError(f"grid sizes must be even and >= 8, got {n_z}x{n_v}")
        if L_v <= 0:
            raise GridError(f"L_v must be positive, got {L_v}")
        self.n_z = int(n_z)
        self.n_v = int(n_v)
        self.L_v = float(L_v)

        self.k = np.fft.fftfreq(self.n_z, 1.0 / self.n_z)          # integers
        self.q = np.fft.fftfreq(self.n_v, 1.0 / self.n_v)          # integers
        self.eta = (2.0 * np.pi / self.L_v) * self.q
        # broadcastable (n_z,1) and (1,n_v) views for multiplier tables
        self.K = self.k[:, None]
        self.E = self.eta[None, :]

        # 2/3-rule retained band
        self.k_cut = self.n_z // 3
        self.q_cut = self.n_v // 3
        self.eta_cut = (2.0 * np.pi / self.L_v) * self.q_cut
        self.dealias_mask = (np.abs(self.k)[:, None] <= self.k_cut) & (
            np.abs(self.q)[None, :] <= self.q_cut
        )

        self.dz = 2.0 * np.pi / self.n_z
        self.dv = self.L_v / self.n_v
        self.z = self.dz * np.arange(self.n_z)
        self.v = self.dv * np.arange(self.n_v)

    def _key(self):
        return (self.n_z, self.n_v, self.L_v)

    def __eq__(self, other):
        return isinstance(other, FrequencyGrid) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"FrequencyGrid(n_z={self.n_z}, n_v={self.n_v}, L_v={self.L_v})"

    def index_of(self, k: int, q: int) -> tuple[int, int]:
        """Array indices of the mode with integer frequencies (k, q)."""
        if not (-self.n_z // 2 <= k < self.n_z // 2):
            raise GridError(f"k={k} outside grid band")
        if not (-self.n_v // 2 <= q < self.n_v // 2):
            raise GridError(f"q={q} outside grid band")
        return k % self.n_z, q % self.n_v


@dataclass
class SpectralField:
    """Complex coefficient array indexed (k, eta) on a FrequencyGrid."""

    grid: FrequencyGrid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.grid.n_z, self.grid.n_v):
            raise GridError(
                f"coefficient shape {self.coeffs.shape} does not match grid "
                f"{self.grid.n_z}x{self.grid.n_v}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


def zero_field(grid: FrequencyGrid) -> SpectralField:
    return SpectralField(grid, np.zeros((grid.n_z, grid.n_v), dtype=np.complex128))


def _check_same_grid(f: SpectralField, g: SpectralField):
    if f.grid != g.grid:
        raise GridError("fields live on different grids")


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform; returns complex (n_z, n_v) samples on (z, v)."""
    return scipy.fft.ifft2(f.coeffs, norm="forward")


def to_spectral(values: np.ndarray, grid: FrequencyGrid) -> SpectralField:
    """Forward transform with the 1/(n_z*n_v) normalization."""
    values = np.asarray(values)
    if values.shape != (grid.n_z, grid.n_v):
        raise GridError(f"sample shape {values.shape} does not match grid")
    return SpectralField(grid, scipy.fft.fft2(values, norm="forward"))


def sobolev_weight(grid: FrequencyGrid, N: float) -> np.ndarray:
    """Table of (1 + k^2 + eta^2)^N over the grid."""
    return (1.0 + grid.K**2 + grid.E**2) ** N


def sobolev_norm(f: SpectralField, N: float) -> float:
    """H^N norm: sqrt(sum (1+k^2+eta^2)^N |fhat|^2)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    w = sobolev_weight(f.grid, N)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def grad_L(f: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    """Moving-frame gradient (d_z f, (d_v - t d_z) f) as multiplier actions."""
    g = f.grid
    fz = SpectralField(g, 1j * g.K * f.coeffs)
    fv = SpectralField(g, 1j * (g.E - g.K * t) * f.coeffs)
    return fz, fv


def laplace_L_table(grid: FrequencyGrid, t: float) -> np.ndarray:
    """Multiplier of Delta_L at time t: -(k^2 + (eta - k t)^2)."""
    return -(grid.K**2 + (grid.E - grid.K * t) ** 2)


def laplace_L(f: SpectralField, t: float) -> SpectralField:
    return SpectralField(f.grid, laplace_L_table(f.grid, t) * f.coeffs)


def inv_laplace_L(f: SpectralField, t: float) -> SpectralField:
    """Solve Delta_L phi = f; the (0,0) mode is gauged to zero."""
    g = f.grid
    sym = -(g.K**2 + (g.E - g.K * t) ** 2)
    out = np.zeros_like(f.coeffs)
    np.divide(f.coeffs, sym, out=out, where=(sym != 0.0))
    return SpectralField(g, out)


def project_modes(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split into the z-average (k=0 column) and the rest; sum is exact."""
    zero = np.zeros_like(f.coeffs)
    zero[0, :] = f.coeffs[0, :]
    nonzero = f.coeffs.copy()
    nonzero[0, :] = 0.0
    return SpectralField(f.grid, zero), SpectralField(f.grid, nonzero)


def dealias(f: SpectralField) -> SpectralField:
    """Zero everything outside the 2/3 band; idempotent."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def mode_coefficient(f: SpectralField, k: int, q: int) -> complex:
    i, j = f.grid.index_of(k, q)
    return complex(f.coeffs[i, j])


def hermitian_defect(f: SpectralField) -> float:
    """Sup deviation from conj-symmetry fhat(-k,-eta) = conj(fhat(k,eta))."""
    g = f.grid
    iz = (-np.arange(g.n_z)) % g.n_z
    iv = (-np.arange(g.n_v)) % g.n_v
    mirrored = np.conj(f.coeffs[np.ix_(iz, iv)])
    return float(np.max(np.abs(f.coeffs - mirrored)))


def hermitize(f: SpectralField) -> SpectralField:
    """Project onto the conj-symmetric (real physical) part."""
    g = f.grid
    iz = (-np.arange(g.n_z)) % g.n_z
    iv = (-np.arange(g.n_v)) % g.n_v
    mirrored = np.conj(f.coeffs[np.ix_(iz, iv)])
    return SpectralField(g, 0.5 * (f.coeffs + mirrored))


def spillover_fraction(f: SpectralField) -> float:
    """Fraction of physical mass in the outer 10 percent of the v-box."""
    phys = to_physical(f)
    g = f.grid
    outer = (g.v < 0.05 * g.L_v) | (g.v >= 0.95 * g.L_v)
    total = float(np.sum(np.abs(phys) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(phys[:, outer]) ** 2)) / total


def check_spillover(f: SpectralField, what: str = "field",
                    warn: float = 1e-6, fail: float = 1e-3) -> float:
    """Warn above `warn`, raise GridError above `fail`; returns the fraction."""
    frac = spillover_fraction(f)
    if frac > fail:
        raise GridError(
            f"{what}: {frac:.3e} of the mass sits in the outer 10% of the "
            f"v-box; enlarge L_v or localize the data"
        )
    if frac > warn:
        warnings.warn(
            f"{what}: outer-box mass fraction {frac:.3e} exceeds 1e-6",
            SpilloverWarning,
            stacklevel=2,
        )
    return frac


_STAMP_KINDS = ("grad_L_z", "grad_L_v", "laplace_L", "inv_laplace_L", "sobolev_N")


@dataclass(frozen=True)
class OperatorStamp:
    """Identifies one diagonal operator at a fixed time (for tests/tooling)."""

    t: float
    kind: str
    N: float = 0.0

    def __post_init__(self):
        if self.kind not in _STAMP_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")

    def table(self, grid: FrequencyGrid) -> np.ndarray:
        K, E, t = grid.K, grid.E, self.t
        if self.kind == "grad_L_z":
            return (1j * K) * np.ones_like(E)
        if self.kind == "grad_L_v":
            return 1j * (E - K * t) * np.ones_like(K)
        if self.kind == "laplace_L":
            return laplace_L_table(grid, t) + 0j
        if self.kind == "inv_laplace_L":
            sym = laplace_L_table(grid, t)
            out = np.zeros(np.broadcast_shapes(K.shape, E.shape), dtype=np.complex128)
            np.divide(1.0, sym, out=out, where=(sym != 0.0))
            return out
        return sobolev_weight(grid, self.N / 2.0) * np.ones((grid.n_z, grid.n_v)) + 0j
