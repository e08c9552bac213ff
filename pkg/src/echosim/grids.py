"""Uniform position/momentum grids, Gaussian wavepackets, overlaps and moments.

Conventions: the discrete norm includes the quadrature weight, so
sum(|psi|^2) * dx approximates the continuum integral and equals 1 for a
normalized state.  Momentum-space amplitudes are kept in FFT ordering with
grid.p giving the matching momentum values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

_ROOT2PI = np.sqrt(2.0 * np.pi)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform spatial grid with the conjugate FFT momentum grid.

    n_points must be a power of two.  The momentum grid spans
    [-pi*hbar/dx, pi*hbar/dx) with spacing dp = 2*pi*hbar/(n_points*dx).
    """

    n_points: int
    x_min: float
    x_max: float
    hbar: float

    def __post_init__(self):
        if not _is_power_of_two(self.n_points) or self.n_points < 2:
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError(f"degenerate interval [{self.x_min}, {self.x_max}]")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def dp(self) -> float:
        return 2.0 * np.pi * self.hbar / (self.n_points * self.dx)

    @property
    def p_max(self) -> float:
        return np.pi * self.hbar / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def p(self) -> np.ndarray:
        """Momentum values in FFT ordering."""
        return 2.0 * np.pi * self.hbar * sfft.fftfreq(self.n_points, d=self.dx)

    @cached_property
    def _fwd_phase(self) -> np.ndarray:
        # carries the x_min offset so the transform matches the continuum
        # convention psi~(p) = (2 pi hbar)^(-1/2) int psi(x) exp(-i p x/hbar) dx
        return np.exp(-1j * self.p * self.x_min / self.hbar)


def build_grid(n_points: int, x_min: float, x_max: float, hbar: float) -> SpatialGrid:
    """Build a validated grid; raises ValueError on bad sizes or scales."""
    return SpatialGrid(int(n_points), float(x_min), float(x_max), float(hbar))


@dataclass(frozen=True)
class Wavefunction:
    grid: SpatialGrid
    amplitudes: np.ndarray
    representation: str = "position"  # "position" | "momentum"

    def __post_init__(self):
        if self.representation not in ("position", "momentum"):
            raise ValueError(f"unknown representation {self.representation!r}")
        amps = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes shape {amps.shape} does not match grid ({self.grid.n_points},)"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def weight(self) -> float:
        """Quadrature weight of the current representation."""
        return self.grid.dx if self.representation == "position" else self.grid.dp

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.weight))


@dataclass(frozen=True)
class Moments:
    mean_x: float
    mean_p: float
    spread_x: float
    spread_p: float


def gaussian_wavepacket(grid: SpatialGrid, x0: float, p0: float, sigma_x: float) -> Wavefunction:
    """Normalized minimum-uncertainty Gaussian centered at (x0, p0).

    Position spread sigma_x, momentum spread hbar/(2 sigma_x).  Requires a
    6-sigma margin from the grid boundary in both position and momentum.
    """
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    sigma_p = grid.hbar / (2.0 * sigma_x)
    if x0 - 6 * sigma_x < grid.x_min or x0 + 6 * sigma_x > grid.x_max:
        raise ValueError(
            f"wavepacket support clipped by grid boundary: x0={x0}, sigma_x={sigma_x}, "
            f"grid [{grid.x_min}, {grid.x_max}]"
        )
    if abs(p0) + 6 * sigma_p > grid.p_max:
        raise ValueError(
            f"wavepacket momentum support clipped: p0={p0}, sigma_p={sigma_p:.4g}, "
            f"p_max={grid.p_max:.4g}"
        )
    x = grid.x
    psi = (2.0 * np.pi * sigma_x**2) ** -0.25 * np.exp(
        -((x - x0) ** 2) / (4.0 * sigma_x**2) + 1j * p0 * x / grid.hbar
    )
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return Wavefunction(grid, psi, "position")


def inner_product(psi1: Wavefunction, psi2: Wavefunction) -> complex:
    """<psi1|psi2> with the quadrature weight; |result|^2 is the overlap."""
    if psi1.grid != psi2.grid:
        raise ValueError("wavefunctions live on different grids")
    if psi1.representation != psi2.representation:
        raise ValueError("wavefunctions are in different representations")
    return complex(np.sum(np.conj(psi1.amplitudes) * psi2.amplitudes) * psi1.weight)


def to_momentum_space(psi: Wavefunction) -> Wavefunction:
    """Unitary DFT to the momentum representation (FFT-ordered amplitudes)."""
    if psi.representation != "position":
        raise ValueError("expected position representation")
    g = psi.grid
    amps = g._fwd_phase * sfft.fft(psi.amplitudes) * (g.dx / np.sqrt(2.0 * np.pi * g.hbar))
    return Wavefunction(g, amps, "momentum")


def to_position_space(psi: Wavefunction) -> Wavefunction:
    """Inverse of to_momentum_space."""
    if psi.representation != "momentum":
        raise ValueError("expected momentum representation")
    g = psi.grid
    amps = sfft.ifft(psi.amplitudes * np.conj(g._fwd_phase)) * (np.sqrt(2.0 * np.pi * g.hbar) / g.dx)
    return Wavefunction(g, amps, "position")


def moments(psi: Wavefunction, norm_tol: float = 1e-6) -> Moments:
    """Position and momentum means and spreads; momentum moments are spectral."""
    n = psi.norm()
    if abs(n - 1.0) > norm_tol:
        raise ValueError(f"state is not normalized: norm={n}")
    if psi.representation == "position":
        pos, mom = psi, to_momentum_space(psi)
    else:
        pos, mom = to_position_space(psi), psi
    g = psi.grid
    wx = np.abs(pos.amplitudes) ** 2 * g.dx
    wp = np.abs(mom.amplitudes) ** 2 * g.dp
    mean_x = float(np.sum(wx * g.x))
    mean_p = float(np.sum(wp * g.p))
    var_x = float(np.sum(wx * (g.x - mean_x) ** 2))
    var_p = float(np.sum(wp * (g.p - mean_p) ** 2))
    return Moments(mean_x, mean_p, np.sqrt(max(var_x, 0.0)), np.sqrt(max(var_p, 0.0)))


def position_spread(amplitudes: np.ndarray, grid: SpatialGrid) -> float:
    """Delta X of raw position-space amplitudes (fast path, no FFT)."""
    w = np.abs(amplitudes) ** 2 * grid.dx
    m = np.sum(w * grid.x)
    return float(np.sqrt(max(np.sum(w * (grid.x - m) ** 2), 0.0)))


def boundary_density_ratio(amplitudes: np.ndarray) -> float:
    """max(|psi(edge)|^2) / max(|psi|^2); small for a well-confined state."""
    dens = np.abs(amplitudes) ** 2
    peak = dens.max()
    if peak == 0.0:
        return 0.0
    return float(max(dens[0], dens[-1]) / peak)
