"""Split-operator time evolution, forked perturbed runs, and bound diagnostics.

The propagation scheme is second-order symmetric splitting: half kinetic step
(spectral), full potential phase with the drive evaluated at the midpoint
time, half kinetic step.  Consecutive steps fuse the adjacent half-kinetic
factors, which is algebraically exact and halves the FFT count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grids import (
    Moments,
    SpatialGrid,
    Wavefunction,
    boundary_density_ratio,
    inner_product,
    moments,
    position_spread,
)
from .hamiltonian import DrivenHamiltonian

BOUNDARY_TOL = 1e-10


class StateEscapeError(RuntimeError):
    """Raised when the boundary-density confinement check fails."""


@dataclass(frozen=True)
class EvolutionSchedule:
    """Preparation time T, post-fork horizon, step and recording stride."""

    T: float
    tau_max: float
    dt: float = 0.005
    sample_every: float = 0.1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sample_every < self.dt:
            raise ValueError("sample_every must be >= dt")
        if self.T < 0 or self.tau_max < 0:
            raise ValueError("T and tau_max must be nonnegative")

    @property
    def steps_per_sample(self) -> int:
        return max(1, round(self.sample_every / self.dt))


@dataclass(frozen=True)
class OverlapSeries:
    """Sampled overlap decay of a forked run, with the accumulated-phase bound.

    bound = cos^2(min(phi, pi/2)); entries with phi >= pi/2 are past the
    validity window of the inequality and the bound is vacuously zero there.
    spread_x/spread_p are taken at the fork time (tau = 0).
    """

    times: np.ndarray
    overlap: np.ndarray
    delta_v: np.ndarray
    phi: np.ndarray
    bound: np.ndarray
    spread_x: float
    spread_p: float
    hbar: float


@dataclass(frozen=True)
class FringeScales:
    """Smallest phase-space structure scales of a state spread over dX*dP."""

    delta_x: float
    delta_p: float
    sub_planck_action: float


class _SplitStepper:
    """Precomputed phases for repeated split-operator steps of one branch."""

    def __init__(self, grid: SpatialGrid, h: DrivenHamiltonian, dt: float):
        self.grid = grid
        self.h = h
        self.dt = dt
        k = grid.p**2 / (2.0 * h.m)
        self._kin_half = np.exp(-0.5j * k * dt / grid.hbar)
        self._kin_full = self._kin_half * self._kin_half
        self._cos_x = np.cos(grid.x)
        self._sin_x = np.sin(grid.x)
        self._harmonic = 0.5 * h.a * (grid.x + h.shift) ** 2

    def _potential_phase(self, t_mid: float) -> np.ndarray:
        c = self.h.l * np.sin(t_mid)
        v = -self.h.kappa * (self._cos_x * np.cos(c) + self._sin_x * np.sin(c)) + self._harmonic
        return np.exp(-1j * v * self.dt / self.grid.hbar)

    def run(self, amps: np.ndarray, t: float, n_steps: int) -> tuple[np.ndarray, float]:
        """Advance n_steps from absolute time t; returns (amplitudes, t_end)."""
        if n_steps <= 0:
            return amps, t
        dt = self.dt
        a = sfft.fft(amps)
        a *= self._kin_half
        for k in range(n_steps):
            a = sfft.ifft(a)
            a *= self._potential_phase(t + (k + 0.5) * dt)
            a = sfft.fft(a)
            a *= self._kin_full if k < n_steps - 1 else self._kin_half
        a = sfft.ifft(a)
        t_end = t + n_steps * dt
        if boundary_density_ratio(a) > BOUNDARY_TOL:
            raise StateEscapeError(
                f"state escaped the grid at t={t_end:.3f} "
                f"(boundary density ratio {boundary_density_ratio(a):.2e})"
            )
        return a, t_end


def split_operator_step(psi: Wavefunction, h: DrivenHamiltonian, t: float, dt: float) -> Wavefunction:
    """One symmetric split step from absolute time t; norm-preserving."""
    if psi.representation != "position":
        raise ValueError("split_operator_step expects the position representation")
    amps, _ = _SplitStepper(psi.grid, h, dt).run(psi.amplitudes.copy(), t, 1)
    return Wavefunction(psi.grid, amps, "position")


def evolve_fork(
    psi0: Wavefunction,
    h: DrivenHamiltonian,
    schedule: EvolutionSchedule,
    stop_overlap: float | None = None,
) -> OverlapSeries:
    """Prepare under the base branch for t in [0, T], fork, record overlap decay.

    At each post-fork sample tau: overlap |<psi_minus|psi_plus>|^2, the spread
    of the perturbation 2*a*eps*dX in the tighter of the two branches, the
    accumulated phase phi (trapezoidal), and the bound cos^2 phi.  If
    stop_overlap is set, recording ends at the first sample below it.
    """
    if psi0.representation != "position":
        raise ValueError("evolve_fork expects the position representation")
    grid = psi0.grid
    hbar = grid.hbar
    dt = schedule.dt
    block = schedule.steps_per_sample
    stride = block * dt

    base = _SplitStepper(grid, h.with_branch("base"), dt)
    amps = psi0.amplitudes.copy()
    t = 0.0
    prep_steps = round(schedule.T / dt)
    while prep_steps > 0:
        chunk = min(prep_steps, block)
        amps, t = base.run(amps, t, chunk)
        prep_steps -= chunk

    forked = moments(Wavefunction(grid, amps, "position"))
    plus = _SplitStepper(grid, h.with_branch("plus"), dt)
    minus = _SplitStepper(grid, h.with_branch("minus"), dt)
    a_p = amps.copy()
    a_m = amps.copy()

    coupling = 2.0 * h.a * h.epsilon
    n_samples = int(np.floor(schedule.tau_max / stride + 1e-9))
    times = [0.0]
    overlap = [_overlap(a_m, a_p, grid)]
    delta_v = [coupling * min(position_spread(a_p, grid), position_spread(a_m, grid))]
    phi = [0.0]

    t_p = t_m = t
    for k in range(1, n_samples + 1):
        a_p, t_p = plus.run(a_p, t_p, block)
        a_m, t_m = minus.run(a_m, t_m, block)
        times.append(k * stride)
        overlap.append(_overlap(a_m, a_p, grid))
        dv = coupling * min(position_spread(a_p, grid), position_spread(a_m, grid))
        delta_v.append(dv)
        phi.append(phi[-1] + 0.5 * (delta_v[-2] + dv) * stride / hbar)
        if stop_overlap is not None and overlap[-1] < stop_overlap:
            break

    phi_arr = np.asarray(phi)
    return OverlapSeries(
        times=np.asarray(times),
        overlap=np.asarray(overlap),
        delta_v=np.asarray(delta_v),
        phi=phi_arr,
        bound=np.cos(np.minimum(phi_arr, np.pi / 2)) ** 2,
        spread_x=forked.spread_x,
        spread_p=forked.spread_p,
        hbar=hbar,
    )


def _overlap(a1: np.ndarray, a2: np.ndarray, grid: SpatialGrid) -> float:
    return float(np.abs(np.sum(np.conj(a1) * a2) * grid.dx) ** 2)


def lower_bound_curve(times: np.ndarray, delta_v: np.ndarray, hbar: float) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated phase phi = (1/hbar) int dV dt' and the bound cos^2 phi.

    The bound is clipped at the phi = pi/2 validity edge (zero beyond it).
    Returns (phi, bound).
    """
    times = np.asarray(times, dtype=float)
    delta_v = np.asarray(delta_v, dtype=float)
    if times.shape != delta_v.shape or times.ndim != 1:
        raise ValueError("times and delta_v must be matching 1-d arrays")
    if np.any(delta_v < 0):
        raise ValueError("delta_v must be nonnegative")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    phi = np.concatenate(
        ([0.0], np.cumsum(0.5 * (delta_v[1:] + delta_v[:-1]) * np.diff(times)))
    ) / hbar
    bound = np.cos(np.minimum(phi, np.pi / 2)) ** 2
    return phi, bound


def decoherence_bound(mean_delta_v: float, hbar: float) -> float:
    """Uncertainty-principle lower bound pi*hbar/(2*mean_delta_v)."""
    if mean_delta_v <= 0:
        raise ValueError("mean_delta_v must be positive")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    return np.pi * hbar / (2.0 * mean_delta_v)


def fringe_scales(m: Moments, hbar: float) -> FringeScales:
    """Smallest interference-structure scales hbar/dP, hbar/dX, hbar^2/(dX*dP)."""
    if m.spread_x <= 0 or m.spread_p <= 0:
        raise ValueError("spreads must be positive")
    return FringeScales(
        delta_x=hbar / m.spread_p,
        delta_p=hbar / m.spread_x,
        sub_planck_action=hbar**2 / (m.spread_x * m.spread_p),
    )
