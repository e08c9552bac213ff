"""Wigner transforms, phase-space overlap, and sparse-cat experiments.

The transform evaluates W(x, p) = (1/pi*hbar) int conj(psi)(x+y) psi(x-y)
exp(2ipy/hbar) dy row by row with the correlation built on the position
grid (lag step dx) and zero padding in the lag direction, so every nonzero
lag is covered exactly and no wraparound occurs.  The resulting momentum
grid spans [-pi*hbar/(2dx), pi*hbar/(2dx)) with spacing pi*hbar/(2*n*dx).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grids import SpatialGrid, Wavefunction

MARGINAL_TOL = 1e-8


@dataclass(frozen=True)
class WignerFunction:
    """Real phase-space distribution on the x grid and its fringe-resolving p grid."""

    values: np.ndarray  # (n_x, n_p), real
    x: np.ndarray
    p: np.ndarray
    hbar: float

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def marginal_x(self) -> np.ndarray:
        """Position density: int W dp."""
        return self.values.sum(axis=1) * self.dp

    def marginal_p(self) -> np.ndarray:
        """Momentum density on the Wigner p grid: int W dx."""
        return self.values.sum(axis=0) * self.dx

    def total(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)


def _momentum_density_on_wigner_grid(psi: Wavefunction) -> np.ndarray:
    # |psi~|^2 sampled at the Wigner p points: zero-pad the position grid to
    # 4n so the FFT lands exactly on the dp/4-spaced Wigner frequencies.
    g = psi.grid
    n = g.n_points
    padded = np.zeros(4 * n, dtype=np.complex128)
    padded[:n] = psi.amplitudes
    freqs = sfft.fft(padded)
    p_fine = 2.0 * np.pi * g.hbar * sfft.fftfreq(4 * n, d=g.dx)
    phase = np.exp(-1j * p_fine * g.x_min / g.hbar)
    tilde = sfft.fftshift(phase * freqs) * (g.dx / np.sqrt(2.0 * np.pi * g.hbar))
    # central 2n frequencies cover the Wigner span
    return np.abs(tilde[n : 3 * n]) ** 2


def wigner_transform(psi: Wavefunction, check_aliasing: bool = True) -> WignerFunction:
    """Wigner function of a position-space state.

    With check_aliasing, verifies both marginals against |psi|^2 and |psi~|^2
    and raises if the mismatch exceeds the tolerance (momentum support too
    close to the grid's Nyquist edge).
    """
    if psi.representation != "position":
        raise ValueError("wigner_transform expects the position representation")
    g = psi.grid
    n = g.n_points
    m = 2 * n
    padded = np.zeros(3 * n, dtype=np.complex128)
    padded[n : 2 * n] = psi.amplitudes
    lags = np.rint(sfft.fftfreq(m) * m).astype(np.intp)  # fft-ordered lag indices
    rows = n + np.arange(n, dtype=np.intp)[:, None]
    corr = np.conj(padded[rows + lags[None, :]]) * padded[rows - lags[None, :]]
    w = sfft.ifft(corr, axis=1)
    values = w.real * (m * g.dx / (np.pi * g.hbar))
    imag_residue = float(np.abs(w.imag).max() * (m * g.dx / (np.pi * g.hbar)))
    values = np.ascontiguousarray(sfft.fftshift(values, axes=1))
    p = np.pi * g.hbar / (m * g.dx) * (np.arange(m) - n)
    wf = WignerFunction(values, g.x.copy(), p, g.hbar)
    if check_aliasing:
        if imag_residue > 1e-9:
            raise ValueError(f"Wigner imaginary residue {imag_residue:.2e} too large")
        pos_err = float(np.abs(wf.marginal_x() - np.abs(psi.amplitudes) ** 2).sum() * g.dx)
        mom_err = float(
            np.abs(wf.marginal_p() - _momentum_density_on_wigner_grid(psi)).sum() * wf.dp
        )
        if pos_err > MARGINAL_TOL or mom_err > MARGINAL_TOL:
            raise ValueError(
                f"Wigner marginal mismatch (x: {pos_err:.2e}, p: {mom_err:.2e}); "
                "momentum support is probably aliased on this grid"
            )
    return wf


def wigner_overlap(w1: WignerFunction, w2: WignerFunction) -> float:
    """Phase-space overlap 2*pi*hbar int W1 W2 dx dp."""
    if w1.values.shape != w2.values.shape or not (
        np.array_equal(w1.x, w2.x) and np.array_equal(w1.p, w2.p)
    ):
        raise ValueError("Wigner functions live on different grids")
    return float(2.0 * np.pi * w1.hbar * np.sum(w1.values * w2.values) * w1.dx * w1.dp)


@dataclass(frozen=True)
class SparseCatSpec:
    """Superposition of sparse coherent Gaussians at the given (x, p) centers."""

    centers: tuple
    hbar: float

    def __post_init__(self):
        object.__setattr__(
            self, "centers", tuple((float(x), float(p)) for x, p in self.centers)
        )
        if len(self.centers) < 1:
            raise ValueError("need at least one center")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def count(self) -> int:
        return len(self.centers)

    def min_separation(self) -> float:
        if self.count == 1:
            return np.inf
        c = np.asarray(self.centers)
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        return float(d[np.triu_indices(self.count, 1)].min())

    def max_separation(self) -> float:
        if self.count == 1:
            return 0.0
        c = np.asarray(self.centers)
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        return float(d.max())


def sparse_cat_state(spec: SparseCatSpec, grid: SpatialGrid, sparseness: float = 5.0) -> Wavefunction:
    """Normalized sum of Gaussians exp(-(x-xj)^2/(2 hbar)) exp(i pj x/hbar).

    Each component has coherent-state widths sqrt(hbar/2) in both x and p;
    centers must be mutually separated by at least sparseness*sqrt(hbar).
    """
    if grid.hbar != spec.hbar:
        raise ValueError("grid and cat spec disagree on hbar")
    root_h = np.sqrt(spec.hbar)
    if spec.min_separation() < sparseness * root_h:
        raise ValueError(
            f"cat centers too close: min separation {spec.min_separation():.3f} "
            f"< {sparseness}*sqrt(hbar) = {sparseness * root_h:.3f}"
        )
    sigma = np.sqrt(spec.hbar / 2.0)
    x = grid.x
    psi = np.zeros(grid.n_points, dtype=np.complex128)
    for xj, pj in spec.centers:
        if xj - 6 * sigma < grid.x_min or xj + 6 * sigma > grid.x_max:
            raise ValueError(f"cat component at x={xj} clipped by the grid")
        psi += np.exp(-((x - xj) ** 2) / (2.0 * spec.hbar) + 1j * pj * x / spec.hbar)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return Wavefunction(grid, psi, "position")


def displace_momentum(psi: Wavefunction, delta_p: float) -> Wavefunction:
    """Phase-space displacement by delta_p in momentum (phase ramp)."""
    amps = psi.amplitudes * np.exp(1j * delta_p * psi.grid.x / psi.grid.hbar)
    return Wavefunction(psi.grid, amps, "position")


@dataclass(frozen=True)
class CatOverlapReport:
    """Where the self-overlap of a sparse cat lives, and what displacement does."""

    n_components: int
    total_self_overlap: float
    direct_share: float
    interference_share: float
    unassigned_share: float
    displacement: float
    displaced_overlap: float


def cat_overlap_experiment(
    spec: SparseCatSpec,
    displacement: float,
    grid: SpatialGrid,
    mask_radius_factor: float = 3.0,
    decompose: bool = True,
) -> CatOverlapReport:
    """Decompose the cat's self-overlap into direct and interference parts and
    measure the overlap with a momentum-displaced copy.

    The decomposition masks phase-space disks of radius
    mask_radius_factor*sqrt(hbar) around each Gaussian center (direct) and
    each pairwise midpoint (interference); the disks must be disjoint.
    The displacement must sit between the finest fringe scale hbar/d_max and
    the packet size sqrt(hbar).
    """
    root_h = np.sqrt(spec.hbar)
    d_max = spec.max_separation()
    if (
        displacement != 0.0
        and spec.count > 1
        and not (spec.hbar / d_max <= abs(displacement) <= root_h)
    ):
        raise ValueError(
            f"displacement {displacement} outside validity window "
            f"[{spec.hbar / d_max:.4f}, {root_h:.4f}]"
        )
    psi = sparse_cat_state(spec, grid)
    w = wigner_transform(psi)
    total = wigner_overlap(w, w)

    direct = interference = unassigned = np.nan
    if decompose:
        radius = mask_radius_factor * root_h
        direct_centers = list(spec.centers)
        mid_centers = [
            (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
            for i, a in enumerate(spec.centers)
            for b in spec.centers[i + 1 :]
        ]
        _require_disjoint(direct_centers + mid_centers, 2 * radius)
        weight = 2.0 * np.pi * spec.hbar * w.dx * w.dp
        wsq = w.values**2
        direct = weight * sum(_disk_sum(wsq, w, c, radius) for c in direct_centers) / total
        interference = (
            weight * sum(_disk_sum(wsq, w, c, radius) for c in mid_centers) / total
            if mid_centers
            else 0.0
        )
        unassigned = 1.0 - direct - interference

    displaced = float(_shifted_self_overlaps(w, np.array([displacement]))[0])
    return CatOverlapReport(
        n_components=spec.count,
        total_self_overlap=total,
        direct_share=float(direct),
        interference_share=float(interference),
        unassigned_share=float(unassigned),
        displacement=displacement,
        displaced_overlap=displaced,
    )


def displaced_cat_overlaps(
    spec: SparseCatSpec, displacements, grid: SpatialGrid
) -> np.ndarray:
    """Overlap of the cat's Wigner function with momentum-displaced copies.

    Uses displacement covariance: a momentum displacement is an exact shift
    of W along p, so one transform serves every displacement.  Displacements
    are snapped to the Wigner momentum grid (spacing ~ pi*hbar/(2*n*dx))."""
    psi = sparse_cat_state(spec, grid)
    w = wigner_transform(psi)
    return _shifted_self_overlaps(w, np.asarray(displacements, dtype=float))


def _shifted_self_overlaps(w: WignerFunction, displacements: np.ndarray) -> np.ndarray:
    out = np.empty(len(displacements))
    weight = 2.0 * np.pi * w.hbar * w.dx * w.dp
    for i, delta in enumerate(displacements):
        cells = abs(int(round(delta / w.dp)))
        if cells == 0:
            out[i] = weight * np.sum(w.values**2)
        else:
            out[i] = weight * np.sum(w.values[:, cells:] * w.values[:, :-cells])
    return out


def _require_disjoint(centers, min_dist):
    c = np.asarray(centers)
    if len(c) > 1:
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        closest = d[np.triu_indices(len(c), 1)].min()
        if closest < min_dist:
            raise ValueError(
                f"masking regions overlap (closest {closest:.3f} < {min_dist:.3f}); "
                "spread the cat centers further apart"
            )


def _disk_sum(wsq: np.ndarray, w: WignerFunction, center, radius: float) -> float:
    cx, cp = center
    mask = (w.x[:, None] - cx) ** 2 + (w.p[None, :] - cp) ** 2 <= radius**2
    return float(wsq[mask].sum())


def scattered_cat_centers(
    n: int,
    hbar: float,
    min_separation: float,
    seed: int = 0,
    half_x: float | None = None,
    half_p: float | None = None,
    region_min_dist: float | None = None,
) -> tuple:
    """Deterministic pseudo-random cat centers with guaranteed separation.

    Rejection-samples centers in the phase-space box [-half_x, half_x] x
    [-half_p, half_p] until all pairwise separations exceed min_separation.
    With region_min_dist set, additionally requires every pair among the
    centers AND their midpoints to be that far apart, so the overlap
    decomposition's masking disks are disjoint.  Positions are spread widely
    so a momentum displacement scrambles the component phases.
    """
    rng = np.random.default_rng(seed)
    root_h = np.sqrt(hbar)
    if half_x is None:
        half_x = 2.2 * max(np.sqrt(n), 2.0) * min_separation
    if half_p is None:
        # momentum extent stays modest so the Wigner span of a reasonable x
        # grid covers the state; position diversity does the phase scrambling
        half_p = min(10 * root_h, 0.5 * half_x)
    for _ in range(200_000):
        xs = rng.uniform(-half_x, half_x, n)
        ps = rng.uniform(-half_p, half_p, n)
        c = np.stack([xs, ps], axis=1)
        if n == 1:
            return tuple(map(tuple, c))
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        if d[np.triu_indices(n, 1)].min() < min_separation:
            continue
        if region_min_dist is not None:
            mids = 0.5 * (c[:, None, :] + c[None, :, :])
            regions = np.concatenate([c, mids[np.triu_indices(n, 1)]])
            rd = np.sqrt(((regions[:, None, :] - regions[None, :, :]) ** 2).sum(-1))
            if rd[np.triu_indices(len(regions), 1)].min() < region_min_dist:
                continue
        return tuple(map(tuple, c))
    raise RuntimeError("could not place cat centers; box too small for the separation")


def export_wigner(w: WignerFunction, path) -> None:
    """Dense binary export (npz) for the figure pipeline."""
    np.savez_compressed(path, values=w.values, x=w.x, p=w.p, hbar=w.hbar)
