"""Experiment configuration, sweep orchestration, and CSV emission.

A sweep runs the fork protocol over a list of preparation times and records,
per T, the quantum decoherence time (first crossing of the overlap below the
threshold), the bound's crossing of the same threshold, the fringe scales of
the forked state, and optionally the classical decoherence time with a
resolution-convergence flag.  All outputs are deterministic: parallel sweep
points write to preassigned slots and serialization is single-threaded in
T order, so identical configs produce byte-identical CSVs.
"""
from __future__ import annotations

import configparser
import hashlib
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np
import scipy.stats

from .classical import (
    InitialGaussianDensity,
    SupportEscapeError,
    classical_overlap_with_convergence,
    estimate_support_box,
)
from .grids import SpatialGrid, Wavefunction, gaussian_wavepacket
from .hamiltonian import DrivenHamiltonian
from .propagator import EvolutionSchedule, OverlapSeries, StateEscapeError, evolve_fork

DEFAULT_PREPARATION_TIMES = (2.0, 4.0, 7.0, 10.0, 13.0, 16.0, 19.0, 22.0, 25.0, 28.0, 31.0, 34.0, 37.0, 40.0)

SWEEP_COLUMNS = ("T", "tau_d_q", "tau_d_c", "tau_lb", "delta_x", "delta_p", "mean_delta_v", "converged_flag")

# coarse stride and horizon of the classical tau march; the 0.9-crossing is
# refined by extra samples inside the bracketing interval
CLASSICAL_TAU_STRIDE = 0.5
CLASSICAL_TAU_CAP = 30.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Full reproducibility record for a sweep; defaults reproduce the
    driven-Hamiltonian setup at the calibrated scales."""

    # hamiltonian
    m: float = 1.0
    kappa: float = 0.36
    l: float = 3.8
    a: float = 0.01
    epsilon: float = 0.5
    # quantum scales and grid
    hbar: float = 0.1
    n_points: int = 4096
    x_min: float = -60.0
    x_max: float = 60.0
    # initial state (center calibrated just outside the outermost island)
    x0: float = 9.9
    p0: float = 0.35
    sigma_x: float | None = None  # None -> minimum-uncertainty sqrt(hbar/2)
    # evolution
    dt: float = 0.005
    sample_every: float = 0.1
    tau_max: float = 200.0
    stop_overlap: float = 0.5
    # classical
    classical_resolution: int = 512
    classical_t_max: float = 20.0
    # sweep
    preparation_times: tuple = DEFAULT_PREPARATION_TIMES
    threshold: float = 0.9
    # run
    workers: int = 1
    seed: int = 0
    out_dir: str = "results"

    def __post_init__(self):
        if self.sigma_x is None:
            object.__setattr__(self, "sigma_x", float(np.sqrt(self.hbar / 2.0)))
        object.__setattr__(self, "preparation_times", tuple(float(t) for t in self.preparation_times))
        if not self.preparation_times:
            raise ValueError("preparation_times must be nonempty")
        if list(self.preparation_times) != sorted(self.preparation_times):
            raise ValueError("preparation_times must be sorted")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.n_points, self.x_min, self.x_max, self.hbar)

    def hamiltonian(self) -> DrivenHamiltonian:
        return DrivenHamiltonian(self.m, self.kappa, self.l, self.a, self.epsilon)

    def initial_state(self, grid: SpatialGrid | None = None) -> Wavefunction:
        return gaussian_wavepacket(grid or self.grid(), self.x0, self.p0, self.sigma_x)

    def initial_density(self) -> InitialGaussianDensity:
        return InitialGaussianDensity(
            self.x0, self.p0, self.sigma_x, self.hbar / (2.0 * self.sigma_x)
        )

    def schedule(self, T: float) -> EvolutionSchedule:
        return EvolutionSchedule(T=T, tau_max=self.tau_max, dt=self.dt, sample_every=self.sample_every)


_CONFIG_SCHEMA = {
    "hamiltonian": {"m": float, "kappa": float, "l": float, "a": float, "epsilon": float},
    "quantum": {"hbar": float, "n_points": int, "x_min": float, "x_max": float},
    "initial_state": {"x0": float, "p0": float, "sigma_x": float},
    "evolution": {"dt": float, "sample_every": float, "tau_max": float, "stop_overlap": float},
    "classical": {"classical_resolution": int, "classical_t_max": float},
    "sweep": {"preparation_times": "floats", "threshold": float},
    "run": {"workers": int, "seed": int, "out_dir": str},
}


def load_config(path) -> ExperimentConfig:
    """Parse a key = value config file with sections; unknown keys are errors."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh, source=str(path))
    kwargs = {}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ValueError(f"{path}: unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _CONFIG_SCHEMA[section]:
                raise ValueError(f"{path}: unknown key '{key}' in section [{section}]")
            kind = _CONFIG_SCHEMA[section][key]
            try:
                if kind == "floats":
                    value = tuple(float(tok) for tok in raw.replace(",", " ").split())
                elif kind is str:
                    value = raw.strip()
                else:
                    value = kind(raw)
            except ValueError as exc:
                raise ValueError(f"{path}: bad value for '{key}': {raw!r}") from exc
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def save_config(config: ExperimentConfig, path) -> None:
    """Write the full resolved config; load_config(save_config(c)) == c."""
    parser = configparser.ConfigParser()
    for section, keys in _CONFIG_SCHEMA.items():
        parser[section] = {}
        for key in keys:
            value = getattr(config, key)
            if key == "preparation_times":
                parser[section][key] = ", ".join(repr(t) for t in value)
            elif isinstance(value, float):
                parser[section][key] = repr(value)
            else:
                parser[section][key] = str(value)
    with open(path, "w") as fh:
        parser.write(fh)


def config_hash(config: ExperimentConfig) -> str:
    """Short content hash used to stamp CSV outputs for provenance."""
    blob = repr([(f.name, getattr(config, f.name)) for f in fields(config)]).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class SweepRecord:
    T: float
    tau_d_quantum: float | None = None
    tau_d_classical: float | None = None
    tau_lower_bound: float | None = None
    delta_x_fringe: float = float("nan")
    delta_p_fringe: float = float("nan")
    mean_delta_v: float = float("nan")
    converged: bool = False


def extract_decoherence_time(series, threshold: float = 0.9, start_tol: float = 1e-6):
    """First time the series crosses below threshold, linearly interpolated.

    Accepts an OverlapSeries or a (times, values) pair.  Returns None when no
    crossing occurs within the horizon.  start_tol bounds how far the first
    sample may sit from the exact normalization O(0) = 1 (classical series
    carry quadrature noise there).
    """
    if isinstance(series, OverlapSeries):
        times, values = series.times, series.overlap
    else:
        times, values = series
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if len(values) == 0 or abs(values[0] - 1.0) > start_tol:
        raise ValueError("malformed series: must start at 1")
    below = np.nonzero(values < threshold)[0]
    if len(below) == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(times[0])
    t0, t1 = times[k - 1], times[k]
    v0, v1 = values[k - 1], values[k]
    return float(t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0))


def mean_delta_v_over_decay(series: OverlapSeries, tau_d: float | None) -> float:
    """Time average of the perturbation spread over the decoherence process."""
    times, dv = series.times, series.delta_v
    if tau_d is not None and tau_d > times[0]:
        keep = times <= tau_d
        times, dv = times[keep], dv[keep]
    if len(times) < 2:
        return float(dv[0])
    return float(np.trapezoid(dv, times) / (times[-1] - times[0]))


def _quantum_point(config: ExperimentConfig, T: float) -> SweepRecord:
    grid = config.grid()
    psi0 = config.initial_state(grid)
    series = evolve_fork(psi0, config.hamiltonian(), config.schedule(T), stop_overlap=config.stop_overlap)
    tau_d = extract_decoherence_time(series, config.threshold)
    tau_lb = extract_decoherence_time((series.times, series.bound), config.threshold)
    return SweepRecord(
        T=T,
        tau_d_quantum=tau_d,
        tau_lower_bound=tau_lb,
        delta_x_fringe=config.hbar / series.spread_p,
        delta_p_fringe=config.hbar / series.spread_x,
        mean_delta_v=mean_delta_v_over_decay(series, tau_d),
    )


def _quantum_point_safe(args) -> SweepRecord:
    config, T = args
    try:
        return _quantum_point(config, T)
    except StateEscapeError:
        return SweepRecord(T=T)


def run_quantum_sweep(config: ExperimentConfig, workers: int | None = None) -> list[SweepRecord]:
    """Fork runs over all preparation times; per-T failures leave empty records."""
    workers = workers if workers is not None else config.workers
    jobs = [(config, T) for T in config.preparation_times]
    if workers <= 1 or len(jobs) == 1:
        return [_quantum_point_safe(job) for job in jobs]
    records: list[SweepRecord | None] = [None] * len(jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for idx, rec in enumerate(pool.map(_quantum_point_safe, jobs)):
            records[idx] = rec
    return records  # type: ignore[return-value]


def classical_overlap_series(
    config: ExperimentConfig, T: float
) -> tuple[np.ndarray, np.ndarray, bool]:
    """O_c(tau) sampled until it drops below the threshold (plus refinement).

    Returns (taus, values, converged); converged is False as soon as any
    sample fails the 2x-refinement check or a density escapes its box.
    """
    h = config.hamiltonian()
    hp, hm = h.with_branch("plus"), h.with_branch("minus")
    dens = config.initial_density()
    res = config.classical_resolution
    t_idx = config.preparation_times.index(T) if T in config.preparation_times else -1
    converged = True

    def sample(tau: float) -> float:
        nonlocal converged
        t = T + tau
        rng = np.random.default_rng([config.seed, t_idx + 1, int(round(tau * 1000))])
        box = estimate_support_box(hp, hm, dens, t, dt=config.dt, fork_time=T, rng=rng)
        value, ok = classical_overlap_with_convergence(
            box, res, t, hp, hm, dens, config.hbar, dt=config.dt, fork_time=T
        )
        converged = converged and ok
        return value

    taus = [0.0]
    values = [sample(0.0)]
    while values[-1] >= config.threshold and taus[-1] < CLASSICAL_TAU_CAP:
        taus.append(taus[-1] + CLASSICAL_TAU_STRIDE)
        values.append(sample(taus[-1]))
    if values[-1] < config.threshold and len(taus) > 1:
        lo, hi = taus[-2], taus[-1]
        for tau in np.linspace(lo, hi, 6)[1:-1]:
            taus.append(float(tau))
            values.append(sample(float(tau)))
    order = np.argsort(taus)
    return np.asarray(taus)[order], np.asarray(values)[order], converged


def run_classical_sweep(config: ExperimentConfig) -> list[SweepRecord]:
    """Classical decoherence times for preparation times up to classical_t_max.

    Points that fail the resolution-convergence check or whose density escapes
    the quadrature box are flagged unconverged, never fabricated.
    """
    records = []
    for T in config.preparation_times:
        if T > config.classical_t_max:
            records.append(SweepRecord(T=T, converged=False))
            continue
        try:
            taus, values, converged = classical_overlap_series(config, T)
            tau_d = extract_decoherence_time((taus, values), config.threshold, start_tol=0.02)
        except SupportEscapeError:
            records.append(SweepRecord(T=T, converged=False))
            continue
        records.append(SweepRecord(T=T, tau_d_classical=tau_d, converged=converged))
    return records


def merge_sweeps(quantum: list[SweepRecord], classical: list[SweepRecord] | None) -> list[SweepRecord]:
    """Join quantum and classical records on T (classical side optional)."""
    by_t = {r.T: r for r in classical or []}
    merged = []
    for q in quantum:
        c = by_t.get(q.T)
        if c is None:
            merged.append(q)
        else:
            merged.append(replace(q, tau_d_classical=c.tau_d_classical, converged=c.converged))
    return merged


@dataclass(frozen=True)
class FringeStudy:
    """tau_D versus the momentum fringe scale, with the small-scale linear fit."""

    delta_p: np.ndarray
    tau_d: np.ndarray
    used_in_fit: np.ndarray
    slope: float
    intercept: float
    r_value: float


def run_fringe_study(records: list[SweepRecord], n_excluded: int = 3) -> FringeStudy:
    """Least-squares line over the small-fringe subset (the n_excluded largest
    fringe scales are left out of the fit)."""
    usable = [
        r
        for r in records
        if r.tau_d_quantum is not None and np.isfinite(r.delta_p_fringe)
    ]
    if len(usable) < 5:
        raise ValueError(f"fringe study needs at least 5 usable records, got {len(usable)}")
    usable.sort(key=lambda r: r.delta_p_fringe)
    dp = np.array([r.delta_p_fringe for r in usable])
    td = np.array([r.tau_d_quantum for r in usable])
    used = np.ones(len(usable), dtype=bool)
    if n_excluded > 0:
        used[-n_excluded:] = False
    fit = scipy.stats.linregress(dp[used], td[used])
    return FringeStudy(dp, td, used, float(fit.slope), float(fit.intercept), float(fit.rvalue))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and not np.isfinite(value):
        return ""
    return f"{value:.12g}"


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_csv(records: list[SweepRecord], path, config: ExperimentConfig | None = None) -> None:
    """Sweep records as CSV with the exact column contract, written atomically."""
    lines = []
    if config is not None:
        lines.append(f"# config_hash={config_hash(config)}")
    lines.append(",".join(SWEEP_COLUMNS))
    for r in records:
        lines.append(
            ",".join(
                [
                    _format(r.T),
                    _format(r.tau_d_quantum),
                    _format(r.tau_d_classical),
                    _format(r.tau_lower_bound),
                    _format(r.delta_x_fringe),
                    _format(r.delta_p_fringe),
                    _format(r.mean_delta_v),
                    "1" if r.converged else "0",
                ]
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path) -> list[SweepRecord]:
    """Inverse of export_csv."""
    with open(path) as fh:
        rows = [line.rstrip("\n") for line in fh if not line.startswith("#")]
    header = rows[0].split(",")
    if tuple(header) != SWEEP_COLUMNS:
        raise ValueError(f"unexpected sweep CSV header {header}; expected {list(SWEEP_COLUMNS)}")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        vals = row.split(",")
        opt = lambda s: None if s == "" else float(s)
        num = lambda s: float("nan") if s == "" else float(s)
        records.append(
            SweepRecord(
                T=float(vals[0]),
                tau_d_quantum=opt(vals[1]),
                tau_d_classical=opt(vals[2]),
                tau_lower_bound=opt(vals[3]),
                delta_x_fringe=num(vals[4]),
                delta_p_fringe=num(vals[5]),
                mean_delta_v=num(vals[6]),
                converged=vals[7] == "1",
            )
        )
    return records


def export_series_csv(series: OverlapSeries, path, config: ExperimentConfig | None = None,
                      classical: tuple[np.ndarray, np.ndarray] | None = None) -> None:
    """Single-run time series (tau, O_q, dV, phi, bound, and optionally O_c)."""
    lines = []
    if config is not None:
        lines.append(f"# config_hash={config_hash(config)}")
    lines.append("tau,overlap_q,delta_v,phi,bound,overlap_c")
    cmap = {}
    if classical is not None:
        cmap = {round(float(t), 9): float(v) for t, v in zip(*classical)}
    for k in range(len(series.times)):
        oc = cmap.get(round(float(series.times[k]), 9))
        lines.append(
            ",".join(
                [
                    _format(float(series.times[k])),
                    _format(float(series.overlap[k])),
                    _format(float(series.delta_v[k])),
                    _format(float(series.phi[k])),
                    _format(float(series.bound[k])),
                    _format(oc),
                ]
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def export_poincare_csv(cloud, path, config: ExperimentConfig | None = None) -> None:
    lines = []
    if config is not None:
        lines.append(f"# config_hash={config_hash(config)}")
    lines.append("seed_id,n,x,p")
    for sid, n, x, p in zip(cloud.seed_id, cloud.n, cloud.x, cloud.p):
        lines.append(f"{sid},{n},{_format(float(x))},{_format(float(p))}")
    _atomic_write(path, "\n".join(lines) + "\n")


def export_fringe_csv(study: FringeStudy, path, config: ExperimentConfig | None = None) -> None:
    lines = []
    if config is not None:
        lines.append(f"# config_hash={config_hash(config)}")
    lines.append(f"# fit_slope={study.slope:.12g}")
    lines.append(f"# fit_intercept={study.intercept:.12g}")
    lines.append(f"# fit_r={study.r_value:.12g}")
    lines.append("delta_p,tau_d_q,used_in_fit")
    for dp, td, used in zip(study.delta_p, study.tau_d, study.used_in_fit):
        lines.append(f"{_format(float(dp))},{_format(float(td))},{1 if used else 0}")
    _atomic_write(path, "\n".join(lines) + "\n")
