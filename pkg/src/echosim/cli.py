"""Command-line interface: poincare, evolve, sweep, fringe, oracle, cat."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .classical import (
    InitialGaussianDensity,
    PhaseSpaceBox,
    StretchedGaussianParams,
    overlap_from_backward_maps,
    poincare_section,
    stretch_drift_backward_map,
    stretched_gaussian_overlap,
)
from .grids import build_grid
from .wigner import (
    SparseCatSpec,
    cat_overlap_experiment,
    displaced_cat_overlaps,
    export_wigner,
    scattered_cat_centers,
    sparse_cat_state,
    wigner_transform,
)


def _cat_grid(centers, hbar, n_points: int = 2048):
    extent = max(abs(x) for x, _ in centers) + 4.0
    return build_grid(n_points, -extent, extent, hbar)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echosim",
        description="Overlap-decay experiments for quantum and classical chaotic evolution",
    )
    parser.add_argument("--config", help="config file (key = value with sections)")
    parser.add_argument("--out", help="output directory (default from config)")
    parser.add_argument("--workers", type=int, help="parallel sweep workers")
    parser.add_argument("--seed", type=int, help="seed for pilot-cloud sampling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poincare", help="stroboscopic section CSV (seed_id, n, x, p)")
    p.add_argument("--periods", type=int, default=300)
    p.add_argument("--seeds-x", type=int, default=25, help="lattice seeds along x")
    p.add_argument("--seeds-p", type=int, default=5, help="lattice seeds along p")
    p.add_argument("--x-span", type=float, default=12.0)
    p.add_argument("--p-span", type=float, default=1.0)

    p = sub.add_parser("evolve", help="single-T overlap/bound time series CSV")
    p.add_argument("--T", type=float, required=True, help="preparation time")
    p.add_argument("--classical", action="store_true", help="also compute O_c")

    p = sub.add_parser("sweep", help="decoherence times vs preparation time (CSV)")
    p.add_argument("--skip-classical", action="store_true")

    p = sub.add_parser("fringe", help="tau_D vs momentum fringe scale with fit (CSV)")
    p.add_argument("--sweep-csv", help="reuse an existing sweep CSV")

    p = sub.add_parser("oracle", help="closed-form oracle checks (stretch-drift + cat)")

    p = sub.add_parser("cat", help="sparse-cat overlap decomposition experiment")
    p.add_argument("--n", type=int, default=4, help="number of Gaussian components")
    p.add_argument("--displacement", type=float, help="momentum displacement (default mid-window)")
    p.add_argument("--export-wigner", help="write the cat Wigner function (npz)")
    return parser


def _config_from_args(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    from dataclasses import replace

    updates = {}
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.seed is not None:
        updates["seed"] = args.seed
    return replace(cfg, **updates) if updates else cfg


def _cmd_poincare(cfg, args) -> int:
    seeds = [
        (x, p)
        for x in np.linspace(-args.x_span, args.x_span, args.seeds_x)
        for p in np.linspace(-args.p_span, args.p_span, args.seeds_p)
    ]
    cloud = poincare_section(seeds, args.periods, cfg.hamiltonian(), dt=cfg.dt)
    path = os.path.join(cfg.out_dir, "poincare.csv")
    harness.export_poincare_csv(cloud, path, cfg)
    print(f"wrote {path} ({len(cloud.x)} points, {len(seeds)} seeds, {args.periods} periods)")
    return 0


def _cmd_evolve(cfg, args) -> int:
    series = harness.evolve_fork(
        cfg.initial_state(), cfg.hamiltonian(), cfg.schedule(args.T), stop_overlap=cfg.stop_overlap
    )
    classical = None
    if args.classical:
        taus, values, converged = harness.classical_overlap_series(cfg, args.T)
        classical = (taus, values)
        if not converged:
            print("warning: classical series failed the resolution-convergence check", file=sys.stderr)
    path = os.path.join(cfg.out_dir, f"evolve_T{args.T:g}.csv")
    harness.export_series_csv(series, path, cfg, classical=classical)
    tau_d = harness.extract_decoherence_time(series, cfg.threshold)
    print(f"wrote {path} (tau_D = {tau_d if tau_d is not None else 'none'})")
    return 0


def _cmd_sweep(cfg, args) -> int:
    quantum = harness.run_quantum_sweep(cfg)
    classical = None if args.skip_classical else harness.run_classical_sweep(cfg)
    records = harness.merge_sweeps(quantum, classical)
    path = os.path.join(cfg.out_dir, "sweep.csv")
    harness.export_csv(records, path, cfg)
    done = sum(1 for r in records if r.tau_d_quantum is not None)
    print(f"wrote {path} ({done}/{len(records)} quantum points crossed the threshold)")
    return 0


def _cmd_fringe(cfg, args) -> int:
    sweep_path = args.sweep_csv or os.path.join(cfg.out_dir, "sweep.csv")
    if os.path.exists(sweep_path):
        records = harness.read_csv(sweep_path)
    else:
        records = harness.run_quantum_sweep(cfg)
        harness.export_csv(records, sweep_path, cfg)
    study = harness.run_fringe_study(records)
    path = os.path.join(cfg.out_dir, "fringe.csv")
    harness.export_fringe_csv(study, path, cfg)
    print(
        f"wrote {path} (slope {study.slope:.4g}, intercept {study.intercept:.4g}, "
        f"r {study.r_value:.4f})"
    )
    return 0


def _check(label: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return ok


def _cmd_oracle(cfg, args) -> int:
    ok = True
    # stretch-and-drift flow through the overlap machinery vs the closed form
    hbar = 2.0
    params = StretchedGaussianParams(lam=1.0, sigma=1.0, v=(0.01, 0.0))
    dens = InitialGaussianDensity(0.0, 0.0, 1.0, 1.0)
    worst = 0.0
    for t in np.linspace(0.0, 5.0, 10):
        ex = float(np.exp(params.lam * t))
        cx = params.v[0] * t
        box = PhaseSpaceBox(min(0.0, cx) - 7 / ex, max(0.0, cx) + 7 / ex, -7 * ex, 7 * ex)
        mach = overlap_from_backward_maps(
            stretch_drift_backward_map(params, t, drifting=False),
            stretch_drift_backward_map(params, t, drifting=True),
            dens, box, 512, hbar,
        )
        worst = max(worst, abs(mach - stretched_gaussian_overlap(params, t)))
    ok &= _check("stretch-drift overlap vs closed form", worst < 1e-6, f"worst |diff| {worst:.2e}")

    # sparse-cat decomposition and displacement scaling
    hbar = 0.1
    root_h = float(np.sqrt(hbar))
    centers4 = scattered_cat_centers(4, hbar, 10 * root_h, seed=1, region_min_dist=6.4 * root_h)
    report = cat_overlap_experiment(
        SparseCatSpec(centers4, hbar), 0.4 * root_h, _cat_grid(centers4, hbar)
    )
    share = report.interference_share
    ok &= _check(
        "cat N=4 interference share ~ 3/4",
        abs(share - 0.75) < 0.075,
        f"share {share:.4f}",
    )
    deltas = np.linspace(0.25, 0.7, 8) * root_h
    for n in (2, 4, 8):
        centers = scattered_cat_centers(n, hbar, 10 * root_h, seed=1)
        spec = SparseCatSpec(centers, hbar)
        mean = float(np.mean(displaced_cat_overlaps(spec, deltas, _cat_grid(centers, hbar))))
        ok &= _check(
            f"cat N={n} displaced overlap <= 2/N",
            mean <= 2.0 / n,
            f"mean overlap {mean:.4f} vs {2.0 / n:.4f}",
        )
    return 0 if ok else 1


def _cmd_cat(cfg, args) -> int:
    hbar = cfg.hbar
    root_h = float(np.sqrt(hbar))
    centers = scattered_cat_centers(
        args.n, hbar, 10 * root_h, seed=cfg.seed + 1, region_min_dist=6.4 * root_h
    )
    grid = _cat_grid(centers, hbar)
    spec = SparseCatSpec(centers, hbar)
    displacement = args.displacement if args.displacement is not None else 0.4 * root_h
    report = cat_overlap_experiment(spec, displacement, grid)
    print(f"components:          {report.n_components}")
    print(f"self overlap:        {report.total_self_overlap:.6f}")
    print(f"direct share:        {report.direct_share:.4f}")
    print(f"interference share:  {report.interference_share:.4f}  (expected ~ {1 - 1/args.n:.4f})")
    print(f"unassigned share:    {report.unassigned_share:.4f}")
    print(f"displacement:        {report.displacement:.4f}")
    print(f"displaced overlap:   {report.displaced_overlap:.4f}  (~1/N = {1/args.n:.4f})")
    if args.export_wigner:
        export_wigner(wigner_transform(sparse_cat_state(spec, grid)), args.export_wigner)
        print(f"wrote {args.export_wigner}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        handler = {
            "poincare": _cmd_poincare,
            "evolve": _cmd_evolve,
            "sweep": _cmd_sweep,
            "fringe": _cmd_fringe,
            "oracle": _cmd_oracle,
            "cat": _cmd_cat,
        }[args.command]
        return handler(cfg, args)
    except Exception as exc:
        print(f"echosim {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
