"""Sensitivity of quantum and classical chaotic evolution to perturbations.

Simulates a driven one-dimensional Hamiltonian whose evolution forks into two
branches differing by a small linear perturbation, and measures how fast the
branch overlap decays, quantum mechanically (wavefunctions, Wigner functions)
and classically (Liouville densities by backward characteristics), together
with the uncertainty-principle lower bound on the decay.
"""
from .classical import (
    InitialGaussianDensity,
    PhaseSpaceBox,
    PhaseSpacePoint,
    PoincareCloud,
    StretchedGaussianParams,
    SupportEscapeError,
    classical_overlap,
    classical_overlap_with_convergence,
    density_at,
    estimate_support_box,
    flow_map,
    flow_map_batch,
    lyapunov_estimate,
    overlap_from_backward_maps,
    poincare_section,
    stretch_drift_backward_map,
    stretched_gaussian_overlap,
)
from .grids import (
    Moments,
    SpatialGrid,
    Wavefunction,
    build_grid,
    gaussian_wavepacket,
    inner_product,
    moments,
    to_momentum_space,
    to_position_space,
)
from .hamiltonian import DrivenHamiltonian, force_value, perturbation_value, potential_value
from .harness import (
    ExperimentConfig,
    FringeStudy,
    SweepRecord,
    config_hash,
    export_csv,
    extract_decoherence_time,
    load_config,
    merge_sweeps,
    read_csv,
    run_classical_sweep,
    run_fringe_study,
    run_quantum_sweep,
    save_config,
)
from .propagator import (
    EvolutionSchedule,
    FringeScales,
    OverlapSeries,
    StateEscapeError,
    decoherence_bound,
    evolve_fork,
    fringe_scales,
    lower_bound_curve,
    split_operator_step,
)
from .wigner import (
    CatOverlapReport,
    SparseCatSpec,
    WignerFunction,
    cat_overlap_experiment,
    displace_momentum,
    export_wigner,
    scattered_cat_centers,
    sparse_cat_state,
    wigner_overlap,
    wigner_transform,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
