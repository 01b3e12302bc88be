"""Thresholding dynamics for interface motion on periodic grids."""

from .diagnostics import (
    GOOD_ITERATION_BAND,
    LagrangeScalingReport,
    LedgerReport,
    MonotonicityCheck,
    StepRecord,
    TestVectorField,
    TightnessReport,
    approx_monotonicity_check,
    constant_vector_field,
    dissipation_multiphase,
    dissipation_two_phase,
    energy_multiphase,
    energy_two_phase,
    euler_lagrange_residual,
    euler_lagrange_residual_forced,
    euler_lagrange_residual_grain_growth,
    first_variation_dissipation,
    first_variation_dissipation_multiphase,
    first_variation_energy,
    first_variation_energy_multiphase,
    lagrange_scaling,
    ledger_check,
    linearized_energy,
    phase_difference,
    radial_bump_field,
    state_difference,
    tightness_monitor,
)
from .grid import (
    DegeneratePhaseError,
    EmptyPhaseError,
    Grid,
    MultiPhaseState,
    PhaseField,
    RealField,
    bounding_radius,
    centroid,
    random_blob,
    rasterize_ball,
    rasterize_half_space,
    rasterize_slab,
    volume,
    voronoi_labels,
)
from .kernel import (
    HeatKernelPlan,
    ResolutionWarning,
    convolve,
    grad_convolve,
    spectral_divergence,
)
from .oracles import (
    ExtinctionError,
    TwoBallSolution,
    circle_mcf,
    forced_ball,
    junction_angles,
    solve_two_ball_vp,
    two_ball_vp,
)
from .schemes import (
    SCHEMES,
    SchemeConfig,
    SurfaceTensionMatrix,
    Trajectory,
    equal_tensions,
    run,
    step_forced,
    step_grain_growth,
    step_mbo,
    step_volume_preserving,
)
from .threshold import SelectionResult, select_bottom_cells, select_top_cells

__all__ = [
    "GOOD_ITERATION_BAND",
    "SCHEMES",
    "DegeneratePhaseError",
    "EmptyPhaseError",
    "ExtinctionError",
    "Grid",
    "HeatKernelPlan",
    "LagrangeScalingReport",
    "LedgerReport",
    "MonotonicityCheck",
    "MultiPhaseState",
    "PhaseField",
    "RealField",
    "ResolutionWarning",
    "SchemeConfig",
    "SelectionResult",
    "StepRecord",
    "SurfaceTensionMatrix",
    "TestVectorField",
    "TightnessReport",
    "Trajectory",
    "TwoBallSolution",
    "approx_monotonicity_check",
    "bounding_radius",
    "centroid",
    "circle_mcf",
    "constant_vector_field",
    "convolve",
    "dissipation_multiphase",
    "dissipation_two_phase",
    "energy_multiphase",
    "energy_two_phase",
    "equal_tensions",
    "euler_lagrange_residual",
    "euler_lagrange_residual_forced",
    "euler_lagrange_residual_grain_growth",
    "first_variation_dissipation",
    "first_variation_dissipation_multiphase",
    "first_variation_energy",
    "first_variation_energy_multiphase",
    "forced_ball",
    "grad_convolve",
    "junction_angles",
    "lagrange_scaling",
    "ledger_check",
    "linearized_energy",
    "phase_difference",
    "radial_bump_field",
    "random_blob",
    "rasterize_ball",
    "rasterize_half_space",
    "rasterize_slab",
    "run",
    "select_bottom_cells",
    "select_top_cells",
    "solve_two_ball_vp",
    "spectral_divergence",
    "state_difference",
    "step_forced",
    "step_grain_growth",
    "step_mbo",
    "step_volume_preserving",
    "tightness_monitor",
    "two_ball_vp",
    "volume",
    "voronoi_labels",
]

__version__ = "0.1.0"
