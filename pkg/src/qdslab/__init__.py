"""qdslab: quasifree Lindblad / Wigner-Fokker-Planck-Poisson laboratory."""

from .grids import SpatialGrid, VelocityGrid, dual_velocity_grid
from .model import (
    DiffusionForm,
    InvalidDiffusionError,
    LindbladModel,
    V1Spec,
    ValidityReport,
    check_lindblad_condition,
    diffusion_to_lindblad,
    lindblad_to_diffusion,
    required_mu,
)
from .states import (
    DensityState,
    WignerGrid,
    coherent_state,
    energy_norm,
    harmonic_ground_state,
    inverse_wigner,
    particle_density,
    random_mixed_state,
    spectral_diagnostics,
    wigner_transform,
)
from .mollify import MollifierPair, convolution_multiplier_norm, mollify_truncate
from .hartree import (
    EnergyReport,
    GronwallReport,
    HartreeField,
    energy_functionals,
    field_energy,
    gronwall_monitor,
    hartree_field,
    lieb_thirring_ratio,
    solve_poisson,
)
from .propagator import (
    BlowUpError,
    MomentState,
    SimulationPlan,
    Trajectory,
    simulate,
    step_diffusion,
    step_potential,
    step_transport,
    wigner_moments,
)
from .fock import (
    FockTruncation,
    Superoperator,
    build_diffusion_generator,
    build_fock,
    build_generator,
    choi_cp_check,
    moment_odes,
    propagate,
)

__version__ = "0.1.0"
