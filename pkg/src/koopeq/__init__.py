"""Equivariant Koopman surrogate models of 1-D periodic PDEs.

Simulate the Kuramoto-Sivashinsky equation spectrally, extract windowed and
delay-embedded measurements, fit shared local Koopman matrices that exploit
translation equivariance, couple them via control inputs or project-then-lift
averaging, and evaluate spectra and prediction errors.
"""

from .analysis import (
    ErrorReport,
    SpectrumComparison,
    boundary_jump_excess,
    compare_spectra,
    one_step_error,
    pool_datasets,
    rollout_error,
    split_dataset,
    traveling_wave_frequency,
)
from .errors import ConfigError, DivergenceError, KoopeqError, UndefinedFrequencyError
from .koopman import (
    CoupledLocalModel,
    Dictionary,
    KoopmanModel,
    Spectrum,
    edmd_fit,
    fit_dmdc_local,
    fit_global,
    fit_local,
    full_state_map,
    lift,
    predict_rollout,
    project,
    spectrum,
    tile_global,
)
from .observe import (
    EmbeddedDataset,
    Kernel,
    ObservationMap,
    box_counting_dim,
    build_dataset,
    convolve_observe,
    default_eps_grid,
    fourier_observe,
    min_embedding_dim,
    shift_field,
    shift_trajectory,
    window_delay_observe,
)
from .pde import (
    GridField,
    SimConfig,
    Trajectory,
    advect_exact,
    advect_trajectory,
    initial_state,
    integrate_ks,
    ks_rhs,
    spectral_derivative,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
