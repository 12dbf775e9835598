"""Continual memory on Gaussian-mixture protocol grids.

A day's knowledge is a Gaussian mixture; memory is a piecewise-linear
path of mixtures over [0, 1] held at L + 1 nodes. Each day the path is
compressed, the new day appended at t = 1, and the result rebinned back
to L + 1 nodes. Old days are replayed by evaluating the path at their
geometrically contracting readout times, and recall quality is scored
against an amnesia baseline. The dynamics module reconstructs the
drift of the time-dependent mixture so replay can also be run as an SDE.
"""

from .dynamics import (
    PathSlice,
    Trajectory,
    drift,
    drift_with_stats,
    fp_residual,
    integrate_sde,
    movie_frames,
    path_slice,
    poisson_psi_grad,
    psi_potential,
    sample_bulk_points,
    shape_current,
)
from .errors import ConfigError, NumericalError
from .gm import (
    DENSITY_FLOOR,
    GaussianMixture,
    Moments,
    convex_combine,
    validate,
    validate_arrays,
)
from .harness import (
    RunConfig,
    RunResult,
    SweepResult,
    capacity_diagnostics,
    build_final_state,
    export,
    fifo_baseline,
    restore_state,
    resume_run,
    run_experiment,
    snapshot_state,
    sweep,
)
from .metrics import (
    AgeCurve,
    ForgettingRecord,
    age_curve,
    amnesia_baseline,
    channel_shares,
    day_records,
    decomposed_forgetting,
    forgetting_matrix,
    half_life,
    match_components,
    normalized_forgetting,
    raw_forgetting,
)
from .protocol import (
    AugmentedGrid,
    MemoryState,
    ProtocolGrid,
    RebinMatrix,
    add,
    compress,
    eval_at,
    incorporate,
    init_protocol,
    memory_footprint,
    new_memory,
    readout_time,
    rebin_matrix,
    replay,
    smooth,
    smooth_via_matrix,
)
from .streams import (
    StreamConfig,
    class_prior,
    default_prior,
    generate,
    load_gm_file,
    make_config,
    save_gm_file,
    synthetic_class_mixture,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
