"""Simulation of spatially multimode twin beams and partial detection.

Modules
-------
modes        transverse mode bases on a sampled plane
state        Gaussian amplitude-quadrature model of twin beams
detection    apertures and normalized intensity-difference noises
cavity       confocal length and degeneracy range of a cavity
acquisition  synthetic photocurrent records and block analysis
config, cli  scenario files and the ``twinbeam`` command
"""
from .acquisition import (
    AcquisitionConfig,
    BlockSeries,
    ChannelRecord,
    FitReport,
    IrisSchedule,
    analyze_run,
    calibrate_shot_noise,
    fit_single_mode_line,
    read_block_series,
    read_record,
    synthesize_run,
    write_record,
)
from .cavity import (
    CavityGeometry,
    confocal_length,
    confocality_range,
    degeneracy_overlap,
    is_degenerate,
)
from .detection import (
    Aperture,
    DetectionResult,
    GainSetting,
    detect_partial,
    diff_noise,
    iris_sweep,
    normalized_noises,
    overlap_coefficients,
    whole_beam_noise,
)
from .errors import *  # noqa: F401,F403
from .modes import (
    GridSpec,
    ModeBasis,
    ScalarField,
    adapted_mode,
    basis_change_matrix,
    extend_basis,
    far_field,
    hermite_gauss_mode,
    inner_product,
    orthonormalize,
    ring_mode,
)
from .state import (
    TwinBeamState,
    TwinPairSpec,
    apply_loss,
    coherent_state,
    far_field_state,
    multimode_twin_state,
    single_mode_test,
    transform_state,
    twin_pair_state,
    vacuum_state,
)

__version__ = "0.1.0"
