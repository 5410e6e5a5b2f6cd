"""Specular ray tracing, per-path channel quantities and permittivity calibration."""

from .calibration import (
    CalibrationResult,
    DegenerateCalibrationWarning,
    calibrate_permittivity,
    delay_spread_table,
    link_params,
    permittivity_grid,
    simulated_delay_spreads,
)
from .channel import (
    LargeScaleParams,
    Pdp,
    XprModel,
    excess_loss,
    expand_link,
    expand_polarimetric,
    fresnel_coeff,
    fspl,
    fspl_delay,
    delay_kernel,
    hann_kernel,
    large_scale_params,
    mixed_reflection,
    pdp_power,
    synthesize_pdp,
)
from .geometry import (
    Environment,
    Facet,
    GeometryError,
    box_room,
    load_environment,
    parse_environment,
    pillar,
    rectangle,
    vertical_panel,
)
from .tracer import Link, PathGeometry, classify, path_amplitudes, to_mpcs, trace, trace_geometry, trace_link
