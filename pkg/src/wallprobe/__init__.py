"""wallprobe: find hidden penetrable obstacles from one reflected scalar wave.

Simulates waves in rough (merely bounded-measurable) background media,
accumulates a decaying time transform of the measurement on a source ball,
compares it against the obstacle-free solution, and reads obstacle
existence, contrast sign, and distance bounds off the transform's
large-rate behavior.
"""

__version__ = "0.1.0"

from .medium import (
    Ball, Box, ConstantField, DISSIPATIVE, EmptyRegion, Grid, Interval,
    Layered1D, MediumSpec, ParseError, PatchField, REFRACTIVE, Region,
    ScalarField, Scenario, ScenarioError, SourceSpec, UnionRegion,
    ValidationError, load_scenario, sample_field, scenario_from_dict,
    truncation_radius,
)
from .wave import (
    CFLError, FinalTimeData, NumericalError, PairResult, SimResult,
    TransformCoeffs, cfl_limit, simulate, simulate_pair, transform_residual,
)
from .elliptic import (
    BoundReport, ContractionReport, ConvergenceError, DiscreteMatch,
    EllipticProblem, Kernel, LayeredMedium1D, comparison_bounds,
    contraction_iteration, convolve_kernel_1d, convolve_kernel_3d,
    kernel_eval, layered_coefficients, layered_leading_order, layered_v,
    layered_v_floats, layered_v_sq_integral, mean_value_ball, phi_growth,
    solve_v,
)
from .indicator import (
    ClassifyError, ClassifyOptions, IndicatorSeries, PipelineResult, Verdict,
    check_envelope, check_identity, classify, indicator_from_fields,
    rate_on_common_window, run_elliptic_pipeline, run_with_reference,
)
from .logspace import LogScalar
