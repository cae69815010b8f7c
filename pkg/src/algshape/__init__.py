"""Sampling and reconstruction of binary shapes with algebraic boundaries.

A binary image whose boundary is the zero level set of a bivariate
polynomial is sampled through shifted B-spline kernels; the polynomial
coefficients are recovered from the samples via moment annihilation, with a
sign-constrained and measurement-consistent refinement cascade under noise.
"""

from .annihilate import (
    AnnihilationSystem,
    POLICY_BALANCED,
    POLICY_FULL,
    build_conventional,
    build_generalized,
    normalize_coordinates,
    rs_pairs,
)
from .bspline import (
    BSplineKernel,
    ClassicalReproduction,
    classical_coefficients,
)
from .estimator import ShapeReconstructor
from .gmfit import (
    GMCoefficients,
    QPProblem,
    build_gm_objective,
    default_init,
    functional_residual,
    load_asset,
    solve_gm,
)
from .metrics import evaluate_reconstruction, psnr_binary
from .moments import (
    GExpansion,
    MomentTable,
    generalized_moments_from_samples,
    moments_from_samples,
    oracle_moments,
)
from .poly2d import (
    BivariatePolynomial,
    ImagePlane,
    ShiftMatrix,
    boundary_points,
    render_shape,
    shift_matrix,
    write_pgm,
    zero_set_distance,
)
from .recover import (
    ForwardModel,
    PipelineOptions,
    RecoveryResult,
    SignConstraintSet,
    infer_signs,
    refine_consistency,
    run_pipeline,
    solve_ls,
    solve_sign_qp,
)
from .sampler import SampleGrid, add_noise, sample_raster, sample_shape, sample_snr
from .shapegen import (
    gen_bezier_shape,
    gen_bounded_quartic,
    gen_conic,
    gen_unbounded_quartic,
)

__version__ = "1.0.0"

__all__ = [
    "AnnihilationSystem",
    "BSplineKernel",
    "BivariatePolynomial",
    "ClassicalReproduction",
    "ForwardModel",
    "GExpansion",
    "GMCoefficients",
    "ImagePlane",
    "MomentTable",
    "POLICY_BALANCED",
    "POLICY_FULL",
    "PipelineOptions",
    "QPProblem",
    "RecoveryResult",
    "SampleGrid",
    "ShapeReconstructor",
    "ShiftMatrix",
    "SignConstraintSet",
    "add_noise",
    "boundary_points",
    "build_conventional",
    "build_generalized",
    "build_gm_objective",
    "classical_coefficients",
    "default_init",
    "evaluate_reconstruction",
    "functional_residual",
    "gen_bezier_shape",
    "gen_bounded_quartic",
    "gen_conic",
    "gen_unbounded_quartic",
    "generalized_moments_from_samples",
    "infer_signs",
    "load_asset",
    "moments_from_samples",
    "normalize_coordinates",
    "oracle_moments",
    "psnr_binary",
    "refine_consistency",
    "render_shape",
    "rs_pairs",
    "run_pipeline",
    "sample_raster",
    "sample_shape",
    "sample_snr",
    "shift_matrix",
    "solve_gm",
    "solve_ls",
    "solve_sign_qp",
    "write_pgm",
    "zero_set_distance",
]
