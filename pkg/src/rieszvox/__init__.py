"""Voxel-set laboratory for a sharp trilinear convolution inequality and its
near-equality stability: exact lattice evaluation of the form, symmetrizations,
ellipsoid fitting, and perturbation sweeps."""

__version__ = "0.1.0"

from .admissibility import (
    AdmissibilityReport,
    measure_margin,
    radius_margin,
    set_triple_margin,
    slice_margin_profile,
)
from .ellipsoid import (
    Ellipsoid,
    HomotheticFit,
    IntervalFit,
    affine_regress_centers,
    center_compatibility,
    fit_ellipsoid_moments,
    fit_homothetic_triple,
    fit_interval_1d,
    slice_center_field,
)
from .functional import (
    DeficitReport,
    RadiusTriple,
    deficit,
    lambda_1,
    lambda_d,
    strong_triangle_rho,
    superadditivity_gap,
    theta,
    theta_bound_check,
    trilinear_corner_counts,
    trilinear_form,
    trilinear_form_direct,
    unit_ball_volume,
)
from .grid import (
    AffineMapTriple,
    SetTriple,
    VoxelSet,
    boolean,
    from_cells,
    generate,
    load,
    measure,
    permute_axes,
    rasterize_affine_image,
    rasterize_ellipsoid,
    reflect,
    save,
    symmetric_difference_measure,
    translate_cells,
    upscale_integer,
)
from .symmetrize import (
    LayerDecomposition,
    ball_symmetrize,
    double_symmetrize,
    dyadic_layers,
    normalize_special_dilation,
    schwarz_symmetrize,
    steiner_symmetrize,
)
from .sweep import (
    SweepConfig,
    SweepRecord,
    apply_family,
    read_csv,
    render_svg,
    run_sweep,
    spearman_delta_epsilon,
    write_csv,
)
