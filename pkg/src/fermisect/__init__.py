"""Sectorization and momentum-conservation sector counting for strictly
convex Fermi curves."""

from .curve import (
    CurveModel,
    CurvePoint,
    AsymmetryCertificate,
    eval_point,
    antipode,
    project,
    graph_jet,
    asymmetry_order,
    certify,
    antipodal_sum,
    antipodal_sum_critical,
    antipodal_sum_sublevel_length,
)
from .sectorization import (
    Sector,
    Sectorization,
    RectEnclosure,
    build,
    sector_at,
    region_rectangle,
    region_polygon,
    eps_separated_check,
    overlap_map,
)
from .momentum import (
    Target,
    CompatibilityQuery,
    MomResult,
    compatible,
    mom_count,
    cons_enumerate,
    pair_sum_count,
    secant_count,
    localization_check,
)
from .norms import (
    MomentumMask,
    SectorKernel,
    NormReport,
    p_norm,
    omega_norm,
    channel_norm,
    compare_1_vs_3,
    omega_decomposition_check,
    channel_vs_3_check,
    resectorize,
)
from .harness import (
    ScanConfig,
    ScalingReport,
    scaling_scan,
    fit_exponent,
    sublevel_lemma_test,
    verify_bounds,
)

__version__ = "0.1.0"
