"""2D chromatogram alignment toolkit.

Pipeline: load chromatogram grids, extract peak centroids with h-maxima,
register the two peak clouds with a hybrid rigid/non-rigid Gaussian-mixture
EM procedure, warp the template mask and the target image, score alignment
quality (CC/SSIM) and quantify chemical families.
"""

from .errors import (
    ChromalignError,
    DegenerateGeometryError,
    EmptyPeakSetError,
    FormatError,
    InputError,
    NumericalUnderflowError,
    SingularSystemError,
    UndefinedMetricError,
    ValidationError,
)
from .geometry import Polygon, point_in_polygon, points_in_polygon
from .grids import IntensityGrid, load_grid, save_grid
from .masks import (
    AreaOfInterest,
    Blob,
    TemplateMask,
    read_aoi,
    read_mask,
    write_aoi,
    write_mask,
)
from .morphology import h_maxima_regions, reconstruct_by_dilation, regional_maxima
from .peaks import PeakSet, extract_peaks, read_peaks_csv, write_peaks_csv
from .registration import (
    GaussianKernelBasis,
    HybridTransform,
    RegistrationConfig,
    RegistrationResult,
    build_kernel,
    register,
    scan_noise_weight,
)
from .warping import bilinear_sample, transform_points, warp_image, warp_mask
from .metrics import (
    AlignmentScore,
    QuantReport,
    alignment_score,
    compare_reports,
    correlation_coefficient,
    quantify,
    ssim,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentScore",
    "AreaOfInterest",
    "Blob",
    "ChromalignError",
    "DegenerateGeometryError",
    "EmptyPeakSetError",
    "FormatError",
    "GaussianKernelBasis",
    "HybridTransform",
    "InputError",
    "IntensityGrid",
    "NumericalUnderflowError",
    "PeakSet",
    "Polygon",
    "QuantReport",
    "RegistrationConfig",
    "RegistrationResult",
    "SingularSystemError",
    "TemplateMask",
    "UndefinedMetricError",
    "ValidationError",
    "alignment_score",
    "bilinear_sample",
    "build_kernel",
    "compare_reports",
    "correlation_coefficient",
    "extract_peaks",
    "h_maxima_regions",
    "load_grid",
    "point_in_polygon",
    "points_in_polygon",
    "quantify",
    "read_aoi",
    "read_mask",
    "read_peaks_csv",
    "reconstruct_by_dilation",
    "regional_maxima",
    "register",
    "save_grid",
    "scan_noise_weight",
    "ssim",
    "transform_points",
    "warp_image",
    "warp_mask",
    "write_aoi",
    "write_mask",
    "write_peaks_csv",
]
