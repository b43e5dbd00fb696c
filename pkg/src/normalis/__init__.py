"""normalis: surface-normal maps from depth/disparity images.

The closed-form axial estimator turns per-neighbor normal candidates into
an inclination via doubled-angle statistics, which makes it immune to the
sign ambiguities that degrade averaging estimators near creases and object
boundaries.  The package bundles that estimator, the classic baselines it
is measured against, analytic synthetic scenes with exact ground truth,
angular-error and segmentation metrics, lossless file formats, and the
``normalis`` benchmark CLI.
"""

from .candidates import (
    EPS_CANDIDATE,
    EPS_DZ,
    EPS_GRADIENT,
    Neighborhood,
    PixelCandidates,
    azimuth,
    candidates_at,
    division_candidates_at,
    is_frontoparallel,
)
from .estimators import (
    ESTIMATOR_NAMES,
    EstimatorConfig,
    InclinationSolution,
    axial_optimal_inclination,
    estimate_normals,
    estimate_normals_reference,
    grid_search_inclination,
    inclination_objective,
    plane_pca_normal,
)
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    DisparityImage,
    InverseDepthImage,
    NormalMap,
    back_project,
    disparity_as_inverse_depth,
    inverse_to_depth,
    orient_toward_camera,
    project,
    to_inverse_depth,
)
from .gradients import (
    CENTRAL_DIFFERENCE,
    PREWITT,
    SOBEL,
    GradientField,
    GradientKernel,
    compute_gradients,
    kernel_by_name,
)
from .metrics import (
    AngularErrorMap,
    ConfusionCounts,
    angular_error_map,
    confusion,
    fscore,
    iou,
    max_angular_error,
    mean_angular_error,
    median_angular_error,
)
from .synthetic import (
    DihedralScene,
    NoiseSpec,
    PlaneScene,
    SphereScene,
    add_noise,
    ground_truth_normals,
    plane_from_view,
    render_depth,
    surface_depth_at,
)

__version__ = "0.1.0"
