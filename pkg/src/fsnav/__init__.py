"""Freespace-map perception pipeline.

Binary freespace maps (from any segmenter backend) plus camera geometry
become weighted 3D obstacle pointclouds and a navigation costmap:
gradient preprocessing, border extraction, ground-plane backprojection,
blur weighting, costmap integration, and a synthetic-scene oracle to
verify the lot.
"""

from .costmap import Costmap, RobotPose, supercover_cells
from .errors import (
    AboveHorizon,
    BackendError,
    BackendTimeout,
    ConfigError,
    DistortionError,
    DomainError,
    FsnavError,
    ImageTooSmall,
    InvalidChannels,
    OutOfBounds,
    ProtocolError,
    SceneError,
    ShapeError,
)
from .evaluation import (
    MetricReport,
    Rect,
    SceneSpec,
    make_corpus,
    miou,
    poly_lr,
    relu6_rewrite,
    render_scene,
)
from .extraction import (
    BorderPoint,
    Contour,
    ExtractionConfig,
    border_predicate,
    contour_border_points,
    extract,
    extract_contours,
    polar_projection,
    vertical_projection,
)
from .imaging import (
    BlurFactor,
    CropMeta,
    GradientStack,
    blur_factor,
    convolve3x3,
    gradient_stack,
    preprocess_frame,
    to_grayscale,
)
from .pipeline import PipelineConfig, bench, run_pipeline
from .projection import (
    CameraModel,
    Point3D,
    PointCloud3D,
    backproject_ground,
    build_pointcloud,
    map_to_image_coords,
    pixel_ray,
    undistort_point,
    write_ply,
)
from .segmenter import ExecBackend, FileBackend, FloodBackend

__version__ = "0.1.0"
