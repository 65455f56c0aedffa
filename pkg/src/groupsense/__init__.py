"""Group-interaction recognition from RGB-D skeleton keypoints.

Per-frame pipeline: lift 17-joint keypoint detections to 3D with the
camera model, estimate each person's ground-plane position and facing
direction via body-plane fitting, cluster persons, intersect facing rays
to find interaction zones, and rasterize the zones into a social costmap
layer for navigation.
"""

from .calibration import (
    CameraCalibration,
    default_d435i_calibration,
    load_calibration,
    parse_calibration,
    save_calibration,
)
from .costmap import GridSpec, SocialCostmap, merge_costmaps, rasterize_groups, read_costmap, write_costmap
from .errors import (
    BehindCameraError,
    CalibrationError,
    DegenerateNormalError,
    EmptyPolygonError,
    FrameParseError,
    GroupsenseError,
    IncompatibleGridsError,
    InsufficientKeypointsError,
    InvalidDepthError,
)
from .frames import FrameRecord, parse_frames, parse_frames_file, write_frames
from .geometry import (
    align_depth_to_color,
    camera_to_world,
    deproject_depth_pixel,
    fill_keypoint_depths,
    keypoint_to_3d,
    lookup_depth,
    person_position,
    project_to_color,
    transform_depth_to_color,
)
from .grouping import (
    FacingRay,
    GroupingConfig,
    InteractionGroup,
    build_interaction_polygon,
    classify_interaction,
    dbscan,
    facing_ray,
    mean_dispersion,
    polygon_area,
    polygon_centroid,
    ray_intersection,
    recognize_groups,
    refine_cluster,
)
from .orientation import (
    BodyPlane,
    center_keypoints,
    covariance,
    disambiguate_facing,
    eigendecompose_sym3,
    estimate_person_state,
    facing_angle,
    fit_body_plane,
)
from .pipeline import FrameResult, PipelineConfig, localize_frame, process_frame
from .scenarios import (
    PersonSpec,
    ScenarioSpec,
    ScenarioTruth,
    builtin_scenarios,
    get_scenario,
    synthesize_scenario,
)
from .skeleton import KEYPOINT_NAMES, Keypoint2D, Keypoint3D, PersonState

__version__ = "0.1.0"
