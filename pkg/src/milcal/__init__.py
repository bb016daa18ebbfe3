"""Targetless LiDAR-camera extrinsic calibration from semantic labels.

The extrinsic transform is found by maximizing a neural lower bound on
the mutual information between per-point class labels and the image
labels they project onto. A range-image registration + PnP pipeline
provides the initial pose, and a procedural scene generator supplies
ground-truth data for verification.
"""

from .calibrator import (CalibConfig, CalibFrame, CalibrationRun, PointCloudFrame,
                         calibrate, mi_landscape)
from .errors import (CalibError, DegenerateGeometryError, DegenerateRotationError,
                     DegenerateSceneError, DivergedError, EmptyBatchError,
                     InsufficientCorrespondencesError, InvalidArgumentError,
                     InvalidConfigError, NonFiniteError)
from .geometry import (CameraIntrinsics, Pose, ProjectedPoints, Twist, project,
                       project_pullback, se3_exp, se3_log)
from .initializer import (InitAggregate, RegistrationResult, SphericalConfig,
                          SphericalLabelImage, ZoomedLabelImage, aggregate_inits,
                          discrete_mi, modified_z_scores, pnp_solve, register_2d,
                          run_initialization, sample_correspondences,
                          spherical_project, zoom_label_image)
from .mine import (AdamState, MiEstimate, StatisticsNetwork, ascent_step,
                   critic_forward, dv_bound, dv_pullback, load_network, save_network)
from .sampling import (LabelImage, LabelPlanes, SoftLabelBatch, bilinear_sample,
                       bilinear_sample_pullback, to_one_hot)
from .synth import (GroundTruthBundle, SceneSpec, corrupt_labels, generate,
                    label_consistency, pose_error)

__version__ = "0.1.0"
