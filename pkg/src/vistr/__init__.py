"""Visual relocalisation via generated visible structure.

A scene-specific conditional generator maps a global image embedding to the
3D structure likely visible in that view; the generated points select a
submap of the SfM cloud by exact radius search; 2D-3D descriptor matching
plus robust perspective-n-point estimation yield the camera pose.
"""

from .bundle_io import (QueryFeatures, QuerySet, load_queries,
                        load_scene_bundle, load_text_queries, load_text_scene,
                        save_queries, save_scene_bundle, save_text_queries,
                        save_text_scene)
from .errors import (ConfigError, DataError, DegenerateGeometryError,
                     FileMissingError, FormatError, InsufficientMatchesError,
                     IntegrityError, NoSubmapError, ShapeError,
                     TrainingDivergedError, UndefinedMetricError, VistrError)
from .geometry import CameraIntrinsics, Pose, rotation_angle_deg
from .localize import (PoseEstimate, RetrievalConfig, StageTimings, localize)
from .matching import MatchResult, match_descriptors
from .metrics import (EvalReport, build_eval_report, pose_errors,
                      recall_at_thresholds, retrieval_metrics, storage_report,
                      timing_report)
from .pnp import (RansacConfig, RansacResult, p3p_solve, ransac_pnp,
                  refine_pose, reproject)
from .retrieval import (GeneratedPointSet, SpatialIndex, Submap,
                        radius_retrieve, sample_structure, voxel_downsample)
from .scene import (NormTransform, SceneBundle, build_training_pairs,
                    compute_norm_transform, make_bundle)
from .synthetic import SyntheticSceneConfig, generate_synthetic_scene
from .vae import (TrainConfig, VaeModel, elbo_loss, init_model,
                  kl_to_standard_normal, load_model, reconstruction_loglik,
                  save_model, train)

__version__ = "1.0.0"
