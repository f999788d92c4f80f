"""Pedestrian environment model: tracked identities, world positions and 3D skeletons
from per-frame 2D skeletons and ego localization."""

from .errors import (BehindCameraError, ConfigError, DegenerateGeometryError, IngestionError,
                     InvalidInputError, NoParallaxError, PedemError)
from .geometry import (CameraModel, Ray, load_camera, pixel_to_ray, project_to_pixel, triangulate,
                       yaw_rotation)
from .pipeline import Pipeline, bench, run_pipeline
from .position import KalmanCV, PedestrianEstimate, RefineConfig, estimate, height_px, initial_position, refine
from .skeleton import BBox, Skeleton2D, Skeleton3D, bbox_from_skeleton, select_confident
from .tracker import EgoPose, Track, Tracker, compensate_yaw, giou, hungarian

__version__ = "0.1.0"
