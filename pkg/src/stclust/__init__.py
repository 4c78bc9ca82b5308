"""Trajectory clustering by evolving per-interval segment clusters, with an outlier stability pass."""

from .errors import (
    ConfigError,
    ContractViolation,
    DataError,
    DegenerateTrack,
    InvariantViolation,
    NoOutliers,
    ParseError,
    UndefinedMetric,
)
from .geometry import Point2, Segment, segment_distance, segment_distance_oracle
from .segment_clustering import ClusterHistory, DbscanParams, Density, evolve
from .stability import stabilize
from .trajectory import RawTrack, Trajectory, preprocess, segmentize
from .trajectory_clustering import (
    WholeClustering,
    WindowParams,
    sub_trajectory_clusters,
    whole_trajectory_clusters,
)

__version__ = "0.1.0"
