"""cloudup: projection-based arbitrary-scale point cloud upsampling.

Queries seeded around a sparse cloud are projected onto its underlying
surface by gradient descent on an unsigned-distance field — either a
trained multi-scale network or an exact analytic oracle. Curvature
scores drive both the network's progressive sampling and an easy/hard
training curriculum.
"""

from .curvature import (
    SamplingLadder,
    curvature_sample,
    curvature_skewness,
    curvature_values,
    estimate_normals,
    fps,
    global_curvature,
)
from .estimator import CloudUpsampler, CurvatureScorer
from .geometry import (
    NeighborIndex,
    NormalizationTransform,
    build_index,
    normalize,
    random_rotation,
)
from .io import read_cloud, read_off_mesh, write_cloud, write_off_mesh
from .metrics import (
    MetricReport,
    TriangleMesh,
    add_noise,
    chamfer,
    evaluate,
    hausdorff,
    p2f,
)
from .model import (
    DistanceNet,
    encode,
    init_model,
    parameter_gradients,
    predict_distance,
    predict_distances,
    query_gradient,
    query_gradients,
)
from .shapes import (
    Box,
    PatchPair,
    Plane,
    ShapeOracle,
    Sphere,
    Torus,
    analytic_udf,
    make_patch_dataset,
    parse_shape_spec,
    sample_surface,
)
from .training import (
    Checkpoint,
    TrainConfig,
    TrainSample,
    classify_difficulty,
    curriculum_schedule,
    generate_queries,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)
from .upsampling import (
    ModelField,
    OracleField,
    ProjectionParams,
    prepare_field,
    project,
    seed_queries,
    upsample,
    upsample_with_model,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Checkpoint",
    "CloudUpsampler",
    "CurvatureScorer",
    "DistanceNet",
    "MetricReport",
    "ModelField",
    "NeighborIndex",
    "NormalizationTransform",
    "OracleField",
    "PatchPair",
    "Plane",
    "ProjectionParams",
    "SamplingLadder",
    "ShapeOracle",
    "Sphere",
    "Torus",
    "TrainConfig",
    "TrainSample",
    "TriangleMesh",
    "add_noise",
    "analytic_udf",
    "build_index",
    "chamfer",
    "classify_difficulty",
    "curriculum_schedule",
    "curvature_sample",
    "curvature_skewness",
    "curvature_values",
    "encode",
    "estimate_normals",
    "evaluate",
    "fps",
    "generate_queries",
    "global_curvature",
    "hausdorff",
    "init_model",
    "load_checkpoint",
    "make_patch_dataset",
    "normalize",
    "p2f",
    "parameter_gradients",
    "parse_shape_spec",
    "predict_distance",
    "predict_distances",
    "prepare_field",
    "project",
    "query_gradient",
    "query_gradients",
    "random_rotation",
    "read_cloud",
    "read_off_mesh",
    "sample_surface",
    "save_checkpoint",
    "seed_queries",
    "train",
    "train_step",
    "upsample",
    "upsample_with_model",
    "write_cloud",
    "write_off_mesh",
]
