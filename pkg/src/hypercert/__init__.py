"""hypercert: box-shaped certified regions around embedding classes.

Build hyperrectangle region sets (single box, negative-shrunk, per-cluster,
optionally rotated into a PCA basis) around the positive class of a
sentence-embedding dataset, train small robust MLP classifiers against them,
and soundly verify with interval bound propagation whether the classifier
holds its prediction everywhere inside.
"""

from .config import ExperimentConfig, default_config, load_config, parse_config, save_config
from .dataset import EmbeddingDataset, EmbeddingRecord, Label, Split, load, partition, save, split_arrays
from .errors import (
    BadSpec,
    ConfigError,
    ConstraintViolation,
    DegenerateInput,
    DimMismatch,
    Divergence,
    DuplicateId,
    EmptyInput,
    HypercertError,
    IoFailure,
    KTooLarge,
    MalformedFile,
    MisclassifiedPoint,
    NonFiniteValue,
    ProvenanceMismatch,
    RejectionExhausted,
    SearchExhausted,
)
from .geometry import (
    Hyperrectangle,
    RegionSet,
    RotationTransform,
    bounding_box,
    build_region_set,
    cluster_hypercubes,
    containment_report,
    fit_rotation,
    kmeans,
    log_volume,
    log_volume_box,
    log_volume_eps_ball,
    parse_variant,
    region_contains,
    sample_in_boxes,
    search_min_k,
    shrink_to_exclude,
)
from .network import (
    EvalResult,
    Layer,
    LayerSpec,
    MlpNetwork,
    TrainConfig,
    default_layer_specs,
    evaluate,
    forward,
    gradients,
    init_network,
    linear_probe,
    load_network,
    predict_batch,
    save_network,
    train,
)
from .robust import (
    AttackConfig,
    AugmentConfig,
    augment_from_regions,
    fgsm,
    make_adversary,
    pgd,
    sample_complement,
    sample_inside,
)
from .verify import (
    FALSIFIED,
    UNKNOWN,
    VERIFIED,
    VerificationResult,
    VerifyOptions,
    certified_margin,
    epsilon_search,
    falsify,
    ibp_forward,
    verify_region,
    verify_region_set,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
