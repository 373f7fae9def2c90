"""Prototype-condensed cross-attention over spatio-temporal feature memories.

Past frames are distilled into Gaussian-mixture prototypes (EM on key
vectors); attention reads then touch N prototypes instead of every
memory pixel, giving linear instead of quadratic cost.  The package also
ships the dense-attention oracle, per-object contrastive fg/bg prototypes
with momentum propagation, an instrumented cost model, and a synthetic
toy tracker that exercises the whole online loop.
"""

from .baseline import KernelSpec, nonlocal_attend
from .core import (FeatureMap, ProjectionParams, RngStream, encode_keys_values,
                   pairwise_sq_dists, softmax, sq_dist)
from .costs import CostReport, mhsa_cost, nonlocal_cost, pca_cost
from .gmm import (AssignmentMap, EmConfig, PrototypeSet, build_prototype_set,
                  fit_gmm, log_likelihood, m_step, posterior, value_prototypes)
from .instance import (AttentionPair, InstanceTrack, MaskMap, extract_fg_bg,
                       fit_instance_protos, fuse_mask, instance_attention_maps,
                       mask_to_logits, propagate)
from .memory import (AggregationResult, MemoryBank, ReconstructedFrame,
                     aggregate, attend, multi_level_aggregate, reconstruct_all)
from .synth import (MaskCorruption, Metrics, ObjectSpec, SceneConfig,
                    TrackerParams, TrackOutput, corrupt_mask, crossing_scene,
                    encode_frame, evaluate, generate_sequence, run_tracker)

__version__ = "0.1.0"

__all__ = [
    "AggregationResult", "AssignmentMap", "AttentionPair", "CostReport",
    "EmConfig", "FeatureMap", "InstanceTrack", "KernelSpec", "MaskCorruption",
    "MaskMap", "MemoryBank", "Metrics", "ObjectSpec", "ProjectionParams",
    "PrototypeSet", "ReconstructedFrame", "RngStream", "SceneConfig",
    "TrackOutput", "TrackerParams", "aggregate", "attend",
    "build_prototype_set", "corrupt_mask", "crossing_scene",
    "encode_frame", "encode_keys_values", "evaluate", "extract_fg_bg",
    "fit_gmm", "fit_instance_protos", "fuse_mask", "generate_sequence",
    "instance_attention_maps", "log_likelihood", "m_step", "mask_to_logits",
    "mhsa_cost", "multi_level_aggregate", "nonlocal_attend", "nonlocal_cost",
    "pairwise_sq_dists", "pca_cost", "posterior", "propagate",
    "reconstruct_all", "run_tracker", "softmax", "sq_dist",
    "value_prototypes",
]
