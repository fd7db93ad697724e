"""Expressivity instrumentation for small piecewise-linear networks."""

__version__ = "0.1.0"

from .net import (
    ActivationPattern,
    LayerTrace,
    Network,
    NetworkSpec,
    UnsupportedActivation,
    activation_pattern,
    forward,
    forward_batch,
    init_network,
    load_network,
    network_pattern,
    save_network,
)
from .trajectory import (
    GrowthBounds,
    GrowthCurve,
    LengthProfile,
    Trajectory,
    analytic_input_length,
    growth_ratio_curve,
    layer_image_length,
    make_trajectory,
    theoretical_growth_bounds,
)
from .sweep import (
    DichotomyResult,
    SweepResult,
    TransitionEvent,
    count_transitions_curved,
    exact_transition_sweep,
    random_walk_dichotomy_baseline,
    remaining_depth_dichotomies,
    transitions_vs_length,
    weight_sweep_dichotomies,
)
from .regions import (
    ArrangementCount,
    PlaneDecomposition,
    RegionCell,
    activation_pattern_bound,
    count_regions_sampling,
    decompose_input_plane,
    region_bound,
    region_recurrence,
    render_regions_svg,
)
from .data import (
    Dataset,
    IdxBadMagic,
    IdxCountMismatch,
    IdxError,
    IdxTruncated,
    interpolation_trajectory,
    load_idx,
    shuffle_split,
    synth_blobs,
    write_idx,
)
from .train import (
    NonFiniteLoss,
    TrainConfig,
    TrainHistory,
    backprop_grads,
    layer_noise_robustness,
    sgd_train,
    train_single_layer_experiment,
    trajectory_length_during_training,
)

__all__ = [name for name in dir() if not name.startswith("_")]
