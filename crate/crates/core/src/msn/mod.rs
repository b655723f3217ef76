//! Mask selection network: a patch-based convolutional comparator that
//! decides which of two candidate masks better fits the object in an image.

mod arch;
mod data;
mod io;
mod net;
mod select;
mod train;

pub use arch::{count_params_flops, layer_budget, Budget, LayerSpec, MsnArch, KERNEL};
pub use data::{
    generate_pairs, label_pair, pair_tensor, selection_box, Degradation, DegradationKind,
    PairSample, PairSet, PerturbConfig, Side,
};
pub use io::{load_model, save_model, ModelFile, MODEL_FORMAT, MODEL_VERSION};
pub use net::{
    bce_with_logit, sigmoid, ForwardOutput, LayerParams, LossAndGrad, MsnModel, TENSOR_NAMES,
};
pub use select::{
    heuristic_score, heuristic_select, select, select_raw, Selection, ROUGHNESS_WEIGHT,
};
pub use train::{
    evaluate_pairs, heuristic_accuracy, split_dataset, train, Adam, EpochStats, PairMetrics,
    TrainConfig, TrainOutcome,
};
