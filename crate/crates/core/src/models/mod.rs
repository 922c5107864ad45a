//! The two trained networks: the fixed node classifier and the edge
//! homophily predictor, plus their checkpoint format.

mod checkpoint;
mod classifier;
mod network;
mod predictor;
mod training;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, LossKind, ModelRole, TrainingMetadata,
    CHECKPOINT_VERSION,
};
pub use classifier::{
    classifier_logits, classifier_objective, predict_labels, train_classifier, Prediction,
};
pub use network::{ArchitectureSpec, DenseLayer, Gradients, ModelKind, Network, DEFAULT_HIDDEN};
pub use predictor::{
    build_edge_training_set, edge_homophily_scores, predictor_objective,
    train_homophily_predictor, EdgeLoss, EdgeScoreTable, EdgeTrainingSet, PredictorConfig,
};
pub use training::TrainConfig;
