//! Small dense feed-forward networks: ReLU layers, inverted dropout,
//! MSE and softmax cross-entropy losses, Adam, early stopping.

mod grad;
mod io;
mod model;
mod train;

pub use grad::{evaluate_loss, loss_and_gradients, Dataset, Gradients, LossKind, Targets};
pub use io::{ModelDocument, MODEL_SCHEMA_VERSION};
pub use model::{
    forward, init_model, predict_class, relu_stack, softmax, Activation, Head, LayerSpec,
    MlpModel,
};
pub(crate) use model::argmax;
pub use train::{train, EarlyStopping, EpochRecord, TrainConfig, TrainOutcome};
