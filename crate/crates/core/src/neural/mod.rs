//! Networks: the fixed addition nets, trainable token-grid classifiers and the
//! hand-built natural-logic oracle.

pub mod checkpoint;
pub mod fixed;
pub mod grid;
pub mod oracle;
pub mod train;

pub use fixed::{AdditionTrace, FixedAdditionNet};
pub use grid::{argmax, Architecture, Csr, Forward, GridLayer, GridLocation, Mixing, TokenGridNetwork};
pub use oracle::OracleNetwork;
pub use train::{
    accuracy, grad_check, grad_check_against, loss, loss_and_gradients, train, train_state, GradCheckReport,
    TrainConfig, TrainItem, TrainState,
};
