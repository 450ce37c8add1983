//! The classifier `f(·; θ)` and closed-form fixture models.

mod mlp;
mod quadratic;

pub use mlp::{argmax, cross_entropy, Activation, LabeledBatch, MlpObjective, MlpSpec};
pub use quadratic::{quadratic_loss_and_grad, QuadraticFixture};
