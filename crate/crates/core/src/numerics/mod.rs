//! Dense arithmetic, activations, losses and gradient checking.

mod activation;
mod gradcheck;
mod linalg;

pub use activation::{
    affine, bce_grad, bce_loss, l2_normalize, relu, relu_grad, relu_scalar, sigmoid, trelu,
    trelu_backward, TReluParams, NORM_EPS,
};
pub(crate) use activation::{l2_normalize_backward, l2_normalize_in_place};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, Probe};
pub(crate) use linalg::{dot, norm};
pub use linalg::{Matrix, Vector};
