//! Activations, losses and their analytic derivatives.

use super::linalg::{dot, norm, Matrix, Vector};
use crate::error::{check_dim, Error, Result};

/// Norms at or below this are treated as the zero vector by [`l2_normalize`].
pub const NORM_EPS: f64 = 1e-12;

/// `w·x + b`.
pub fn affine(w: &Matrix, x: &Vector, b: &Vector) -> Result<Vector> {
    check_dim("affine bias", w.rows(), b.dim())?;
    let mut y = w.matvec(x)?;
    for (yi, bi) in y.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *yi += bi;
    }
    Ok(y)
}

#[inline]
pub fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient of ReLU; 0 at the kink.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn relu(x: &Vector) -> Vector {
    x.as_slice().iter().map(|&v| relu_scalar(v)).collect()
}

/// Learnable square transform applied before the ReLU clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct TReluParams {
    w_a: Matrix,
}

impl TReluParams {
    /// Identity-initialized transform of width `dim`.
    pub fn new(dim: usize) -> Self {
        TReluParams {
            w_a: Matrix::identity(dim),
        }
    }

    pub fn from_matrix(w_a: Matrix) -> Result<Self> {
        if !w_a.is_square() {
            return Err(Error::contract(format!(
                "tReLU transform must be square, got {}x{}",
                w_a.rows(),
                w_a.cols()
            )));
        }
        Ok(TReluParams { w_a })
    }

    pub fn w_a(&self) -> &Matrix {
        &self.w_a
    }

    pub fn dim(&self) -> usize {
        self.w_a.rows()
    }
}

/// `max(w_a·z, 0)` element-wise, `z` being the affine pre-activation.
pub fn trelu(params: &TReluParams, z: &Vector) -> Result<Vector> {
    Ok(relu(&params.w_a.matvec(z)?))
}

/// Gradients of `trelu` given the upstream gradient `dy`:
/// returns `(d z, d w_a)`.
pub fn trelu_backward(params: &TReluParams, z: &Vector, dy: &Vector) -> Result<(Vector, Matrix)> {
    let u = params.w_a.matvec(z)?;
    check_dim("trelu upstream gradient", u.dim(), dy.dim())?;
    let du: Vec<f64> = u
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&ui, &gi)| gi * relu_grad(ui))
        .collect();
    let n = params.dim();
    let mut dw = Matrix::zeros(n, n);
    let mut dz = Vector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            dw[(i, j)] = du[i] * z[j];
            dz[j] += du[i] * params.w_a[(i, j)];
        }
    }
    Ok((dz, dw))
}

/// Unit-norm rescaling; vectors with norm `<= NORM_EPS` come back unchanged as zero.
pub fn l2_normalize(x: &Vector) -> Vector {
    let mut out = x.clone();
    l2_normalize_in_place(out.as_mut_slice());
    out
}

/// Returns the norm of the input.
pub(crate) fn l2_normalize_in_place(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > NORM_EPS {
        for v in x.iter_mut() {
            *v /= n;
        }
    } else {
        x.iter_mut().for_each(|v| *v = 0.0);
    }
    n
}

/// Backward pass of L2 normalization: `(dy − y (y·dy)) / ‖x‖`, zero for the
/// degenerate case.
pub(crate) fn l2_normalize_backward(y: &[f64], input_norm: f64, dy: &[f64], dx: &mut [f64]) {
    if input_norm <= NORM_EPS {
        dx.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let proj = dot(y, dy);
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(dy) {
        *d = (gi - yi * proj) / input_norm;
    }
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `y`, from the logit.
pub fn bce_loss(logit: f64, y: bool) -> f64 {
    let y = if y { 1.0 } else { 0.0 };
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// `d bce / d logit = sigmoid(logit) − y`.
pub fn bce_grad(logit: f64, y: bool) -> f64 {
    sigmoid(logit) - if y { 1.0 } else { 0.0 }
}
