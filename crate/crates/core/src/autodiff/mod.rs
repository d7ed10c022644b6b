//! Scalar reverse-mode automatic differentiation.
//!
//! Models are written once against [`Real`] and run either on plain `f64`
//! (simulation) or on tape [`Var`]s (training, MPC).

mod optim;
mod tape;

pub use optim::{descend, DescentConfig, DescentReport};
pub use tape::{OpKind, Tape, Var, DIV_GUARD};

use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("parameter slot {0} is not bound")]
    UnboundParameter(usize),
    #[error("backward called before forward")]
    ForwardNotRun,
    #[error("division guard triggered at node {node}")]
    DivisionGuard { node: usize },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("tape has no nodes")]
    EmptyTape,
    #[error("finite-difference step {0} outside (0, 1e-2]")]
    BadStep(f64),
    #[error("non-finite loss")]
    NonFiniteLoss,
}

/// Arithmetic shared by `f64` and tape variables.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant living in the same domain as `self`.
    fn lift(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn softplus(self) -> Self;
    fn max0_smooth(self, beta: f64) -> Self;
    /// Plain value, for diagnostics.
    fn val(self) -> f64;

    fn affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        weights.iter().zip(inputs).fold(bias, |acc, (&w, &x)| acc + w * x)
    }
}

impl Real for f64 {
    fn lift(self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn softplus(self) -> Self {
        tape::softplus(self)
    }
    fn max0_smooth(self, beta: f64) -> Self {
        tape::softplus(beta * self) / beta
    }
    fn val(self) -> f64 {
        self
    }
}

impl Real for Var<'_> {
    fn lift(self, c: f64) -> Self {
        self.tape().constant(c)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn softplus(self) -> Self {
        Var::softplus(self)
    }
    fn max0_smooth(self, beta: f64) -> Self {
        Var::max0_smooth(self, beta)
    }
    fn val(self) -> f64 {
        self.value()
    }
    fn affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        bias.tape().affine(weights, inputs, bias)
    }
}

/// Inverse of softplus for y > 0.
pub fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus range is (0, ∞)");
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_inverse_roundtrip() {
        for y in [1e-6, 0.3, 1.0, 12.0, 45.0] {
            let x = softplus_inv(y);
            assert!((Real::softplus(x) - y).abs() / y < 1e-12);
        }
    }

    #[test]
    fn f64_and_tape_agree() {
        fn f<R: Real>(x: R, y: R) -> R {
            (x * y + 1.0).tanh() / (y.exp() + 2.0) - x.softplus() * 0.5 + (x - y).max0_smooth(4.0)
        }
        let (x, y) = (0.4, -1.1);
        let t = Tape::new();
        f(t.param(0), t.param(1));
        assert!((t.forward(&[x, y]).unwrap() - f(x, y)).abs() < 1e-15);
    }
}
