// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod control;
pub mod der;
pub mod disturbance;
pub mod hvac;
pub mod networks;
pub mod runtime;
pub mod scenario;
pub mod sim;
pub mod thermal;
