//! Dense tensor arithmetic with reverse-mode automatic differentiation.

pub mod fault;
mod gemm;
mod gradcheck;
mod tape;

pub use gradcheck::{grad_check, grad_check_many, grad_check_on, relative_error, GradCheckReport, REL_FLOOR};
pub use tape::{BinaryOp, Gradients, OpKind, ReduceOp, Tape, UnaryOp, Var};

#[cfg(test)]
mod tests;
