//! Small reverse-mode automatic differentiation engine over dense `f64`
//! matrices, with the operations the actor and critic networks use.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use params::{Gradients, NamedParam, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::{matmul, Tensor};
