// Float intrinsics are not available in `core`; libm also keeps results
// identical across targets.
pub(crate) use libm::{ceil, cos, exp, fabs as abs, floor, log as ln, pow, round, sin, sqrt, tanh};
