use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real floating-point scalar used by the numeric core.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Convergence tolerance for iterative solvers: `requested`, floored a little
    /// above machine epsilon so that `f32` runs terminate.
    fn solver_tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0);
        let req = Self::lit(requested);
        if req > floor {
            req
        } else {
            floor
        }
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
}
