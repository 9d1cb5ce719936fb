//! Problem data: control bounds, reaction, target ball and data functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::DataFunction;
use crate::parabolic::Discretization;
use crate::scalar::Real;

/// Time-optimal control problem after the substitution `u = w + alpha y`:
/// steer `y' - Δy + alpha y = u`, `a <= u <= b`, from `y0` into the
/// `lambda`-ball around `y_target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec<R> {
    pub a: R,
    pub b: R,
    pub alpha: R,
    pub lambda: R,
    pub y0: DataFunction,
    pub y_target: DataFunction,
    /// Integrability exponent of the analysis; reported only.
    pub p_exponent: R,
}

impl<R: Real> ProblemSpec<R> {
    /// Data of the worked example: `y0 = 27 x1 (1 - x1) sin(pi x2)`,
    /// `y_target = 0`, `lambda = 0.1`, `-1 <= w + y/5 <= 3`.
    pub fn paper_example() -> Self {
        ProblemSpec {
            a: R::lit(-1.0),
            b: R::lit(3.0),
            alpha: R::lit(0.2),
            lambda: R::lit(0.1),
            y0: DataFunction::PaperExampleY0 { c: 27.0 },
            y_target: DataFunction::Zero,
            p_exponent: R::lit(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::InvalidArgument(format!("bounds require a < b, got a = {}, b = {}", self.a, self.b)));
        }
        if !(self.lambda > R::zero()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.alpha >= R::zero()) {
            return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Projection of the box onto `[a, b]`.
    #[inline]
    pub fn clip(&self, v: R) -> R {
        v.max(self.a).min(self.b)
    }

    /// `H(Π y0) = ½‖Π y0 - Π y_target‖² - λ²/2` on `disc`, required positive.
    pub fn initial_constraint_value(&self, disc: &Discretization<R>) -> R {
        crate::parabolic::constraint_value(&disc.project_y0(self), self, disc)
    }

    /// Validates the data and checks that the initial state lies outside the
    /// target ball.
    pub fn check_gate(&self, disc: &Discretization<R>) -> Result<R> {
        self.validate()?;
        let h0 = self.initial_constraint_value(disc);
        if h0 > R::zero() {
            Ok(h0)
        } else {
            Err(Error::InfeasibleData(format!(
                "H(y_0) = {h0} <= 0: the initial state already lies in the target ball"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_mesh, build_uniform_timegrid};

    #[test]
    fn validation() {
        let mut p = ProblemSpec::<f64>::paper_example();
        assert!(p.validate().is_ok());
        p.a = 3.0;
        assert!(p.validate().is_err());
        let mut p = ProblemSpec::<f64>::paper_example();
        p.lambda = 0.0;
        assert!(p.validate().is_err());
        let mut p = ProblemSpec::<f64>::paper_example();
        p.alpha = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn gate_rejects_reachable_start() {
        let disc = Discretization::new(build_uniform_mesh(8).unwrap(), build_uniform_timegrid(2).unwrap()).unwrap();
        let mut p = ProblemSpec::<f64>::paper_example();
        assert!(p.check_gate(&disc).is_ok());
        p.lambda = 10.0; // ball contains Π y0
        assert!(matches!(p.check_gate(&disc), Err(Error::InfeasibleData(_))));
        p.lambda = 0.1;
        p.y_target = p.y0.clone();
        assert!(p.check_gate(&disc).is_err());
    }
}
