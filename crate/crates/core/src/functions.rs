//! Named data functions on the unit square and manufactured space-time fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar function of `(x1, x2)` selected by name from [`FunctionRegistry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DataFunction {
    Zero,
    Constant { c: f64 },
    /// `c * x1 * (1 - x1) * sin(pi * x2)`
    PaperExampleY0 { c: f64 },
    /// `c * sin(k1 pi x1) * sin(k2 pi x2)`
    SineMode { c: f64, k1: u32, k2: u32 },
}

impl DataFunction {
    pub fn eval<R: Real>(&self, x: [R; 2]) -> R {
        let pi = R::PI();
        match *self {
            DataFunction::Zero => R::zero(),
            DataFunction::Constant { c } => R::lit(c),
            DataFunction::PaperExampleY0 { c } => {
                R::lit(c) * x[0] * (R::one() - x[0]) * (pi * x[1]).sin()
            }
            DataFunction::SineMode { c, k1, k2 } => {
                let k1 = R::from_u32(k1).unwrap();
                let k2 = R::from_u32(k2).unwrap();
                R::lit(c) * (k1 * pi * x[0]).sin() * (k2 * pi * x[1]).sin()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DataFunction::Zero)
            || matches!(self, DataFunction::Constant { c } if *c == 0.0)
            || matches!(self, DataFunction::PaperExampleY0 { c } if *c == 0.0)
            || matches!(self, DataFunction::SineMode { c, .. } if *c == 0.0)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DataFunction::Zero => "zero",
            DataFunction::Constant { .. } => "constant",
            DataFunction::PaperExampleY0 { .. } => "paper_example_y0",
            DataFunction::SineMode { .. } => "sine_mode",
        }
    }
}

/// Parameter schema of one registry entry: parameter name and default value.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSchema {
    pub name: &'static str,
    pub params: &'static [(&'static str, f64)],
}

/// Lookup of data functions by name and parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct FunctionRegistry;

impl FunctionRegistry {
    pub const SCHEMAS: &'static [FunctionSchema] = &[
        FunctionSchema { name: "zero", params: &[] },
        FunctionSchema { name: "constant", params: &[("c", 0.0)] },
        FunctionSchema { name: "paper_example_y0", params: &[("c", 27.0)] },
        FunctionSchema { name: "sine_mode", params: &[("c", 1.0), ("k1", 1.0), ("k2", 1.0)] },
    ];

    pub fn names(&self) -> impl Iterator<Item = &'static str> {
        Self::SCHEMAS.iter().map(|s| s.name)
    }

    /// Resolves `name` with `params`; missing parameters take their defaults,
    /// unknown ones are rejected.
    pub fn resolve(&self, name: &str, params: &BTreeMap<String, f64>) -> Result<DataFunction> {
        let schema = Self::SCHEMAS
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown function '{name}'")))?;
        for key in params.keys() {
            if !schema.params.iter().any(|(p, _)| p == key) {
                return Err(Error::InvalidArgument(format!("function '{name}' has no parameter '{key}'")));
            }
        }
        let get = |p: &str| {
            params
                .get(p)
                .copied()
                .unwrap_or_else(|| schema.params.iter().find(|(n, _)| *n == p).unwrap().1)
        };
        let mode = |p: &str| -> Result<u32> {
            let v = get(p);
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::InvalidArgument(format!("'{p}' must be a positive integer, got {v}")))
            }
        };
        Ok(match name {
            "zero" => DataFunction::Zero,
            "constant" => DataFunction::Constant { c: get("c") },
            "paper_example_y0" => DataFunction::PaperExampleY0 { c: get("c") },
            "sine_mode" => DataFunction::SineMode { c: get("c"), k1: mode("k1")?, k2: mode("k2")? },
            _ => unreachable!(),
        })
    }
}

/// Separable manufactured state `zeta(x, s) = g(s) w(x)` on the fixed
/// horizon, with `w` vanishing on the boundary.
///
/// The matching source follows from
/// `d_s zeta - T Laplace zeta + alpha T zeta = T v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Manufactured {
    /// `zeta = 0`
    Zero,
    /// `zeta = s sin(pi x1) sin(pi x2)`
    LinearSineSine,
}

impl Manufactured {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Manufactured::Zero),
            "linear_sine_sine" => Ok(Manufactured::LinearSineSine),
            _ => Err(Error::InvalidArgument(format!("unknown manufactured solution '{name}'"))),
        }
    }

    pub fn time_profile<R: Real>(&self, s: R) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => s,
        }
    }

    pub fn space_profile<R: Real>(&self, x: [R; 2]) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => (R::PI() * x[0]).sin() * (R::PI() * x[1]).sin(),
        }
    }

    pub fn state<R: Real>(&self, x: [R; 2], s: R) -> R {
        self.time_profile(s) * self.space_profile(x)
    }

    /// Control `v` with `T v = d_s zeta - T Laplace zeta + alpha T zeta`.
    pub fn control<R: Real>(&self, x: [R; 2], s: R, horizon: R, alpha: R) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => {
                let two_pi2 = R::lit(2.0) * R::PI() * R::PI();
                let w = self.space_profile(x);
                w * (R::one() / horizon + (two_pi2 + alpha) * s)
            }
        }
    }

    /// `∫ g(s)^2 ds` over `[s0, s1]`, exact.
    pub fn time_profile_sq_integral<R: Real>(&self, s0: R, s1: R) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => (s1 * s1 * s1 - s0 * s0 * s0) / R::lit(3.0),
        }
    }

    /// `∫ g(s) ds` over `[s0, s1]`, exact.
    pub fn time_profile_integral<R: Real>(&self, s0: R, s1: R) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => (s1 * s1 - s0 * s0) / R::lit(2.0),
        }
    }

    /// `‖w‖²_{L²(Ω)}`, exact.
    pub fn space_profile_sq_norm<R: Real>(&self) -> R {
        match self {
            Manufactured::Zero => R::zero(),
            Manufactured::LinearSineSine => R::lit(0.25),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_defaults_and_overrides() {
        let reg = FunctionRegistry;
        let f = reg.resolve("paper_example_y0", &BTreeMap::new()).unwrap();
        assert_eq!(f, DataFunction::PaperExampleY0 { c: 27.0 });
        assert!((f.eval([0.5f64, 0.5]) - 27.0 * 0.25).abs() < 1e-12);
        let mut p = BTreeMap::new();
        p.insert("c".to_string(), 2.0);
        assert_eq!(reg.resolve("paper_example_y0", &p).unwrap(), DataFunction::PaperExampleY0 { c: 2.0 });
        assert!(reg.resolve("zero", &p).is_err());
        assert!(reg.resolve("nope", &BTreeMap::new()).is_err());
        assert!(reg.names().any(|n| n == "zero"));
    }

    #[test]
    fn sine_mode_rejects_fractional_modes() {
        let mut p = BTreeMap::new();
        p.insert("k1".to_string(), 1.5);
        assert!(FunctionRegistry.resolve("sine_mode", &p).is_err());
    }

    #[test]
    fn manufactured_control_satisfies_pde() {
        // check d_s zeta - T Δzeta + αT zeta = T v by finite differences
        let m = Manufactured::LinearSineSine;
        let (t, alpha) = (0.3f64, 0.2);
        let (x, s, e) = ([0.3, 0.6], 0.4, 1e-4);
        let ds = (m.state([x[0], x[1]], s + e) - m.state(x, s - e)) / (2.0 * e);
        let lap = (m.state([x[0] + e, x[1]], s) + m.state([x[0] - e, x[1]], s) + m.state([x[0], x[1] + e], s)
            + m.state([x[0], x[1] - e], s)
            - 4.0 * m.state(x, s))
            / (e * e);
        let lhs = ds - t * lap + alpha * t * m.state(x, s);
        assert!((lhs - t * m.control(x, s, t, alpha)).abs() < 1e-5);
    }
}
