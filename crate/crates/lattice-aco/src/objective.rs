//! Objective functions over box domains: the built-in test instances f1-f5
//! and user-supplied parsed expressions, plus the optimization sense.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expr};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("unknown built-in function `{name}`; valid choices are f1, f2, f3, f4, f5")]
    UnknownBuiltin { name: String },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("evaluation failed at {point:?}: {source}")]
    Eval {
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("expression references x{} but the domain has dimension {dim}", index + 1)]
    DimensionMismatch { index: usize, dim: usize },
}

/// Axis-aligned box `[lower[k], upper[k]]` per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ObjectiveError> {
        if lower.is_empty() {
            return Err(ObjectiveError::InvalidDomain(
                "domain must have at least one dimension".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(ObjectiveError::InvalidDomain(format!(
                "lower has {} dimensions but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for k in 0..lower.len() {
            if !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(ObjectiveError::InvalidDomain(format!(
                    "bounds of dimension {k} must be finite"
                )));
            }
            if lower[k] >= upper[k] {
                return Err(ObjectiveError::InvalidDomain(format!(
                    "dimension {k} needs lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// One-dimensional interval `[a, b]`.
    pub fn interval(a: f64, b: f64) -> Result<Self, ObjectiveError> {
        BoxDomain::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    /// Membership in the closed box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// True when `other` is fully contained in `self`.
    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|k| other.lower[k] >= self.lower[k] && other.upper[k] <= self.upper[k])
    }
}

/// Optimization direction. All colony logic works on oriented values where
/// smaller is better; `Maximize` negates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    pub fn orient(self, value: f64) -> f64 {
        match self {
            Sense::Minimize => value,
            Sense::Maximize => -value,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync>;

/// A deterministic scalar function with its box domain.
///
/// Immutable after construction; safe to evaluate from any number of
/// concurrent callers.
#[derive(Clone)]
pub struct ObjectiveFunction {
    name: String,
    domain: BoxDomain,
    evaluator: EvalFn,
}

impl fmt::Debug for ObjectiveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ObjectiveFunction {
    /// Wrap an infallible native function.
    pub fn from_fn<F>(name: impl Into<String>, domain: BoxDomain, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ObjectiveFunction {
            name: name.into(),
            domain,
            evaluator: Arc::new(move |p| Ok(f(p))),
        }
    }

    /// Wrap a parsed expression, checking its variables fit the domain.
    pub fn from_expr(
        name: impl Into<String>,
        domain: BoxDomain,
        expr: Expr,
    ) -> Result<Self, ObjectiveError> {
        if let Some(max) = expr.max_var() {
            if max >= domain.dim() {
                return Err(ObjectiveError::DimensionMismatch {
                    index: max,
                    dim: domain.dim(),
                });
            }
        }
        Ok(ObjectiveFunction {
            name: name.into(),
            domain,
            evaluator: Arc::new(move |p| expr.eval(p)),
        })
    }

    /// The paper's five test instances, with their printed domains.
    pub fn builtin(name: &str) -> Result<Self, ObjectiveError> {
        let f = match name {
            "f1" => ObjectiveFunction::from_fn(
                "f1",
                BoxDomain::interval(0.0, 1.0)?,
                |p| (5.1 * PI * p[0] + 0.5).sin().powi(6),
            ),
            "f2" => ObjectiveFunction::from_fn("f2", BoxDomain::interval(0.0, 8.0)?, |p| {
                let x = p[0];
                5.0 * (-0.5 * x).exp() * (30.0 * x).sin() + (0.2 * x).exp() * (20.0 * x).sin() + 6.0
            }),
            "f3" => ObjectiveFunction::from_fn(
                "f3",
                BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0])?,
                |p| {
                    p[0] * p[0] + p[1] * p[1] - (18.0 * p[0]).cos() - (18.0 * p[1]).cos()
                },
            ),
            "f4" => ObjectiveFunction::from_fn("f4", BoxDomain::interval(-5.0, 0.0)?, |p| {
                let x = p[0];
                (x + 1.0) * (x + 2.0) * (x + 3.0) * (x + 4.0) * (x + 5.0) + 5.0
            }),
            "f5" => ObjectiveFunction::from_fn("f5", BoxDomain::interval(0.0, 4.0)?, |p| {
                let x = p[0];
                (x + 2.0) * (9.0 * x).cos() + (7.0 * x).sin()
            }),
            other => {
                return Err(ObjectiveError::UnknownBuiltin {
                    name: other.to_string(),
                })
            }
        };
        Ok(f)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Raw evaluation without a domain check.
    pub fn evaluate(&self, p: &[f64]) -> Result<f64, ObjectiveError> {
        (self.evaluator)(p).map_err(|source| ObjectiveError::Eval {
            point: p.to_vec(),
            source,
        })
    }

    /// Oriented value: `f(p)` under `Minimize`, `-f(p)` under `Maximize`.
    /// Errors when `p` lies outside the domain.
    pub fn oriented_value(&self, sense: Sense, p: &[f64]) -> Result<f64, ObjectiveError> {
        if !self.domain.contains(p) {
            return Err(ObjectiveError::OutOfDomain { point: p.to_vec() });
        }
        Ok(sense.orient(self.evaluate(p)?))
    }

    /// Same evaluator restricted to a sub-box of the domain.
    pub fn restricted(&self, sub: BoxDomain) -> Result<Self, ObjectiveError> {
        if !self.domain.contains_box(&sub) {
            return Err(ObjectiveError::InvalidDomain(format!(
                "restriction {:?}..{:?} is not contained in the domain of {}",
                sub.lower(),
                sub.upper(),
                self.name
            )));
        }
        Ok(ObjectiveFunction {
            name: self.name.clone(),
            domain: sub,
            evaluator: Arc::clone(&self.evaluator),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values_match_the_tables() {
        // Both sine terms vanish at zero.
        assert_eq!(
            ObjectiveFunction::builtin("f2").unwrap().evaluate(&[0.0]).unwrap(),
            6.0
        );
        // Table 3, point 1.
        assert_eq!(
            ObjectiveFunction::builtin("f5").unwrap().evaluate(&[0.0]).unwrap(),
            2.0
        );
        assert_eq!(
            ObjectiveFunction::builtin("f3")
                .unwrap()
                .evaluate(&[0.0, 0.0])
                .unwrap(),
            -2.0
        );
        // Table 2, point 1.
        assert_eq!(
            ObjectiveFunction::builtin("f4").unwrap().evaluate(&[-5.0]).unwrap(),
            5.0
        );
    }

    #[test]
    fn builtin_domains() {
        let f1 = ObjectiveFunction::builtin("f1").unwrap();
        assert_eq!(f1.domain().lower(), &[0.0]);
        assert_eq!(f1.domain().upper(), &[1.0]);
        let f3 = ObjectiveFunction::builtin("f3").unwrap();
        assert_eq!(f3.domain().dim(), 2);
        assert_eq!(f3.domain().lower(), &[-1.0, -1.0]);
    }

    #[test]
    fn unknown_builtin_names_choices() {
        let err = ObjectiveFunction::builtin("f9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("f9") && msg.contains("f1") && msg.contains("f5"), "{msg}");
    }

    #[test]
    fn oriented_value_negates_under_maximize() {
        let f3 = ObjectiveFunction::builtin("f3").unwrap();
        assert_eq!(f3.oriented_value(Sense::Minimize, &[0.0, 0.0]).unwrap(), -2.0);
        assert_eq!(f3.oriented_value(Sense::Maximize, &[0.0, 0.0]).unwrap(), 2.0);
        let f5 = ObjectiveFunction::builtin("f5").unwrap();
        assert_eq!(f5.oriented_value(Sense::Maximize, &[0.0]).unwrap(), -2.0);
    }

    #[test]
    fn oriented_value_rejects_points_outside_the_domain() {
        let f1 = ObjectiveFunction::builtin("f1").unwrap();
        assert!(matches!(
            f1.oriented_value(Sense::Minimize, &[2.0]),
            Err(ObjectiveError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn domain_invariants_enforced() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn restriction_must_nest() {
        let f1 = ObjectiveFunction::builtin("f1").unwrap();
        assert!(f1.restricted(BoxDomain::interval(0.2, 0.4).unwrap()).is_ok());
        assert!(f1.restricted(BoxDomain::interval(0.5, 1.5).unwrap()).is_err());
    }

    #[test]
    fn expression_dimension_check() {
        let expr = crate::expr::parse("x1+x2", 2).unwrap();
        let err = ObjectiveFunction::from_expr("g", BoxDomain::interval(0.0, 1.0).unwrap(), expr)
            .unwrap_err();
        assert!(matches!(err, ObjectiveError::DimensionMismatch { .. }));
    }

    #[test]
    fn concurrent_evaluation() {
        let f3 = ObjectiveFunction::builtin("f3").unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let f = f3.clone();
                std::thread::spawn(move || f.evaluate(&[0.25, -0.25]).unwrap())
            })
            .collect();
        let values: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] == w[1]));
    }
}
