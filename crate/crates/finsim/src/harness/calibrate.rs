use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_targets, CalibrationTarget, CalibrationTargets};
use crate::optim::{minimize, ParameterSpace, SearchOptions};

/// Named scalar outputs of one model evaluation.
pub type Quantities = BTreeMap<String, f64>;

/// Objective charged for a point where the model cannot be evaluated.
const FAILED_EVALUATION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedParameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub quantity: String,
    pub target: f64,
    /// `None` when the model did not produce the quantity.
    pub simulated: Option<f64>,
    pub relative_error: Option<f64>,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub fitted: Vec<FittedParameter>,
    pub residuals: Vec<Residual>,
    pub objective: f64,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Best objective after each evaluation.
    pub history: Vec<f64>,
}

impl CalibrationReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.fitted.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn residual(&self, quantity: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.quantity == quantity)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn residuals(targets: &[CalibrationTarget], q: &Quantities) -> Vec<Residual> {
    targets
        .iter()
        .map(|t| {
            let simulated = q.get(&t.quantity).copied().filter(|v| v.is_finite());
            let relative_error = simulated.map(|s| (s - t.target_value) / t.target_value);
            Residual {
                quantity: t.quantity.clone(),
                target: t.target_value,
                simulated,
                relative_error,
                tolerance: t.tolerance,
                within_tolerance: relative_error.is_some_and(|e| e.abs() <= t.tolerance),
            }
        })
        .collect()
}

fn objective(targets: &[CalibrationTarget], q: &Quantities) -> f64 {
    targets
        .iter()
        .map(|t| match q.get(&t.quantity) {
            Some(s) if s.is_finite() => t.weight * ((s - t.target_value) / t.target_value).powi(2),
            _ => FAILED_EVALUATION,
        })
        .sum()
}

/// Fit the parameters of `space` so that `evaluate` reproduces `targets`.
///
/// The objective is `Σ weight·((simulated − target)/target)²`; evaluation
/// failures are charged a large constant. Running out of budget is not an
/// error: the report then has `converged = false`.
pub fn calibrate(
    space: &ParameterSpace,
    targets: &CalibrationTargets,
    budget: usize,
    mut evaluate: impl FnMut(&[f64]) -> Result<Quantities>,
) -> Result<CalibrationReport> {
    let mut v = space.violations();
    v.extend(validate_targets(targets));
    if targets.targets.is_empty() {
        v.push("no calibration targets".to_string());
    }
    if budget < 50 {
        v.push(format!("budget must be ≥ 50 evaluations, got {budget}"));
    }
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if let Some(t) = targets.targets.iter().find(|t| t.target_value == 0.0) {
        return Err(Error::Validation(vec![format!("{}: target value must be non-zero", t.quantity)]));
    }

    let options = SearchOptions {
        budget: budget - 1,
        ..SearchOptions::default()
    };
    let search = minimize(
        space,
        |p| match evaluate(p) {
            Ok(q) => objective(&targets.targets, &q),
            Err(_) => FAILED_EVALUATION * targets.targets.len() as f64,
        },
        &options,
    )?;

    let final_q = evaluate(&search.best).unwrap_or_default();
    let residuals = residuals(&targets.targets, &final_q);
    let converged = residuals.iter().all(|r| r.within_tolerance);
    Ok(CalibrationReport {
        fitted: space
            .entries
            .iter()
            .zip(&search.best)
            .map(|(p, &value)| FittedParameter {
                name: p.name.clone(),
                value,
            })
            .collect(),
        residuals,
        objective: search.best_value,
        evaluations: search.evaluations + 1,
        restarts: search.restarts,
        converged,
        history: search.history,
    })
}

/// Target with weight `1/tolerance²`, so each term is the squared error in
/// units of its own tolerance.
pub fn target(quantity: &str, target_value: f64, tolerance: f64) -> CalibrationTarget {
    CalibrationTarget {
        quantity: quantity.to_string(),
        target_value,
        weight: 1.0 / (tolerance * tolerance),
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{Parameter, Transform};

    fn plane() -> ParameterSpace {
        ParameterSpace::new(vec![
            Parameter::new("x", -10.0, 10.0, 0.0, Transform::Linear),
            Parameter::new("y", -10.0, 10.0, 0.0, Transform::Linear),
        ])
    }

    fn affine(p: &[f64]) -> Result<Quantities> {
        Ok(Quantities::from([
            ("a".to_string(), p[0] + 2.0 * p[1] + 10.0),
            ("b".to_string(), p[0] - p[1] + 10.0),
        ]))
    }

    fn ab_targets() -> CalibrationTargets {
        // Solved by x = 3, y = -1.
        CalibrationTargets::new(vec![target("a", 11.0, 1e-6), target("b", 14.0, 1e-6)])
    }

    #[test]
    fn fits_a_linear_model() {
        let r = calibrate(&plane(), &ab_targets(), 400, affine).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("x").unwrap() - 3.0).abs() < 1e-4);
        assert!((r.value("y").unwrap() + 1.0).abs() < 1e-4);
        assert_eq!(r.residuals.len(), 2);
        assert!(r.objective >= 0.0);
        assert!(r.evaluations <= 400);
    }

    #[test]
    fn identical_inputs_identical_report() {
        let a = calibrate(&plane(), &ab_targets(), 120, affine).unwrap();
        let b = calibrate(&plane(), &ab_targets(), 120, affine).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn exhausted_budget_is_not_an_error() {
        let r = calibrate(&plane(), &ab_targets(), 50, affine).unwrap();
        assert_eq!(r.evaluations, 50);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn missing_quantity_never_converges() {
        let targets = CalibrationTargets::new(vec![target("a", 11.0, 0.5), target("c", 1.0, 0.5)]);
        let r = calibrate(&plane(), &targets, 60, affine).unwrap();
        assert!(!r.converged);
        assert_eq!(r.residual("c").unwrap().simulated, None);
    }

    #[test]
    fn rejects_small_budget_and_bad_targets() {
        assert!(calibrate(&plane(), &ab_targets(), 49, affine).is_err());
        let mut t = ab_targets();
        t.targets[0].tolerance = 1.5;
        assert!(calibrate(&plane(), &t, 100, affine).is_err());
        assert!(calibrate(&plane(), &CalibrationTargets::default(), 100, affine).is_err());
    }

    #[test]
    fn failed_evaluations_are_penalised() {
        let r = calibrate(&plane(), &ab_targets(), 200, |p| {
            if p[0] < 0.0 {
                Err(Error::Domain("left half unsupported".into()))
            } else {
                affine(p)
            }
        })
        .unwrap();
        assert!(r.value("x").unwrap() >= 0.0);
    }
}
